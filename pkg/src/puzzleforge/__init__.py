"""Self-play toolkit for programming puzzles.

Validates and de-duplicates model-written puzzles, filters trivially
solvable ones, verifies candidate solutions in sandboxed workers under a
hard timeout, assembles verified fine-tuning datasets, and computes pass@k
and embedding-diversity analytics.
"""

from .model import (
    Dataset,
    GenMeta,
    JudgedPair,
    Origin,
    PipelineConfig,
    Puzzle,
    Solution,
    TypeHint,
    Verdict,
    VerdictKind,
    canonical_key,
    puzzle_id,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "GenMeta",
    "JudgedPair",
    "Origin",
    "PipelineConfig",
    "Puzzle",
    "Solution",
    "TypeHint",
    "Verdict",
    "VerdictKind",
    "canonical_key",
    "puzzle_id",
    "__version__",
]
