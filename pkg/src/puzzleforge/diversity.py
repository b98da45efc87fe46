"""Dataset diversity analytics over code embeddings.

Cluster entropy over nearest-centroid assignments, nearest-neighbor squared
distance to a reference set, and syntax-tree size summaries. Embeddings are
external inputs (unit vectors, renormalized on ingestion); no embedding
service is ever called from here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import Dataset


class DegenerateInput(ValueError):
    """Fewer distinct points than requested clusters."""


class DimensionMismatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class MissingCounts(ValueError):
    def __init__(self, ids: list[str]) -> None:
        super().__init__(f"puzzles without a known node count: {ids[:10]}")
        self.ids = ids


@dataclass(frozen=True)
class EmbeddingSet:
    """Unit-norm vectors keyed by puzzle id, one row per id."""

    ids: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or len(self.ids) != self.vectors.shape[0]:
            raise DimensionMismatch("one vector row per id required")

    @classmethod
    def from_rows(cls, rows: list[tuple[str, list[float]]]) -> EmbeddingSet:
        """Build from (id, vector) rows, enforcing one dimension and unit norm."""
        if not rows:
            raise EmptyInput("no embedding rows")
        dim = len(rows[0][1])
        ids = []
        vectors = np.empty((len(rows), dim), dtype=np.float64)
        for i, (row_id, vec) in enumerate(rows):
            if len(vec) != dim:
                raise DimensionMismatch(
                    f"row {row_id!r} has dimension {len(vec)}, expected {dim}")
            ids.append(row_id)
            vectors[i] = vec
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0.0):
            bad = [ids[i] for i in np.flatnonzero(norms == 0.0)[:5]]
            raise ValueError(f"zero-norm embedding rows: {bad}")
        vectors /= norms[:, None]
        return cls(ids=tuple(ids), vectors=vectors)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Clustering:
    centroids: np.ndarray
    seed: int
    n_clusters: int
    inertia: float

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")


def _sq_dists_to(point: np.ndarray, x: np.ndarray) -> np.ndarray:
    diff = x - point[None, :]
    return np.einsum("ij,ij->i", diff, diff)


def _kmeans_pp_init(x: np.ndarray, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((n_clusters, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centers[0] = x[first]
    closest = _sq_dists_to(centers[0], x)
    for j in range(1, n_clusters):
        total = closest.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = x[idx]
        np.minimum(closest, _sq_dists_to(centers[j], x), out=closest)
    return centers


def _lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int,
           tol: float) -> tuple[np.ndarray, float]:
    n_clusters = centers.shape[0]
    centers = centers.copy()
    labels, sq = _kernels.assign_nearest(x, centers)
    for _ in range(max_iter):
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        counts = np.bincount(labels, minlength=n_clusters).astype(np.float64)
        empty = np.flatnonzero(counts == 0)
        new_centers = np.where(counts[:, None] > 0,
                               sums / np.maximum(counts, 1.0)[:, None], centers)
        for cluster in empty:
            # Relocate an empty centroid onto the current worst-fit point.
            farthest = int(np.argmax(sq))
            new_centers[cluster] = x[farthest]
            sq[farthest] = 0.0
        shift = float(((new_centers - centers) ** 2).sum())
        centers = new_centers
        labels, sq = _kernels.assign_nearest(x, centers)
        if shift < tol:
            break
    return centers, float(sq.sum())


def kmeans(ref: EmbeddingSet, n_clusters: int, seed: int,
           n_restarts: int = 10, max_iter: int = 300, tol: float = 1e-4) -> Clustering:
    """Lloyd's iterations from k-means++ seeding; keeps the lowest-inertia
    restart. Deterministic for a given seed."""
    if n_clusters < 2:
        raise DegenerateInput("need at least 2 clusters")
    x = ref.vectors
    distinct = len({row.tobytes() for row in x})
    if distinct < n_clusters:
        raise DegenerateInput(
            f"{distinct} distinct points cannot support {n_clusters} clusters")
    rng = np.random.default_rng(seed)
    best_centers: np.ndarray | None = None
    best_inertia = math.inf
    for _ in range(n_restarts):
        centers = _kmeans_pp_init(x, n_clusters, rng)
        centers, inertia = _lloyd(x, centers, max_iter, tol)
        if inertia < best_inertia:
            best_inertia = inertia
            best_centers = centers
    assert best_centers is not None
    return Clustering(centroids=best_centers, seed=seed,
                      n_clusters=n_clusters, inertia=best_inertia)


def assign(vector, clustering: Clustering) -> int:
    """Index of the closest centroid; ties break to the lowest index."""
    point = np.asarray(vector, dtype=np.float64)
    if point.ndim != 1 or point.shape[0] != clustering.centroids.shape[1]:
        raise DimensionMismatch(
            f"vector of dimension {point.shape} against "
            f"{clustering.centroids.shape[1]}-dimensional centroids")
    labels, _ = _kernels.assign_nearest(point[None, :], clustering.centroids)
    return int(labels[0])


def assign_all(embeddings: EmbeddingSet, clustering: Clustering) -> np.ndarray:
    if embeddings.dim != clustering.centroids.shape[1]:
        raise DimensionMismatch("embedding dimension differs from centroids")
    labels, _ = _kernels.assign_nearest(embeddings.vectors, clustering.centroids)
    return labels


def cluster_counts(labels: np.ndarray, n_clusters: int) -> list[int]:
    return np.bincount(labels, minlength=n_clusters).tolist()


def entropy(counts: list[int]) -> float:
    """Shannon entropy in bits of the normalized count distribution.

    Zero counts contribute nothing; the maximum over C nonzero clusters is
    log2(C), reached exactly at uniform counts.
    """
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise EmptyInput("all counts are zero")
    return sum((c / total) * math.log2(total / c) for c in counts if c)


@dataclass(frozen=True)
class NearestRef:
    query_id: str
    ref_id: str
    sq_dist: float


def nearest_sq_dist(queries: EmbeddingSet, reference: EmbeddingSet) -> list[NearestRef]:
    """Closest reference per query with squared Euclidean distance.

    Both sets hold unit vectors, so d^2 = 2(1 - max dot product); exact
    duplicates come out at 0 (clamped against rounding).
    """
    if queries.dim != reference.dim:
        raise DimensionMismatch(
            f"queries are {queries.dim}-D, reference is {reference.dim}-D")
    idx, dots = _kernels.nearest_by_dot(queries.vectors, reference.vectors)
    out = []
    for qi, (ri, dot) in enumerate(zip(idx, dots)):
        sq = max(0.0, 2.0 * (1.0 - float(dot)))
        out.append(NearestRef(queries.ids[qi], reference.ids[int(ri)], sq))
    return out


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    q1: float
    median: float
    q3: float


def ast_size_stats(dataset: Dataset) -> SummaryStats:
    """Summary of syntax-tree node counts; quartiles by linear interpolation."""
    missing = [e.puzzle.id for e in dataset if e.puzzle.ast_node_count is None]
    if missing:
        raise MissingCounts(missing)
    counts = np.array([e.puzzle.ast_node_count for e in dataset], dtype=np.float64)
    if counts.size == 0:
        raise EmptyInput("empty dataset")
    q1, median, q3 = np.percentile(counts, [25, 50, 75])
    return SummaryStats(count=int(counts.size), mean=float(counts.mean()),
                        q1=float(q1), median=float(median), q3=float(q3))
