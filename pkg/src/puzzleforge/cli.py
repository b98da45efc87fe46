"""Operator command line.

Every subcommand is a thin shell over module operations; all randomness
flows from explicit seeds. Configuration precedence is: config file, then
flags, then environment variables. Errors exit nonzero with one
machine-readable JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from dataclasses import replace

from . import __version__, diversity, metrics, pipeline, storage
from .judge import (
    DEFAULT_TIMEOUT_MS,
    LocalBackend,
    ProcessPoolBackend,
    SandboxBackend,
    SandboxJob,
    judge_batch,
)
from .model import GenMeta, Origin, Puzzle, Solution
from .trivial import is_trivial
from .validator import ParseReport, validate_puzzle


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("shim", "local"), default="shim",
                        help="shim: worker processes (safe for untrusted code); "
                             "local: in-process, trusted fixtures only")
    parser.add_argument("--shim-cmd", default=None,
                        help="worker command line (default: env "
                             "PUZZLEFORGE_SHIM_CMD or 'python -m puzzleforge_shim')")


def _make_backend(args) -> SandboxBackend:
    if args.backend == "local":
        return LocalBackend()
    cmd = tuple(shlex.split(args.shim_cmd)) if args.shim_cmd else None
    return ProcessPoolBackend(worker_cmd=cmd)


def _origin_from_flag(value: str) -> Origin:
    return Origin(value)


def cmd_validate(args) -> int:
    records = list(storage.iter_jsonl(args.infile))
    origin = _origin_from_flag(args.origin)
    with _make_backend(args) as backend:
        jobs = [SandboxJob.parse(str(r["src"]), args.timeout_ms) for r in records]
        reports = backend.run_many(jobs, args.workers)
    out = []
    accepted = 0
    for record, report in zip(records, reports):
        src = str(record["src"])
        if not isinstance(report, ParseReport):
            report = ParseReport(ok=False, error="parse job failed")
        outcome = validate_puzzle(src, report, origin, record.get("domain_tag"))
        if isinstance(outcome, Puzzle):
            accepted += 1
            out.append({"ok": True, "puzzle": storage.puzzle_to_record(outcome)})
        else:
            out.append({"ok": False, "reason": outcome.reason.value,
                        "detail": outcome.detail, "src": src})
    storage.write_jsonl(args.out, out)
    print(f"validated {len(records)} sources: {accepted} accepted, "
          f"{len(records) - accepted} rejected -> {args.out}")
    return 0


def cmd_filter_trivial(args) -> int:
    dataset = storage.load_dataset(args.infile)
    report_records = []
    survivors = []
    with _make_backend(args) as backend:
        for entry in dataset:
            result = is_trivial(entry.puzzle, backend, args.timeout_ms)
            report_records.append({
                "id": entry.puzzle.id,
                "trivial": result.trivial,
                "witness": result.witness,
                "detail": result.detail,
            })
            if not result.trivial:
                survivors.append(storage.puzzle_to_record(entry.puzzle,
                                                          entry.solutions))
    storage.write_jsonl(args.out, report_records)
    if args.survivors:
        storage.write_jsonl(args.survivors, survivors)
    kept = len(survivors)
    print(f"probed {len(report_records)} puzzles: {kept} non-trivial -> {args.out}")
    return 0


def cmd_judge(args) -> int:
    dataset = storage.load_dataset(args.puzzles)
    by_id = {entry.puzzle.id: entry.puzzle for entry in dataset}
    solution_records = list(storage.iter_jsonl(args.solutions))
    pairs = []
    for record in solution_records:
        pid = str(record["puzzle_id"])
        if pid not in by_id:
            raise ValueError(f"solution references unknown puzzle id {pid!r}")
        meta = record.get("meta", {})
        solution = Solution.from_src(
            str(record["g_src"]),
            GenMeta(model_tag=str(meta.get("model_tag", "unknown")),
                    temperature=float(meta.get("temperature", 0.0)),
                    attempt_index=int(meta.get("attempt_index", 0))),
        )
        pairs.append((by_id[pid], solution))
    with _make_backend(args) as backend:
        judged = judge_batch(pairs, args.workers, backend,
                             timeout_ms=args.timeout_ms, truthy=args.truthy)
    storage.write_jsonl(
        args.out,
        (storage.judged_pair_to_record(pair, index)
         for index, pair in enumerate(judged)),
    )
    correct = sum(1 for p in judged if p.verdict.kind.value == "Correct")
    print(f"judged {len(judged)} pairs: {correct} correct -> {args.out}")
    return 0


def cmd_generate(args) -> int:
    config, lm_section = storage.load_config(args.config)
    overrides = {}
    if args.iterations is not None:
        overrides["n_iterations"] = args.iterations
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    if args.unverified:
        overrides["unverified"] = True
    if overrides:
        config = replace(config, **overrides)
    lm_kind = str(lm_section.get("kind", "mock"))
    if lm_kind != "mock":
        raise ValueError(f"no client registered for lm.kind={lm_kind!r}; "
                         "only the deterministic mock ships with this toolkit")
    lm = pipeline.MockLM(seed=int(lm_section.get("seed", config.rng_seed)),
                         correct_rate=float(lm_section.get("correct_rate", 1.0)))
    train = storage.load_puzzles(args.train)
    with _make_backend(args) as backend:
        state, reports = pipeline.run_pipeline(config, lm, backend, train,
                                               workers=args.workers)
    storage.save_dataset(state, args.out)
    if args.finetune_out and len(state) > 0:
        pipeline.emit_finetune_file(state, args.finetune_out)
    for report in reports:
        print(f"iteration {report.iteration}: "
              + " ".join(f"{k}={v}" for k, v in report.counts.items())
              + f" wall_s={report.wall_s:.2f}")
    print(f"dataset of {len(state)} puzzles / {state.pair_count()} pairs -> {args.out}")
    return 0


def cmd_emit_finetune(args) -> int:
    dataset = storage.load_dataset(args.infile)
    blocks = pipeline.emit_finetune_file(dataset, args.out)
    print(f"wrote {blocks} blocks -> {args.out}")
    return 0


def cmd_passk(args) -> int:
    ks = sorted({int(k) for k in args.k.split(",") if k.strip()})
    if not ks:
        raise ValueError("--k needs at least one value")
    samples = storage.fold_attempts(storage.iter_jsonl(args.verdicts))
    if not samples:
        print("no verdicts; nothing to report")
        return 0
    curve = metrics.aggregate(list(samples.values()), ks)
    lines = ["k,pass_at_k"] + [f"{k},{value:.6f}" for k, value in curve]
    if args.domains and args.baseline:
        domains = storage.load_domains(args.domains)
        baseline = storage.fold_attempts(storage.iter_jsonl(args.baseline))
        rows = metrics.domain_breakdown(samples, baseline, domains, k=max(ks))
        lines.append("")
        lines.append("domain,count,normalized_baseline,normalized_treatment")
        for row in rows:
            lines.append(f"{row.domain},{row.count},{row.baseline:.4f},"
                         f"{row.treatment:.4f}")
    elif args.domains or args.baseline:
        raise ValueError("--domains and --baseline must be given together")
    text = "\n".join(lines)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    print(text)
    return 0


def cmd_diversity(args) -> int:
    queries = storage.load_embeddings(args.embeddings)
    reference = storage.load_embeddings(args.ref)
    report: dict = {"queries": len(queries), "reference": len(reference)}
    entropies = []
    for run_seed in range(args.seed, args.seed + args.runs):
        clustering = diversity.kmeans(reference, args.clusters, run_seed)
        labels = diversity.assign_all(queries, clustering)
        counts = diversity.cluster_counts(labels, args.clusters)
        entropies.append(diversity.entropy(counts))
    report["entropy_bits"] = {
        "runs": [round(e, 6) for e in entropies],
        "mean": sum(entropies) / len(entropies),
        "clusters": args.clusters,
    }
    nearest = diversity.nearest_sq_dist(queries, reference)
    sq = [n.sq_dist for n in nearest]
    report["nearest_sq_dist"] = {
        "mean": sum(sq) / len(sq),
        "min": min(sq),
        "max": max(sq),
        "frac_below_0.1": sum(1 for v in sq if v < 0.1) / len(sq),
    }
    if args.dataset:
        stats = diversity.ast_size_stats(storage.load_dataset(args.dataset))
        report["ast_nodes"] = {"count": stats.count, "mean": stats.mean,
                               "q1": stats.q1, "median": stats.median,
                               "q3": stats.q3}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2)
            handle.write("\n")
    print(f"entropy over {args.runs} runs (C={args.clusters}): "
          f"mean {report['entropy_bits']['mean']:.4f} bits")
    print(f"nearest d^2: mean {report['nearest_sq_dist']['mean']:.4f} "
          f"min {report['nearest_sq_dist']['min']:.4f} "
          f"max {report['nearest_sq_dist']['max']:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="puzzleforge",
        description="Self-play pipeline for programming puzzles")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--schema", action="store_true",
                        help="print the exact record schemas and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("validate", help="run the validity funnel over raw sources")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--origin", choices=("human-train", "human-test"),
                   default="human-train")
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--workers", type=int, default=1)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("filter-trivial", help="probe puzzles over candidate pools")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--survivors", default=None,
                   help="also write non-trivial puzzle records here")
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--workers", type=int, default=1)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_filter_trivial)

    p = sub.add_parser("judge", help="verify (puzzle, solution) pairs")
    p.add_argument("--puzzles", required=True)
    p.add_argument("--solutions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--truthy", action="store_true",
                   help="accept truthy verifier returns, not only the boolean True")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("generate", help="run the full self-play pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--unverified", action="store_true",
                   help="skip correctness filtering (ablation data path)")
    p.add_argument("--finetune-out", default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_generate, backend="local")

    p = sub.add_parser("emit-finetune", help="write the fine-tune text file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_finetune)

    p = sub.add_parser("passk", help="pass@k tables from verdict records")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--k", default="1,10,100")
    p.add_argument("--domains", default=None)
    p.add_argument("--baseline", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_passk)

    p = sub.add_parser("diversity", help="cluster entropy and distance report")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--clusters", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--dataset", default=None,
                   help="dataset file for syntax-tree size stats")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diversity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        print(json.dumps(storage.SCHEMAS, indent=2))
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except Exception as exc:
        record = {"error": type(exc).__name__, "detail": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
