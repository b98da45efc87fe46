"""Pass@k estimation and aggregation.

Uses the unbiased estimator 1 - C(n-c, k)/C(n, k) in a running-product form
that stays in [0, 1] and never forms a factorial, so n up to 10^6 is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

ALL_ROW = "(all)"


class DomainError(ValueError):
    """A precondition on (n, c, k) or on result-set alignment was violated."""


class MissingDomain(DomainError):
    """A domain tag appears in only one of two result sets being compared."""


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that a uniform k-subset of n samples contains a correct one."""
    if not 0 <= c <= n:
        raise DomainError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    miss = 1.0
    for i in range(k):
        miss *= (n - c - i) / (n - i)
    return 1.0 - miss


@dataclass(frozen=True)
class PassSample:
    """Per-puzzle attempt tally: n sampled, c judged correct."""

    n: int
    c: int


def aggregate(per_puzzle: list[PassSample], ks: list[int]) -> list[tuple[int, float]]:
    """Mean pass@k over puzzles for each k; the curve is non-decreasing in k."""
    if not per_puzzle:
        raise DomainError("no puzzles to aggregate")
    if list(ks) != sorted(ks) or len(set(ks)) != len(ks):
        raise DomainError("ks must be strictly ascending")
    top = max(ks)
    for sample in per_puzzle:
        if sample.n < top:
            raise DomainError(f"puzzle has n={sample.n} < max k={top}")
    curve = []
    for k in ks:
        mean = sum(pass_at_k(s.n, s.c, k) for s in per_puzzle) / len(per_puzzle)
        curve.append((k, mean))
    return curve


@dataclass(frozen=True)
class DomainRow:
    domain: str
    count: int
    baseline: float
    treatment: float


def domain_breakdown(
    treatment: dict[str, PassSample],
    baseline: dict[str, PassSample],
    domains: dict[str, str],
    k: int = 100,
    baseline_domains: dict[str, str] | None = None,
) -> list[DomainRow]:
    """Per-domain mean pass@k, normalized by the baseline's overall mean.

    Both result sets must cover the same puzzle ids and every id must carry a
    domain tag; a tag appearing in only one set's tagging raises
    MissingDomain. The baseline's "(all)" row is exactly 1.0 by construction.
    """
    if set(treatment) != set(baseline):
        raise DomainError("treatment and baseline cover different puzzle ids")
    untagged = set(treatment) - set(domains)
    if untagged:
        raise MissingDomain(f"ids without a domain tag: {sorted(untagged)[:5]}")
    if baseline_domains is not None:
        ours = {domains[pid] for pid in treatment}
        theirs = {baseline_domains.get(pid) for pid in baseline}
        orphans = ours.symmetric_difference(theirs)
        if orphans:
            raise MissingDomain(f"tags present in one set only: {sorted(map(str, orphans))}")
    by_domain: dict[str, list[str]] = {}
    for pid in treatment:
        by_domain.setdefault(domains[pid], []).append(pid)

    def mean_pass(samples: dict[str, PassSample], ids: list[str]) -> float:
        return sum(pass_at_k(samples[i].n, samples[i].c, k) for i in ids) / len(ids)

    overall = mean_pass(baseline, list(baseline))
    if overall == 0.0:
        raise DomainError("baseline solves nothing; normalization undefined")
    rows = []
    for domain in sorted(by_domain):
        ids = by_domain[domain]
        rows.append(DomainRow(
            domain=domain,
            count=len(ids),
            baseline=mean_pass(baseline, ids) / overall,
            treatment=mean_pass(treatment, ids) / overall,
        ))
    all_ids = list(treatment)
    rows.append(DomainRow(
        domain=ALL_ROW,
        count=len(all_ids),
        baseline=mean_pass(baseline, all_ids) / overall,
        treatment=mean_pass(treatment, all_ids) / overall,
    ))
    return rows
