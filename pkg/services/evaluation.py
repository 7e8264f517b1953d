# /services/evaluation.py
# Scoring: mean absolute error for predictions, Kendall's Tau (discordant-pair form) for
# recommendation lists, the Wilcoxon matched-pairs signed-rank test used for every comparison,
# and the four neighbourhood characteristics compared between algorithms.
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from services.dataset import RatingsTable, TargetSplit
from services.matching import DEFAULT_OVERLAP_THRESHOLD, Matcher, ensure_matcher
from services.neighbourhood import Neighbourhood
from utils.errors import data_error

DEFAULT_EXACT_CUTOFF = 20


@dataclass(frozen=True)
class TauResult:
    tau: float
    n_overlap: int
    n_discordant: int


@dataclass(frozen=True)
class PairedTestResult:
    n_unequal: int
    rank_sum_first: float  # ranks of pairs where first > second
    rank_sum_second: float
    p_upper_bound: float  # two-sided
    exact: bool


@dataclass(frozen=True)
class NeighbourhoodStats:
    size: int
    overlap: int | None = None
    mean_target_correlation: float | None = None
    mean_inter_neighbour_correlation: float | None = None
    mean_target_raw_correlation: float | None = None
    mean_inter_neighbour_raw_correlation: float | None = None


def mae(pairs: Sequence[tuple[float, float]]) -> float:
    if not pairs:
        raise data_error("mae needs at least one (predicted, actual) pair")
    return float(np.mean([abs(p - a) for p, a in pairs]))


def kendall_tau(recommended_order: Sequence[int], actual_votes: Mapping[int, float]) -> TauResult:
    """
    tau = 1 - 4 N_D / (n (n - 1)). Items are ranked by actual vote, best first, tied votes share
    the mean of their positions; a pair is discordant only when the item recommended earlier has
    a strictly worse actual rank.
    """
    n = len(recommended_order)
    if n < 2:
        raise data_error("kendall_tau needs at least 2 recommended items")
    if len(set(recommended_order)) != n:
        raise data_error("recommended items must be distinct")
    missing = [i for i in recommended_order if i not in actual_votes]
    if missing:
        raise data_error(f"no actual vote for recommended item(s) {missing[:5]}")

    votes = np.array([actual_votes[i] for i in recommended_order], dtype=float)
    ranks = stats.rankdata(-votes, method="average")
    n_discordant = sum(1 for i, j in itertools.combinations(range(n), 2) if ranks[i] > ranks[j])
    tau = 1 - 4 * n_discordant / (n * (n - 1))
    return TauResult(tau, n, n_discordant)


def _signed_rank_counts(doubled_ranks: Sequence[int]) -> np.ndarray:
    """
    counts[s] = number of sign assignments whose positive doubled-rank sum is s. Equivalent to
    enumerating all 2^n assignments, in O(n * total) instead.
    """
    total = int(sum(doubled_ranks))
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(
    pairs: Sequence[tuple[float, float]],
    exact_cutoff: int = DEFAULT_EXACT_CUTOFF,
) -> PairedTestResult | None:
    """
    Two-sided Wilcoxon matched-pairs signed-rank test. Zero differences are dropped; returns None
    ("no test possible") when nothing is left.
    """
    if not pairs:
        raise data_error("wilcoxon_signed_rank needs at least one pair")
    diffs = np.array([a - b for a, b in pairs], dtype=float)
    diffs = diffs[diffs != 0]
    n = int(diffs.size)
    if n == 0:
        return None

    ranks = stats.rankdata(np.abs(diffs), method="average")
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())

    if n <= exact_cutoff:
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_counts(doubled)
        w2 = int(round(2 * w_plus))
        lower = int(counts[: w2 + 1].sum())
        upper = int(counts[w2:].sum())
        p = min(1.0, 2 * min(lower, upper) / 2**n)
        return PairedTestResult(n, w_plus, w_minus, p, exact=True)

    mean = n * (n + 1) / 4
    _, tie_sizes = np.unique(np.abs(diffs), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float(np.sum(tie_sizes**3 - tie_sizes)) / 48
    z = max(0.0, abs(w_plus - mean) - 0.5) / math.sqrt(var)
    p = min(1.0, 2 * float(stats.norm.sf(z)))
    return PairedTestResult(n, w_plus, w_minus, p, exact=False)


def _mean_or_none(values: Sequence[float]) -> float | None:
    return float(np.mean(values)) if values else None


def neighbourhood_stats(
    nb: Neighbourhood,
    target_split: TargetSplit,
    table: RatingsTable,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    matcher: Matcher | None = None,
) -> NeighbourhoodStats:
    members = nb.user_ids()
    if not members:
        return NeighbourhoodStats(size=0)
    matcher = ensure_matcher(matcher, table, overlap_threshold)

    covered = set()
    for u in members:
        covered.update(table.profile(u).keys())
    overlap = sum(1 for item in target_split.hidden_votes if item in covered)

    target_scores = [matcher.against(target_split.visible_profile, u) for u in members]
    pair_scores = [matcher.between(u, v) for u, v in itertools.combinations(members, 2)]

    return NeighbourhoodStats(
        size=len(members),
        overlap=overlap,
        mean_target_correlation=_mean_or_none([s.weighted for s in target_scores]),
        mean_inter_neighbour_correlation=_mean_or_none([s.weighted for s in pair_scores]),
        mean_target_raw_correlation=_mean_or_none([s.raw_pearson for s in target_scores]),
        mean_inter_neighbour_raw_correlation=_mean_or_none([s.raw_pearson for s in pair_scores]),
    )


def common_unique_counts(nb_a: Neighbourhood, nb_b: Neighbourhood) -> tuple[int, int, int]:
    a, b = set(nb_a.user_ids()), set(nb_b.user_ids())
    return len(a & b), len(a - b), len(b - a)
