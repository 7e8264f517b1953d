# /services/matching.py
# Pearson correlation between vote profiles, the overlap-significance weighting that turns it into
# the matching function m, and pairwise antibody matrices.
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from cachetools import LRUCache

from services.dataset import Profile, RatingsTable
from settings import settings
from utils.errors import usage_error

log = logging.getLogger(__name__)

DEFAULT_OVERLAP_THRESHOLD = 50


@dataclass(frozen=True)
class MatchScore:
    raw_pearson: float
    overlap: int
    weighted: float  # the m value


@dataclass(frozen=True)
class MatchMatrix:
    users: tuple[int, ...]
    entries: np.ndarray  # symmetric, zero diagonal

    def __len__(self) -> int:
        return len(self.users)


def pearson(a: Profile, b: Profile) -> tuple[float, int]:
    """
    Pearson correlation over co-voted items. Returns (0, overlap) when fewer than two items are
    shared or either side is constant on the shared items.
    """
    common = sorted(a.keys() & b.keys())
    overlap = len(common)
    if overlap < 2:
        return 0.0, overlap
    x = np.fromiter((a[i] for i in common), dtype=float, count=overlap)
    y = np.fromiter((b[i] for i in common), dtype=float, count=overlap)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0, overlap
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy))))
    return max(-1.0, min(1.0, r)), overlap


def significance_weight(overlap: int, overlap_threshold: int) -> float:
    return min(overlap, overlap_threshold) / overlap_threshold


def significance_weighted_match(a: Profile, b: Profile, overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD) -> MatchScore:
    if overlap_threshold < 1:
        raise usage_error("overlap_threshold must be at least 1")
    raw, overlap = pearson(a, b)
    return MatchScore(raw, overlap, raw * significance_weight(overlap, overlap_threshold))


class Matcher:
    """
    Memoises user-user matches over one table. Antigen matches are not cached: the antigen is a
    partial profile that changes every trial.
    """

    def __init__(self, table: RatingsTable, overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD, cache_size: int | None = None) -> None:
        if overlap_threshold < 1:
            raise usage_error("overlap_threshold must be at least 1")
        self.table = table
        self.overlap_threshold = overlap_threshold
        self.cache: LRUCache = LRUCache(maxsize=cache_size or settings.match_cache_size)
        self._lock = threading.Lock()

    def between(self, u: int, v: int) -> MatchScore:
        key = (u, v) if u <= v else (v, u)
        with self._lock:
            hit = self.cache.get(key)
        if hit is not None:
            return hit
        score = significance_weighted_match(self.table.profile(key[0]), self.table.profile(key[1]), self.overlap_threshold)
        with self._lock:
            self.cache[key] = score
        return score

    def against(self, antigen: Profile, user: int) -> MatchScore:
        return significance_weighted_match(antigen, self.table.profile(user), self.overlap_threshold)

    def row(self, user: int, others: Sequence[int]) -> np.ndarray:
        return np.array([self.between(user, o).weighted if o != user else 0.0 for o in others], dtype=float)


def pairwise_matrix(
    users: Sequence[int],
    table: RatingsTable,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    matcher: Matcher | None = None,
) -> MatchMatrix:
    matcher = ensure_matcher(matcher, table, overlap_threshold)
    n = len(users)
    for u in users:
        table.profile(u)  # unknown users fail here
    entries = np.zeros((n, n), dtype=float)
    for i in range(n):
        for j in range(i + 1, n):
            entries[i, j] = entries[j, i] = matcher.between(users[i], users[j]).weighted
    return MatchMatrix(tuple(users), entries)


def ensure_matcher(matcher: Matcher | None, table: RatingsTable, overlap_threshold: int) -> Matcher:
    if matcher is None or matcher.table is not table or matcher.overlap_threshold != overlap_threshold:
        return Matcher(table, overlap_threshold)
    return matcher
