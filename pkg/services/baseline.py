# /services/baseline.py
# The Simple Pearson comparator: the n users best matched to the antigen, weighted by that match.
from __future__ import annotations

from services.dataset import Profile, RatingsTable
from services.matching import DEFAULT_OVERLAP_THRESHOLD, Matcher, ensure_matcher
from services.neighbourhood import Neighbourhood, Provenance
from utils.errors import usage_error


def simple_pearson_neighbourhood(
    table: RatingsTable,
    antigen: Profile,
    target: int,
    n: int = 100,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    matcher: Matcher | None = None,
) -> Neighbourhood:
    """
    Every user with a non-zero weighted match qualifies; the n highest (signed) matches are kept,
    ties broken by ascending user id. Fewer than n qualifiers means all of them are used.
    """
    if n < 1:
        raise usage_error("n must be at least 1")
    matcher = ensure_matcher(matcher, table, overlap_threshold)

    scored: list[tuple[float, int]] = []
    for user in table.users():
        if user == target:
            continue
        m = matcher.against(antigen, user).weighted
        if m != 0:
            scored.append((m, user))

    scored.sort(key=lambda s: (-s[0], s[1]))
    return Neighbourhood(tuple((user, m) for m, user in scored[:n]), Provenance.SIMPLE_PEARSON)


def correlation_weights(
    nb: Neighbourhood,
    table: RatingsTable,
    antigen: Profile,
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    matcher: Matcher | None = None,
) -> Neighbourhood:
    """Re-weight a fixed membership the Simple Pearson way (weight = weighted match)."""
    matcher = ensure_matcher(matcher, table, overlap_threshold)
    weights = {u: matcher.against(antigen, u).weighted for u in nb.user_ids()}
    return nb.with_weights(weights, Provenance.FIXED)
