# /services/predictor.py
# Neighbourhood-based prediction: mean-offset weighted deviations normalised by the sum of absolute
# weights, and the ranked recommendation list built from those predictions.
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from services.dataset import Profile, RatingsTable
from services.neighbourhood import Neighbourhood
from utils.errors import data_error


@dataclass(frozen=True)
class Prediction:
    item: int
    score: float
    contributing_neighbours: int


@dataclass(frozen=True)
class RecommendationList:
    items: tuple[tuple[int, float], ...]  # (item, score), best first

    def order(self) -> list[int]:
        return [item for item, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def predict(
    nb: Neighbourhood,
    table: RatingsTable,
    antigen: Profile,
    item: int,
    default_vote: float | None = None,
) -> Prediction | None:
    """
    Returns None when no neighbour can speak for the item (nobody voted and no default vote) or
    the contributing weights are all zero.
    """
    if item in antigen:
        raise data_error(f"item {item} is already in the antigen profile")
    if not antigen:
        return None

    weights: list[float] = []
    deviations: list[float] = []
    for user, w in nb.members:
        vote = table.profile(user).get(item, default_vote)
        if vote is None:
            continue
        weights.append(w)
        deviations.append(vote - table.mean_vote(user))

    if not weights:
        return None
    w = np.asarray(weights)
    norm = float(np.abs(w).sum())
    if norm == 0:
        return None

    base = float(np.mean(list(antigen.values())))
    score = base + float(np.dot(w, deviations)) / norm
    return Prediction(item, table.scale.clamp(score), len(weights))


def recommend(
    nb: Neighbourhood,
    table: RatingsTable,
    antigen: Profile,
    candidate_items: Iterable[int],
    default_vote: float | None = None,
) -> RecommendationList:
    scored = []
    for item in candidate_items:
        p = predict(nb, table, antigen, item, default_vote)
        if p is not None:
            scored.append((item, p.score))
    scored.sort(key=lambda s: (-s[1], s[0]))
    return RecommendationList(tuple(scored))
