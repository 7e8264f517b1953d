# /api/schemas.py
# This module defines the row schemas of every exported file. Field order is the column order, so
# adding a field appends a column and never reorders the existing ones.
from __future__ import annotations

from pydantic import BaseModel, ConfigDict


class _Row(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class TrialRow(_Row):
    target: int
    regime: str
    n_visible: int
    n_hidden: int
    n_predictions: int
    mae: float | None = None
    tau: float | None = None
    tau_items: int | None = None
    tau_discordant: int | None = None
    size: int
    overlap: int | None = None
    correlation: float | None = None
    neighbour_correlation: float | None = None
    raw_correlation: float | None = None
    raw_neighbour_correlation: float | None = None
    reviewers_examined: int
    members: str = ""  # space separated user ids, selection order
    common: int
    unique_sp: int
    unique_ais: int


class PairTestRow(_Row):
    metric: str
    first: str
    second: str
    median_first: float | None = None
    median_second: float | None = None
    n_compared: int
    n_dropped: int
    n_unequal: int
    first_better: float
    second_better: float
    p_upper_bound: float | None = None


class CharacteristicRow(_Row):
    characteristic: str
    mean_sp: float | None = None
    mean_ais: float | None = None
    n_compared: int
    n_unequal: int
    sp_higher: float
    ais_higher: float
    p_upper_bound: float | None = None


class DistributionRow(_Row):
    name: str
    quantity: str
    n: int
    mean: float | None = None
    sd: float | None = None
    median: float | None = None


class ScatterRow(_Row):
    target: int
    value: float | None = None
    tau: float


class SweepRow(_Row):
    rate: float
    n: int
    mean_size: float | None = None
    sd_size: float | None = None
    mean_reviewers_examined: float | None = None
    sd_reviewers_examined: float | None = None
