# /services/immune_core.py
# The immune system behind the AIS recommender: antibodies are database users, the antigen is the
# target user's visible profile, and concentrations follow the single-antigen idiotypic equation
#
#   dx_i/dt = k1 m_i x_i y - (k2/n) sum_{j != i} m_ij x_i x_j - k3 x_i
#
# integrated with forward Euler. build_neighbourhood runs the main loop: add candidates one at a
# time and, whenever the pool is full, iterate until it stabilises or loses a member.
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from services.dataset import Profile, RatingsTable
from services.matching import DEFAULT_OVERLAP_THRESHOLD, MatchMatrix, Matcher, ensure_matcher
from services.neighbourhood import Neighbourhood, Provenance
from utils.errors import data_error

log = logging.getLogger(__name__)


class AisParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k1: float = Field(default=0.3, ge=0)  # stimulation
    k2: float = Field(default=0.2, ge=0)  # suppression
    k3: float = Field(default=0.006, ge=0)  # death rate
    capacity: int = Field(default=100, ge=1)
    stability_window: int = Field(default=10, ge=1)
    # newcomers start just above the death threshold; the ceiling bounds idiotypic suppression
    init_concentration: float = 0.055
    death_threshold: float = 0.05
    max_concentration: float = 3.25
    step_size: float = Field(default=1.0, gt=0)
    clamp_negative_m_ij: bool = False
    # a step only counts towards stability when no concentration fell by more than this fraction
    # (relative to max(x, death_threshold)); growth never breaks stability. Keep it below k3 so
    # an unstimulated pool keeps draining; inf reduces stability to membership identity alone
    stability_tolerance: float = Field(default=0.005, ge=0)
    settle_steps: int = Field(default=500, ge=0)  # cap on the drain phase after the candidates run out
    max_iterations: int = Field(default=200_000, ge=1)  # budget for one whole build

    @model_validator(mode="after")
    def _check_concentrations(self) -> "AisParams":
        if not 0 < self.death_threshold < self.init_concentration <= self.max_concentration:
            raise ValueError("need 0 < death_threshold < init_concentration <= max_concentration")
        return self


@dataclass(frozen=True)
class Antibody:
    user: int
    m_i: float
    concentration: float


class ImmuneSystem:
    ANTIGEN_CONCENTRATION = 1.0

    def __init__(
        self,
        params: AisParams,
        antigen: Profile,
        target_user: int | None = None,
        matcher: Matcher | None = None,
    ) -> None:
        self.params = params
        self.antigen = antigen
        self.target_user = target_user
        self.matcher = matcher
        self.y = self.ANTIGEN_CONCENTRATION
        self.capacity = params.capacity
        self.fixed_membership = False
        self.stable_for = 0
        self.steady_for = 0
        self.reviewers_examined = 0

        self._users: list[int] = []
        self._m = np.zeros(0, dtype=float)
        self._x = np.zeros(0, dtype=float)
        self._mm = np.zeros((0, 0), dtype=float)

    # --- state views -------------------------------------------------------------------------

    @property
    def size(self) -> int:
        return len(self._users)

    @property
    def at_capacity(self) -> bool:
        return self.size >= self.capacity

    @property
    def users(self) -> tuple[int, ...]:
        return tuple(self._users)

    @property
    def pool(self) -> tuple[Antibody, ...]:
        return tuple(Antibody(u, float(m), float(x)) for u, m, x in zip(self._users, self._m, self._x))

    @property
    def concentrations(self) -> np.ndarray:
        return self._x.copy()

    @property
    def matrix(self) -> MatchMatrix:
        return MatchMatrix(self.users, self._mm.copy())

    def stabilized(self) -> bool:
        return self.at_capacity and self.stable_for >= self.params.stability_window

    # --- pool changes -------------------------------------------------------------------------

    def _matcher_for(self, table: RatingsTable, overlap_threshold: int) -> Matcher:
        self.matcher = ensure_matcher(self.matcher, table, overlap_threshold)
        return self.matcher

    def add_antibody(self, candidate: int, table: RatingsTable, overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD) -> "ImmuneSystem":
        if self.at_capacity:
            raise data_error("immune system is full")
        if candidate in self._users:
            raise data_error(f"user {candidate} is already an antibody")
        if candidate == self.target_user:
            raise data_error(f"user {candidate} is the target and cannot be an antibody")
        self._append(candidate, table, overlap_threshold)
        return self

    def _append(self, candidate: int, table: RatingsTable, overlap_threshold: int) -> None:
        matcher = self._matcher_for(table, overlap_threshold)
        m_i = matcher.against(self.antigen, candidate).weighted
        row = matcher.row(candidate, self._users)

        n = self.size
        grown = np.zeros((n + 1, n + 1), dtype=float)
        grown[:n, :n] = self._mm
        grown[n, :n] = row
        grown[:n, n] = row

        self._users.append(candidate)
        self._m = np.append(self._m, m_i)
        self._x = np.append(self._x, self.params.init_concentration)
        self._mm = grown
        self.stable_for = 0
        self.steady_for = 0
        self.reviewers_examined += 1

    def _keep(self, mask: np.ndarray) -> None:
        self._users = [u for u, k in zip(self._users, mask) if k]
        self._m = self._m[mask]
        self._x = self._x[mask]
        self._mm = self._mm[np.ix_(mask, mask)]

    # --- dynamics -----------------------------------------------------------------------------

    def derivative(self) -> np.ndarray:
        """dx/dt for every antibody, from the current concentrations."""
        p = self.params
        n = self.size
        if n == 0:
            return np.zeros(0, dtype=float)
        mm = np.maximum(self._mm, 0.0) if p.clamp_negative_m_ij else self._mm
        x = self._x
        stimulation = p.k1 * self._m * x * self.y
        suppression = (p.k2 / n) * x * (mm @ x)  # zero diagonal: j != i
        return stimulation - suppression - p.k3 * x

    def iterate(self) -> "ImmuneSystem":
        """
        One simultaneous Euler step for every antibody, then removal of those below the death
        threshold. stable_for counts consecutive steady steps taken at full capacity.
        """
        if self.size == 0:
            raise data_error("cannot iterate an empty immune system")
        p = self.params
        before = self._x
        after = np.clip(before + p.step_size * self.derivative(), 0.0, p.max_concentration)
        fell = float(np.max((before - after) / np.maximum(before, p.death_threshold)))
        self._x = after

        removed = False
        if not self.fixed_membership:
            alive = after >= p.death_threshold
            if not alive.all():
                self._keep(alive)
                removed = True

        steady = not removed and fell <= p.stability_tolerance
        self.steady_for = self.steady_for + 1 if steady else 0
        self.stable_for = self.stable_for + 1 if steady and self.at_capacity else 0
        return self

    def settle(self, max_steps: int | None = None) -> int:
        """
        Iterate a pool that is not full to rest: until it is empty, or it has been steady for the
        stability window, or max_steps ran out. Returns the number of iterations run.
        """
        max_steps = self.params.settle_steps if max_steps is None else max_steps
        steps = 0
        self.steady_for = 0
        while steps < max_steps and self.size and self.steady_for < self.params.stability_window:
            self.iterate()
            steps += 1
        return steps

    def randomize_concentrations(self, seed: int) -> "ImmuneSystem":
        if self.size == 0:
            raise data_error("cannot randomize an empty immune system")
        lo, hi = self.params.death_threshold, self.params.max_concentration
        rng = np.random.default_rng(seed)
        # hi - U[0, hi - lo) lies in (lo, hi]
        self._x = hi - rng.uniform(0.0, hi - lo, size=self.size)
        return self

    def neighbour_weights(self, provenance: Provenance = Provenance.AIS) -> Neighbourhood:
        weights = self._m * self._x
        return Neighbourhood(tuple((u, float(w)) for u, w in zip(self._users, weights)), provenance)

    # --- construction helpers -----------------------------------------------------------------

    @classmethod
    def with_fixed_membership(
        cls,
        params: AisParams,
        antigen: Profile,
        members: Sequence[int],
        table: RatingsTable,
        overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
        matcher: Matcher | None = None,
    ) -> "ImmuneSystem":
        """A pool holding exactly `members`; iterate() never removes anyone from it."""
        ais = cls(params, antigen, matcher=matcher)
        ais.capacity = max(1, len(members))
        ais.fixed_membership = True
        for user in members:
            ais._append(user, table, overlap_threshold)
        return ais


def build_immune_system(
    table: RatingsTable,
    antigen: Profile,
    params: AisParams,
    candidates: Iterable[int],
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    target_user: int | None = None,
    matcher: Matcher | None = None,
) -> ImmuneSystem:
    ais = ImmuneSystem(params, antigen, target_user=target_user, matcher=matcher)
    iterations = 0
    for candidate in candidates:
        if ais.stabilized() or iterations >= params.max_iterations:
            break
        ais.add_antibody(candidate, table, overlap_threshold)
        while ais.at_capacity and not ais.stabilized() and iterations < params.max_iterations:
            ais.iterate()
            iterations += 1
    if iterations >= params.max_iterations:
        log.warning("AIS build hit the iteration budget (%d) before stabilising", params.max_iterations)

    drained = 0
    if not ais.stabilized():
        drained = ais.settle()
    log.debug(
        "AIS build: examined=%d size=%d iterations=%d drained=%d stabilized=%s",
        ais.reviewers_examined, ais.size, iterations, drained, ais.stabilized(),
    )
    return ais


def build_neighbourhood(
    table: RatingsTable,
    antigen: Profile,
    params: AisParams,
    candidates: Iterable[int],
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    target_user: int | None = None,
    matcher: Matcher | None = None,
) -> tuple[Neighbourhood, int]:
    ais = build_immune_system(table, antigen, params, candidates, overlap_threshold, target_user, matcher)
    return ais.neighbour_weights(), ais.reviewers_examined


def fixed_membership_weights(
    table: RatingsTable,
    antigen: Profile,
    params: AisParams,
    members: Sequence[int],
    overlap_threshold: int = DEFAULT_OVERLAP_THRESHOLD,
    max_steps: int = 500,
    matcher: Matcher | None = None,
) -> Neighbourhood:
    """AIS weighting m_i * x_i over a neighbourhood that is not allowed to change."""
    if not members:
        return Neighbourhood((), Provenance.FIXED)
    ais = ImmuneSystem.with_fixed_membership(params, antigen, members, table, overlap_threshold, matcher)
    ais.settle(max_steps)
    return ais.neighbour_weights(Provenance.FIXED)
