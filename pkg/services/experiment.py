# /services/experiment.py
# This module orchestrates the studies: per-user trials under the predictor x neighbourhood regimes,
# the aggregated summary (regime statistics, pairwise Wilcoxon tables, neighbourhood
# characteristics, neighbourhood composition) and the stimulation-rate sweep.
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from services.baseline import correlation_weights, simple_pearson_neighbourhood
from services.config import CandidateOrder, ExperimentConfig
from services.dataset import RatingsTable, TargetSplit, split_target
from services.evaluation import (
    NeighbourhoodStats,
    TauResult,
    common_unique_counts,
    kendall_tau,
    mae,
    neighbourhood_stats,
    wilcoxon_signed_rank,
)
from services.immune_core import ImmuneSystem, build_immune_system, fixed_membership_weights
from services.matching import Matcher, ensure_matcher
from services.neighbourhood import Neighbourhood, Provenance
from services.predictor import recommend
from settings import settings
from utils import seeds
from utils.errors import data_error, usage_error

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class Regime(str, Enum):
    """Predictor / neighbourhood combinations."""

    SP_SP = "SP/SP"
    AIS_SP = "AIS/SP"
    SP_AIS = "SP/AIS"
    AIS_AIS = "AIS/AIS"
    RANDOMIZED = "RND/AIS"  # AIS predictor, AIS neighbourhood, random concentrations

    @property
    def predictor(self) -> str:
        return "RND" if self is Regime.RANDOMIZED else self.value.split("/")[0]

    @property
    def neighbourhood(self) -> str:
        return self.value.split("/")[1]


FIXED_REGIMES = (Regime.SP_SP, Regime.AIS_SP, Regime.SP_AIS, Regime.AIS_AIS)
REGIME_PAIRS = tuple(itertools.combinations(FIXED_REGIMES, 2))
CONTROL_PAIRS = ((Regime.AIS_AIS, Regime.RANDOMIZED),)

METRICS = ("mae", "tau")
LOWER_IS_BETTER = {"mae": True, "tau": False}

CHARACTERISTICS: dict[str, Callable[[NeighbourhoodStats], float | None]] = {
    "neighbours": lambda s: float(s.size),
    "overlap": lambda s: None if s.overlap is None else float(s.overlap),
    "correlation": lambda s: s.mean_target_correlation,
    "neighbour_correlation": lambda s: s.mean_inter_neighbour_correlation,
    "raw_correlation": lambda s: s.mean_target_raw_correlation,
    "raw_neighbour_correlation": lambda s: s.mean_inter_neighbour_raw_correlation,
}
SCATTER_CHARACTERISTICS = ("neighbours", "overlap", "correlation", "neighbour_correlation")


@dataclass(frozen=True)
class RegimeResult:
    regime: Regime
    members: tuple[int, ...]
    mae: float | None
    tau: TauResult | None
    n_predictions: int
    stats: NeighbourhoodStats
    reviewers_examined: int

    def metric(self, name: str) -> float | None:
        if name == "mae":
            return self.mae
        return None if self.tau is None else self.tau.tau


@dataclass(frozen=True)
class TrialOutcome:
    target: int
    n_visible: int
    n_hidden: int
    results: dict[Regime, RegimeResult]
    common: int
    unique_sp: int
    unique_ais: int


@dataclass(frozen=True)
class Distribution:
    n: int
    mean: float | None = None
    sd: float | None = None
    median: float | None = None

    @classmethod
    def of(cls, values: Iterable[float | None]) -> "Distribution":
        xs = np.array([v for v in values if v is not None], dtype=float)
        if xs.size == 0:
            return cls(0)
        sd = float(np.std(xs, ddof=1)) if xs.size > 1 else 0.0
        return cls(int(xs.size), float(np.mean(xs)), sd, float(np.median(xs)))


@dataclass(frozen=True)
class RegimeSummary:
    regime: Regime
    mae: Distribution
    tau: Distribution
    size: Distribution
    reviewers_examined: Distribution


@dataclass(frozen=True)
class PairComparison:
    metric: str
    first: Regime
    second: Regime
    median_first: float | None
    median_second: float | None
    n_compared: int  # trials where both regimes produced the metric
    n_dropped: int
    n_unequal: int
    first_better: float  # sum of ranks
    second_better: float
    p_upper_bound: float | None  # None: no test possible


@dataclass(frozen=True)
class CharacteristicComparison:
    characteristic: str
    mean_first: float | None  # Simple Pearson
    mean_second: float | None  # AIS
    n_compared: int
    n_unequal: int
    first_higher: float
    second_higher: float
    p_upper_bound: float | None


@dataclass(frozen=True)
class ExperimentSummary:
    n_trials: int
    regimes: tuple[RegimeSummary, ...]
    pair_tests: tuple[PairComparison, ...]
    control_tests: tuple[PairComparison, ...]
    characteristics: tuple[CharacteristicComparison, ...]
    common: Distribution
    unique_sp: Distribution
    unique_ais: Distribution


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    outcomes: tuple[TrialOutcome, ...]
    summary: ExperimentSummary


@dataclass(frozen=True)
class SweepPoint:
    rate: float
    size: Distribution
    reviewers_examined: Distribution


# --- comparisons ---------------------------------------------------------------------------------


def compare_regimes(
    metric: str,
    first: Regime,
    second: Regime,
    outcomes: Sequence[TrialOutcome],
    exact_cutoff: int,
) -> PairComparison:
    """Wilcoxon over the trials where both regimes produced the metric."""
    pairs = []
    for o in outcomes:
        a, b = o.results.get(first), o.results.get(second)
        va = None if a is None else a.metric(metric)
        vb = None if b is None else b.metric(metric)
        if va is not None and vb is not None:
            pairs.append((va, vb))

    median_first = float(np.median([a for a, _ in pairs])) if pairs else None
    median_second = float(np.median([b for _, b in pairs])) if pairs else None
    test = wilcoxon_signed_rank(pairs, exact_cutoff) if pairs else None
    if test is None:
        n_unequal, first_better, second_better, p = 0, 0.0, 0.0, None
    else:
        n_unequal, p = test.n_unequal, test.p_upper_bound
        # rank_sum_first collects pairs where first > second
        if LOWER_IS_BETTER[metric]:
            first_better, second_better = test.rank_sum_second, test.rank_sum_first
        else:
            first_better, second_better = test.rank_sum_first, test.rank_sum_second
    return PairComparison(
        metric, first, second, median_first, median_second,
        len(pairs), len(outcomes) - len(pairs), n_unequal, first_better, second_better, p,
    )


def compare_characteristics(
    paired_stats: Sequence[tuple[NeighbourhoodStats, NeighbourhoodStats]],
    exact_cutoff: int,
) -> tuple[CharacteristicComparison, ...]:
    """Simple Pearson (first) against AIS (second) for every neighbourhood characteristic."""
    rows = []
    for name, getter in CHARACTERISTICS.items():
        values = [(getter(sp), getter(ais)) for sp, ais in paired_stats]
        pairs = [(a, b) for a, b in values if a is not None and b is not None]
        test = wilcoxon_signed_rank(pairs, exact_cutoff) if pairs else None
        rows.append(
            CharacteristicComparison(
                characteristic=name,
                mean_first=Distribution.of(a for a, _ in pairs).mean,
                mean_second=Distribution.of(b for _, b in pairs).mean,
                n_compared=len(pairs),
                n_unequal=0 if test is None else test.n_unequal,
                first_higher=0.0 if test is None else test.rank_sum_first,
                second_higher=0.0 if test is None else test.rank_sum_second,
                p_upper_bound=None if test is None else test.p_upper_bound,
            )
        )
    return tuple(rows)


def summarize(outcomes: Sequence[TrialOutcome], exact_cutoff: int) -> ExperimentSummary:
    present = [r for r in Regime if any(r in o.results for o in outcomes)] or list(FIXED_REGIMES)
    regimes = []
    for regime in present:
        results = [o.results[regime] for o in outcomes if regime in o.results]
        regimes.append(
            RegimeSummary(
                regime,
                mae=Distribution.of(r.mae for r in results),
                tau=Distribution.of(None if r.tau is None else r.tau.tau for r in results),
                size=Distribution.of(r.stats.size for r in results),
                reviewers_examined=Distribution.of(r.reviewers_examined for r in results),
            )
        )

    pair_tests = tuple(
        compare_regimes(metric, a, b, outcomes, exact_cutoff) for metric in METRICS for a, b in REGIME_PAIRS
    )
    control_tests = tuple(
        compare_regimes(metric, a, b, outcomes, exact_cutoff)
        for metric in METRICS
        for a, b in CONTROL_PAIRS
        if any(b in o.results for o in outcomes)
    )
    characteristics = compare_characteristics(
        [(o.results[Regime.SP_SP].stats, o.results[Regime.AIS_AIS].stats) for o in outcomes], exact_cutoff
    )
    return ExperimentSummary(
        n_trials=len(outcomes),
        regimes=tuple(regimes),
        pair_tests=pair_tests,
        control_tests=control_tests,
        characteristics=characteristics,
        common=Distribution.of(o.common for o in outcomes),
        unique_sp=Distribution.of(o.unique_sp for o in outcomes),
        unique_ais=Distribution.of(o.unique_ais for o in outcomes),
    )


# --- runner --------------------------------------------------------------------------------------


class ExperimentRunner:
    """
    Runs trials over one table and config. Every random choice is keyed by the master seed and the
    target user, so a trial's result does not depend on which other trials run alongside it.
    """

    def __init__(
        self,
        table: RatingsTable,
        config: ExperimentConfig,
        matcher: Matcher | None = None,
        max_workers: int | None = None,
    ) -> None:
        self.table = table
        self.config = config
        self.matcher = ensure_matcher(matcher, table, config.overlap_threshold)
        self.default_vote = config.resolved_default_vote()
        self.max_workers = max_workers or settings.max_workers

    # targets, splits, candidate streams

    def eligible_targets(self) -> list[int]:
        return [u for u in self.table.users() if self.table.vote_count(u) >= self.config.min_target_votes]

    def select_targets(self) -> list[int]:
        eligible = self.eligible_targets()
        if len(eligible) < self.config.n_trials:
            raise data_error(
                f"only {len(eligible)} users have >= {self.config.min_target_votes} votes; "
                f"{self.config.n_trials} trials requested"
            )
        rng = seeds.rng_for(self.config.master_seed, seeds.TARGETS)
        picked = rng.choice(len(eligible), size=self.config.n_trials, replace=False)
        return [eligible[i] for i in picked]

    def split_for(self, target: int) -> TargetSplit:
        seed = seeds.derive_seed(self.config.master_seed, seeds.SPLIT, target)
        return split_target(self.table, target, self.config.visible_fraction, seed)

    def candidates_for(self, target: int) -> list[int]:
        others = [u for u in self.table.users() if u != target]
        if self.config.candidate_order is CandidateOrder.SHUFFLE:
            rng = seeds.rng_for(self.config.master_seed, seeds.CANDIDATES, target)
            others = [others[i] for i in rng.permutation(len(others))]
        return others

    def build_ais(self, target: int, split: TargetSplit, config: ExperimentConfig | None = None) -> ImmuneSystem:
        config = config or self.config
        return build_immune_system(
            self.table,
            split.visible_profile,
            config.ais_params,
            self.candidates_for(target),
            config.overlap_threshold,
            target_user=target,
            matcher=self.matcher,
        )

    # evaluation

    def _evaluate(self, regime: Regime, nb: Neighbourhood, split: TargetSplit, stats: NeighbourhoodStats, examined: int) -> RegimeResult:
        recs = recommend(nb, self.table, split.visible_profile, sorted(split.hidden_votes), self.default_vote)
        pairs = [(score, split.hidden_votes[item]) for item, score in recs.items]
        return RegimeResult(
            regime=regime,
            members=nb.user_ids(),
            mae=mae(pairs) if pairs else None,
            tau=kendall_tau(recs.order(), split.hidden_votes) if len(recs) >= 2 else None,
            n_predictions=len(pairs),
            stats=stats,
            reviewers_examined=examined,
        )

    def run_trial(self, target: int) -> TrialOutcome:
        cfg = self.config
        split = self.split_for(target)
        antigen = split.visible_profile
        threshold = cfg.overlap_threshold

        ais = self.build_ais(target, split)
        ais_nb = ais.neighbour_weights()
        sp_nb = simple_pearson_neighbourhood(self.table, antigen, target, cfg.sp_n, threshold, self.matcher)

        neighbourhoods: dict[Regime, Neighbourhood] = {
            Regime.SP_SP: sp_nb,
            Regime.AIS_SP: fixed_membership_weights(
                self.table, antigen, cfg.ais_params, sp_nb.user_ids(), threshold, cfg.fixed_steps, self.matcher
            ),
            Regime.SP_AIS: correlation_weights(ais_nb, self.table, antigen, threshold, self.matcher),
            Regime.AIS_AIS: ais_nb,
        }
        if cfg.randomized_control and ais.size:
            seed = seeds.derive_seed(cfg.master_seed, seeds.RANDOMIZED, target)
            neighbourhoods[Regime.RANDOMIZED] = ais.randomize_concentrations(seed).neighbour_weights(
                Provenance.RANDOMIZED_CONCENTRATION
            )

        sp_stats = neighbourhood_stats(sp_nb, split, self.table, threshold, self.matcher)
        ais_stats = neighbourhood_stats(ais_nb, split, self.table, threshold, self.matcher)
        sp_examined = len(self.table.users()) - 1

        results = {}
        for regime, nb in neighbourhoods.items():
            from_sp = regime.neighbourhood == "SP"
            results[regime] = self._evaluate(
                regime, nb, split,
                sp_stats if from_sp else ais_stats,
                sp_examined if from_sp else ais.reviewers_examined,
            )

        common, unique_sp, unique_ais = common_unique_counts(sp_nb, ais_nb)
        log.info(
            "trial target=%d: SP size=%d AIS size=%d examined=%d common=%d tau(AIS/AIS)=%s",
            target, sp_nb.size, ais_nb.size, ais.reviewers_examined, common,
            None if results[Regime.AIS_AIS].tau is None else round(results[Regime.AIS_AIS].tau.tau, 4),
        )
        return TrialOutcome(
            target=target,
            n_visible=len(split.visible_profile),
            n_hidden=len(split.hidden_votes),
            results=results,
            common=common,
            unique_sp=unique_sp,
            unique_ais=unique_ais,
        )

    def _map(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        if self.max_workers <= 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(fn, items))  # map keeps input order

    def run(self) -> ExperimentResult:
        targets = self.select_targets()
        log.info("running %d trials (master_seed=%d)", len(targets), self.config.master_seed)
        outcomes = tuple(self._map(self.run_trial, targets))
        return ExperimentResult(self.config, outcomes, summarize(outcomes, self.config.exact_cutoff))

    def sweep(self, rates: Sequence[float]) -> list[SweepPoint]:
        if not rates:
            raise usage_error("sweep needs at least one stimulation rate")
        targets = self.select_targets()
        splits = {t: self.split_for(t) for t in targets}
        points = []
        for rate in rates:
            cfg = self.config.with_k1(rate)
            systems = self._map(lambda t: self.build_ais(t, splits[t], cfg), targets)
            sizes = tuple(ais.size for ais in systems)
            examined = tuple(ais.reviewers_examined for ais in systems)
            points.append(SweepPoint(rate, Distribution.of(sizes), Distribution.of(examined)))
            log.info("sweep k1=%.3f: mean size=%.2f mean examined=%.2f", rate, np.mean(sizes), np.mean(examined))
        return points


def run_trial(table: RatingsTable, target: int, config: ExperimentConfig) -> TrialOutcome:
    return ExperimentRunner(table, config).run_trial(target)


def run_experiment(table: RatingsTable, config: ExperimentConfig, max_workers: int | None = None) -> ExperimentResult:
    return ExperimentRunner(table, config, max_workers=max_workers).run()


def sweep_stimulation(
    table: RatingsTable,
    rates: Sequence[float],
    config: ExperimentConfig,
    max_workers: int | None = None,
) -> list[SweepPoint]:
    return ExperimentRunner(table, config, max_workers=max_workers).sweep(rates)
