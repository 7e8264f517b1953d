import numpy as np
import pytest

from services.experiment import (
    REGIME_PAIRS,
    Distribution,
    ExperimentRunner,
    Regime,
    run_experiment,
    run_trial,
    sweep_stimulation,
)
from services.config import CandidateOrder, ExperimentConfig
from services.dataset import VoteScale, generate_synthetic
from services.immune_core import AisParams
from utils.errors import AppError


@pytest.fixture(scope="module")
def experiment(synthetic_table, small_config):
    return run_experiment(synthetic_table, small_config)


def test_every_trial_reports_the_fixed_regimes(experiment, small_config):
    assert len(experiment.outcomes) == small_config.n_trials
    assert len({o.target for o in experiment.outcomes}) == small_config.n_trials
    for o in experiment.outcomes:
        for regime in (Regime.SP_SP, Regime.AIS_SP, Regime.SP_AIS, Regime.AIS_AIS):
            assert regime in o.results


def test_fixed_regimes_reuse_the_native_member_sets(experiment):
    for o in experiment.outcomes:
        r = o.results
        assert r[Regime.AIS_SP].members == r[Regime.SP_SP].members
        assert r[Regime.SP_AIS].members == r[Regime.AIS_AIS].members
        if Regime.RANDOMIZED in r:
            assert r[Regime.RANDOMIZED].members == r[Regime.AIS_AIS].members
        sp, ais = set(r[Regime.SP_SP].members), set(r[Regime.AIS_AIS].members)
        assert (o.common, o.unique_sp, o.unique_ais) == (len(sp & ais), len(sp - ais), len(ais - sp))


def test_simple_pearson_regimes_examine_every_other_user(experiment, synthetic_table):
    for o in experiment.outcomes:
        assert o.results[Regime.SP_SP].reviewers_examined == len(synthetic_table.users()) - 1
        assert o.results[Regime.AIS_AIS].reviewers_examined >= o.results[Regime.AIS_AIS].stats.size


def test_predictions_only_cover_hidden_items(experiment):
    for o in experiment.outcomes:
        assert o.n_visible + o.n_hidden >= 10
        for result in o.results.values():
            assert result.n_predictions <= o.n_hidden
            if result.tau is not None:
                assert result.tau.n_overlap == result.n_predictions
                assert -1.0 <= result.tau.tau <= 1.0


def test_standalone_trial_matches_the_experiment(experiment, synthetic_table, small_config):
    first = experiment.outcomes[0]
    assert run_trial(synthetic_table, first.target, small_config) == first


def test_reruns_and_thread_pools_are_deterministic(experiment, synthetic_table, small_config):
    assert run_experiment(synthetic_table, small_config).outcomes == experiment.outcomes
    assert run_experiment(synthetic_table, small_config, max_workers=3).outcomes == experiment.outcomes


def test_six_pair_rows_per_metric_with_rank_sum_identity(experiment, small_config):
    tests = experiment.summary.pair_tests
    assert len(tests) == 12
    for metric in ("mae", "tau"):
        rows = [t for t in tests if t.metric == metric]
        assert [(t.first, t.second) for t in rows] == list(REGIME_PAIRS)
    for t in tests:
        assert t.n_compared + t.n_dropped == small_config.n_trials
        assert t.first_better + t.second_better == pytest.approx(t.n_unequal * (t.n_unequal + 1) / 2)
        assert (t.p_upper_bound is None) == (t.n_unequal == 0)


def test_characteristics_cover_both_algorithms(experiment):
    names = [c.characteristic for c in experiment.summary.characteristics]
    assert names[:4] == ["neighbours", "overlap", "correlation", "neighbour_correlation"]
    neighbours = experiment.summary.characteristics[0]
    sp_sizes = [o.results[Regime.SP_SP].stats.size for o in experiment.outcomes]
    assert neighbours.mean_first == pytest.approx(sum(sp_sizes) / len(sp_sizes))


def test_control_table_compares_against_randomized_concentrations(experiment):
    has_control = any(Regime.RANDOMIZED in o.results for o in experiment.outcomes)
    control = experiment.summary.control_tests
    if has_control:
        assert [(t.metric, t.first, t.second) for t in control] == [
            ("mae", Regime.AIS_AIS, Regime.RANDOMIZED),
            ("tau", Regime.AIS_AIS, Regime.RANDOMIZED),
        ]
    else:
        assert control == ()


def test_single_trial_summary_is_that_trial(synthetic_table, small_config):
    cfg = small_config.model_copy(update={"n_trials": 1})
    result = run_experiment(synthetic_table, cfg)
    (outcome,) = result.outcomes
    for s in result.summary.regimes:
        r = outcome.results[s.regime]
        assert s.mae.mean == r.mae
        assert s.size.mean == r.stats.size
        assert s.size.sd == 0.0
    for t in result.summary.pair_tests:
        if t.n_unequal == 0:
            assert t.p_upper_bound is None
        else:
            assert t.p_upper_bound == 1.0


def test_too_few_eligible_targets(synthetic_table, small_config):
    cfg = small_config.model_copy(update={"n_trials": 1000})
    with pytest.raises(AppError) as exc:
        run_experiment(synthetic_table, cfg)
    assert exc.value.exit_code == 2


def test_target_selection_and_candidate_shuffle_are_seeded(synthetic_table, small_config):
    runner = ExperimentRunner(synthetic_table, small_config)
    targets = runner.select_targets()
    assert targets == runner.select_targets()
    assert all(synthetic_table.vote_count(t) >= small_config.min_target_votes for t in targets)

    shuffled = ExperimentRunner(synthetic_table, small_config.model_copy(update={"candidate_order": CandidateOrder.SHUFFLE}))
    target = targets[0]
    order = shuffled.candidates_for(target)
    assert order == shuffled.candidates_for(target)
    assert sorted(order) == [u for u in synthetic_table.users() if u != target]
    assert runner.candidates_for(target) == sorted(order)


def test_sweep_at_the_configured_rate_matches_the_experiment(experiment, synthetic_table, small_config):
    (point,) = sweep_stimulation(synthetic_table, [small_config.ais_params.k1], small_config)
    ais = next(s for s in experiment.summary.regimes if s.regime is Regime.AIS_AIS)
    assert point.size == ais.size
    assert point.reviewers_examined == ais.reviewers_examined


def test_sweep_without_stimulation_ends_empty(synthetic_table, small_config):
    params = small_config.ais_params.model_copy(update={"clamp_negative_m_ij": True})
    cfg = small_config.model_copy(update={"ais_params": params})
    points = sweep_stimulation(synthetic_table, [0.0, 0.3], cfg)
    assert [p.rate for p in points] == [0.0, 0.3]
    assert points[0].size.mean == 0.0
    assert points[0].reviewers_examined.mean == len(synthetic_table.users()) - 1


def test_sweep_needs_rates(synthetic_table, small_config):
    with pytest.raises(AppError) as exc:
        sweep_stimulation(synthetic_table, [], small_config)
    assert exc.value.exit_code == 1


def test_regime_names():
    assert (Regime.AIS_SP.predictor, Regime.AIS_SP.neighbourhood) == ("AIS", "SP")
    assert (Regime.RANDOMIZED.predictor, Regime.RANDOMIZED.neighbourhood) == ("RND", "AIS")


def test_distribution():
    assert Distribution.of([]) == Distribution(0)
    assert Distribution.of([None, 2.0]) == Distribution(1, 2.0, 0.0, 2.0)
    d = Distribution.of([1.0, 3.0, 2.0])
    assert (d.n, d.mean, d.sd, d.median) == (3, 2.0, 1.0, 2.0)


# The clustered table below is the desk-scale stand-in for a real ratings database: five taste
# clusters, k1 = 0.3 and k2 = 0.2, 100 targets.

SWEEP_RATES = [0.05, 0.1, 0.2, 0.3, 0.45, 0.6]


@pytest.fixture(scope="module")
def clustered_table():
    return generate_synthetic(500, 300, 5, 0.2, 0.5, VoteScale(), seed=0)


@pytest.fixture(scope="module")
def clustered_config():
    return ExperimentConfig(ais_params=AisParams(k1=0.3, k2=0.2), n_trials=100)


@pytest.fixture(scope="module")
def clustered_experiment(clustered_table, clustered_config):
    return run_experiment(clustered_table, clustered_config)


@pytest.mark.slow
def test_ais_neighbourhoods_are_smaller_and_less_inter_correlated(clustered_experiment):
    rows = {c.characteristic: c for c in clustered_experiment.summary.characteristics}
    for name in ("neighbours", "neighbour_correlation"):
        row = rows[name]
        assert row.mean_second < row.mean_first
        assert row.first_higher > row.second_higher
        assert row.p_upper_bound <= 0.05


@pytest.mark.slow
def test_most_neighbours_belong_to_one_algorithm_only(clustered_experiment):
    outcomes = clustered_experiment.outcomes
    common = np.mean([o.common for o in outcomes])
    assert np.mean([o.unique_ais for o in outcomes]) > common
    assert np.mean([o.unique_sp for o in outcomes]) > common


@pytest.mark.slow
def test_stimulation_thresholds_the_neighbourhood(clustered_table, clustered_config):
    points = {p.rate: p for p in sweep_stimulation(clustered_table, SWEEP_RATES, clustered_config)}
    assert points[0.6].reviewers_examined.mean < points[0.2].reviewers_examined.mean
    assert points[0.05].size.mean < points[0.3].size.mean
