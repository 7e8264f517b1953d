import numpy as np
import pytest
from pydantic import ValidationError

from services.dataset import RatingsTable, VoteScale
from services.immune_core import (
    AisParams,
    ImmuneSystem,
    build_immune_system,
    build_neighbourhood,
    fixed_membership_weights,
)
from services.neighbourhood import Provenance
from utils.errors import AppError


def _pool(params: AisParams, m, x, mm) -> ImmuneSystem:
    """An immune system with a hand-set pool."""
    ais = ImmuneSystem(params, antigen={})
    n = len(m)
    ais._users = list(range(1, n + 1))
    ais._m = np.asarray(m, dtype=float)
    ais._x = np.asarray(x, dtype=float)
    ais._mm = np.asarray(mm, dtype=float)
    return ais


def _random_pool(rng, params: AisParams, n: int, nonnegative: bool = False) -> ImmuneSystem:
    lo = 0.0 if nonnegative else -1.0
    m = rng.uniform(lo, 1.0, size=n)
    mm = rng.uniform(lo, 1.0, size=(n, n))
    mm = np.triu(mm, 1)
    mm = mm + mm.T
    x = rng.uniform(params.death_threshold, params.max_concentration, size=n)
    return _pool(params, m, x, mm)


def _reference_step(params: AisParams, m, x, mm):
    """Two passes: all derivatives from the old state, then all updates."""
    n = len(x)
    dx = []
    for i in range(n):
        suppression = sum(mm[i][j] * x[i] * x[j] for j in range(n) if j != i)
        dx.append(params.k1 * m[i] * x[i] * 1.0 - params.k2 / n * suppression - params.k3 * x[i])
    new = [min(params.max_concentration, max(0.0, x[i] + params.step_size * dx[i])) for i in range(n)]
    survivors = [i for i in range(n) if new[i] >= params.death_threshold]
    return new, survivors


@pytest.fixture
def identical_table(scale) -> RatingsTable:
    """User 1 is the target; users 2..6 vote exactly like it."""
    profile = {1: 0, 2: 1, 3: 2, 4: 3, 5: 4, 6: 5}
    return RatingsTable(scale, {u: dict(profile) for u in range(1, 7)})


def test_params_validate_concentration_bounds():
    with pytest.raises(ValidationError):
        AisParams(death_threshold=1.0, init_concentration=1.0)
    with pytest.raises(ValidationError):
        AisParams(init_concentration=20.0, max_concentration=10.0)
    with pytest.raises(ValidationError):
        AisParams(k1=-0.1)


def test_iterate_matches_two_pass_reference():
    rng = np.random.default_rng(1)
    params = AisParams(k1=0.3, k2=0.2, k3=0.05, step_size=0.5)
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        ais = _random_pool(rng, params, n)
        m, x, mm = ais._m.tolist(), ais._x.tolist(), ais._mm.tolist()
        users = ais.users
        expected, survivors = _reference_step(params, m, x, mm)

        ais.iterate()

        assert ais.users == tuple(users[i] for i in survivors)
        assert ais.concentrations == pytest.approx(np.array([expected[i] for i in survivors]), abs=1e-12)


def test_concentrations_stay_within_bounds():
    rng = np.random.default_rng(2)
    params = AisParams(k1=2.0, k2=1.0, k3=0.1)
    for _ in range(200):
        ais = _random_pool(rng, params, int(rng.integers(1, 30)))
        for _ in range(5):
            if ais.size == 0:
                break
            ais.iterate()
            assert np.all(ais.concentrations >= params.death_threshold)
            assert np.all(ais.concentrations <= params.max_concentration)


def test_derivative_is_permutation_equivariant():
    rng = np.random.default_rng(3)
    params = AisParams()
    for _ in range(200):
        n = int(rng.integers(2, 20))
        ais = _random_pool(rng, params, n)
        perm = rng.permutation(n)
        permuted = _pool(params, ais._m[perm], ais._x[perm], ais._mm[np.ix_(perm, perm)])
        assert permuted.derivative() == pytest.approx(ais.derivative()[perm], abs=1e-12)


def test_stimulation_only_never_decreases_concentrations():
    rng = np.random.default_rng(4)
    params = AisParams(k1=0.5, k2=0.0, k3=0.0)
    for _ in range(200):
        ais = _random_pool(rng, params, int(rng.integers(1, 20)), nonnegative=True)
        before = ais.concentrations
        ais.iterate()
        assert ais.size == len(before)
        assert np.all(ais.concentrations >= before)


def test_no_stimulation_never_increases_concentrations():
    rng = np.random.default_rng(5)
    params = AisParams(k1=0.0, k2=0.2, k3=0.02)
    for _ in range(200):
        ais = _random_pool(rng, params, int(rng.integers(1, 20)), nonnegative=True)
        before = dict(zip(ais.users, ais.concentrations))
        ais.iterate()
        for user, x in zip(ais.users, ais.concentrations):
            assert x <= before[user]


def test_single_antibody_step():
    ais = _pool(AisParams(k1=0.3, k2=0.2, k3=0.1), [0.5], [1.0], [[0.0]])
    ais.iterate()
    # 1 + 0.3 * 0.5 - 0.1
    assert ais.concentrations == pytest.approx([1.05], abs=1e-12)


def test_identical_antibodies_stay_identical():
    mm = [[0.0, 1.0, 0.3], [1.0, 0.0, 0.3], [0.3, 0.3, 0.0]]
    ais = _pool(AisParams(), [0.4, 0.4, 0.2], [0.5, 0.5, 0.8], mm)
    for _ in range(50):
        ais.iterate()
        x = ais.concentrations
        assert ais.size == 3
        assert x[0] == x[1]


def _decaying_pool(x) -> ImmuneSystem:
    """A full pool with no stimulation or suppression: every x shrinks by 10% per step."""
    params = AisParams(k1=0.0, k2=0.0, k3=0.1, capacity=len(x), stability_tolerance=1.0)
    return _pool(params, [0.0] * len(x), x, np.zeros((len(x), len(x))))


def test_stabilised_exactly_when_the_window_fills():
    ais = _decaying_pool([2.0, 2.0])
    for step in range(1, 10):
        ais.iterate()
        assert ais.stable_for == step
        assert not ais.stabilized()
    ais.iterate()
    assert ais.stable_for == ais.params.stability_window
    assert ais.stabilized()


def test_a_death_resets_the_stability_count():
    # 0.12 * 0.9**8 is still above 0.05, 0.12 * 0.9**9 is not
    ais = _decaying_pool([2.0, 0.12])
    for _ in range(8):
        ais.iterate()
    assert (ais.size, ais.stable_for) == (2, 8)
    ais.iterate()
    assert (ais.size, ais.stable_for) == (1, 0)
    assert not ais.stabilized()


def test_only_falling_concentrations_break_stability():
    growing = _pool(AisParams(k1=0.3, k2=0.0, k3=0.0, capacity=1), [1.0], [0.1], [[0.0]])
    for _ in range(3):
        growing.iterate()
    assert growing.stable_for == 3

    decaying = _pool(AisParams(k1=0.0, k2=0.0, capacity=1), [0.0], [1.0], [[0.0]])
    assert decaying.params.k3 > decaying.params.stability_tolerance
    for _ in range(3):
        decaying.iterate()
    assert decaying.stable_for == 0


def test_add_antibody_contract(identical_table):
    ais = ImmuneSystem(AisParams(capacity=2), {1: 0, 2: 1}, target_user=1)
    ais.add_antibody(2, identical_table, overlap_threshold=2)
    assert ais.users == (2,)
    assert ais.reviewers_examined == 1
    assert ais.pool[0].concentration == ais.params.init_concentration
    with pytest.raises(AppError):
        ais.add_antibody(2, identical_table, overlap_threshold=2)
    with pytest.raises(AppError):
        ais.add_antibody(1, identical_table, overlap_threshold=2)
    ais.add_antibody(3, identical_table, overlap_threshold=2)
    assert ais.matrix.entries[0, 1] == pytest.approx(1.0)
    with pytest.raises(AppError):
        ais.add_antibody(4, identical_table, overlap_threshold=2)


def test_iterate_on_empty_system_fails():
    with pytest.raises(AppError):
        ImmuneSystem(AisParams(), {}).iterate()


def test_build_stabilises_on_a_full_pool_of_good_matches(identical_table):
    antigen = identical_table.profile(1)
    params = AisParams(capacity=3, stability_window=5)
    ais = build_immune_system(identical_table, antigen, params, [2, 3, 4, 5, 6], overlap_threshold=5, target_user=1)
    assert ais.stabilized()
    assert ais.users == (2, 3, 4)
    assert ais.reviewers_examined == 3
    nb = ais.neighbour_weights()
    assert nb.provenance is Provenance.AIS
    assert all(w > 0 for w in nb.weights().values())


def test_zero_match_candidates_all_die(identical_table):
    params = AisParams(capacity=3, clamp_negative_m_ij=True)
    nb, examined = build_neighbourhood(identical_table, {99: 3, 98: 4}, params, [2, 3, 4, 5, 6], overlap_threshold=5)
    assert nb.size == 0
    assert examined == 5


def test_no_stimulation_leaves_an_empty_neighbourhood(synthetic_table):
    params = AisParams(k1=0.0, capacity=10, clamp_negative_m_ij=True)
    target = synthetic_table.users()[0]
    candidates = [u for u in synthetic_table.users() if u != target]
    nb, examined = build_neighbourhood(
        synthetic_table, synthetic_table.profile(target), params, candidates, overlap_threshold=10, target_user=target
    )
    assert nb.size == 0
    assert examined == len(candidates)


def test_fixed_membership_never_changes(synthetic_table):
    members = list(synthetic_table.users()[1:8])
    antigen = synthetic_table.profile(synthetic_table.users()[0])
    nb = fixed_membership_weights(synthetic_table, antigen, AisParams(k1=0.0), members, overlap_threshold=10, max_steps=300)
    assert nb.user_ids() == tuple(members)
    assert nb.provenance is Provenance.FIXED


def test_fixed_membership_of_nobody_is_empty(tiny_table):
    assert fixed_membership_weights(tiny_table, {1: 1}, AisParams(), []).size == 0


def test_randomized_concentrations_are_seeded_and_in_range(identical_table):
    antigen = identical_table.profile(1)
    params = AisParams(capacity=3, stability_window=5)

    def randomized(seed):
        ais = build_immune_system(identical_table, antigen, params, [2, 3, 4], overlap_threshold=5, target_user=1)
        return ais.randomize_concentrations(seed).concentrations

    a = randomized(7)
    assert np.array_equal(a, randomized(7))
    assert not np.array_equal(a, randomized(8))
    assert np.all(a > params.death_threshold)
    assert np.all(a <= params.max_concentration)


def test_continuous_scale_table_also_builds():
    table = RatingsTable(VoteScale(min_vote=0, max_vote=1, step=0), {1: {1: 0.1, 2: 0.9}, 2: {1: 0.2, 2: 0.8}})
    ais = build_immune_system(table, table.profile(1), AisParams(capacity=1), [2], overlap_threshold=2, target_user=1)
    assert ais.reviewers_examined == 1
