import numpy as np
import pytest
from conftest import mdp_with_policies, small_mdps, within_se
from hypothesis import given

from agnostic_il.analysis import counterexample
from agnostic_il.mdp import (
    L,
    R,
    LayeredMdp,
    PolicyUndefinedError,
    backward_dp,
    chain_mdp,
    counterexample_mdp,
    expected_cost,
    fork_expert_table,
    fork_mdp,
    forward_visitation,
    load_mdp,
    mdp_from_dict,
    mdp_to_dict,
    optimal_policy,
    performance_difference,
    random_mdp,
    rollout,
    sample_visitation_states,
    save_mdp,
    simulate,
)
from agnostic_il.policies import UNDEFINED, DeterministicPolicy, FinitePolicyClass, StochasticPolicy

N_MC = 100_000


def zero_cost(mdp):
    return LayeredMdp(mdp.layer_sizes, mdp.n_actions, mdp.initial_dist, mdp.transitions, np.zeros_like(mdp.cost_mean))


# ------------------------------------------------------------- validation


def test_rejects_unnormalised_initial_distribution():
    mdp = chain_mdp(3)
    with pytest.raises(ValueError):
        LayeredMdp(mdp.layer_sizes, 2, np.array([0.5]), mdp.transitions, mdp.cost_mean)


def test_rejects_transition_skipping_a_layer():
    mdp = chain_mdp(3)
    P = mdp.transitions.copy()
    P[0, 0] = 0.0
    P[0, 0, 2] = 1.0
    with pytest.raises(ValueError):
        LayeredMdp(mdp.layer_sizes, 2, mdp.initial_dist, P, mdp.cost_mean)


def test_rejects_cost_outside_unit_interval():
    mdp = chain_mdp(3)
    cost = mdp.cost_mean.copy()
    cost[0, 0] = 1.5
    with pytest.raises(ValueError):
        LayeredMdp(mdp.layer_sizes, 2, mdp.initial_dist, mdp.transitions, cost)


def test_rejects_transitions_out_of_last_layer():
    mdp = chain_mdp(2)
    P = mdp.transitions.copy()
    P[1, 0, 0] = 1.0
    with pytest.raises(ValueError):
        LayeredMdp(mdp.layer_sizes, 2, mdp.initial_dist, P, mdp.cost_mean)


def test_reachability_report():
    mdp = chain_mdp(3, n_actions=2, width=3)
    reach = mdp.reachable()
    assert reach.tolist() == [True, False, False, True, True, False, True, True, True]


# --------------------------------------------------------------- exact DP


def test_counterexample_expert_values():
    ce = counterexample(10)
    values = backward_dp(ce.mdp, ce.expert)
    s0 = ce.mdp.labels.index("S0")
    assert values.V[s0] == 0.0
    assert values.Q[s0, L] == pytest.approx(1.0, abs=1e-12)
    assert values.Q[s0, R] == 0.0


@pytest.mark.parametrize("H", [3, 4, 10])
def test_counterexample_expected_costs(H):
    ce = counterexample(H)
    h1, h2 = ce.policy_class[0], ce.policy_class[1]
    assert expected_cost(ce.mdp, ce.expert) == 0.0
    assert expected_cost(ce.mdp, h1) == pytest.approx(1.0, abs=1e-12)
    assert expected_cost(ce.mdp, h2) == pytest.approx(H - 1, abs=1e-12)


@given(mdp_with_policies(n_policies=1))
def test_zero_cost_mdp_has_zero_values(args):
    mdp, pi = args
    values = backward_dp(zero_cost(mdp), pi)
    assert not values.V.any() and not values.Q.any()
    assert expected_cost(zero_cost(mdp), pi) == 0.0


@given(mdp_with_policies(n_policies=1))
def test_value_tables_satisfy_bellman(args):
    mdp, pi = args
    vt = backward_dp(mdp, pi)
    np.testing.assert_allclose(vt.V, (pi.probs * vt.Q).sum(axis=1), atol=1e-10)
    expected_Q = mdp.cost_mean + mdp.transitions @ vt.V
    np.testing.assert_allclose(vt.Q, expected_Q, atol=1e-10)
    remaining = mdp.horizon - mdp.layer_of
    assert np.all(vt.V >= -1e-12) and np.all(vt.V <= remaining + 1e-12)


@given(mdp_with_policies(n_policies=1))
def test_visitation_is_normalised_per_layer(args):
    mdp, pi = args
    d = forward_visitation(mdp, pi).d
    assert d.sum() == pytest.approx(1.0, abs=1e-12)
    for t in range(mdp.horizon):
        assert d[list(mdp.layer(t))].sum() == pytest.approx(1.0 / mdp.horizon, abs=1e-12)


@given(mdp_with_policies(n_policies=1))
def test_cost_decomposes_over_occupancy(args):
    mdp, pi = args
    d = forward_visitation(mdp, pi).d
    occupancy_cost = mdp.horizon * float(d @ (pi.probs * mdp.cost_mean).sum(axis=1))
    assert expected_cost(mdp, pi) == pytest.approx(occupancy_cost, abs=1e-9)


@given(mdp_with_policies(n_policies=2))
def test_performance_difference_identity(args):
    mdp, pi, ref = args
    lhs, rhs = performance_difference(mdp, pi, ref)
    assert abs(lhs - rhs) <= 1e-9


@given(mdp_with_policies(n_policies=1))
def test_performance_difference_against_itself_is_zero(args):
    mdp, pi = args
    lhs, rhs = performance_difference(mdp, pi, pi)
    assert lhs == pytest.approx(0.0, abs=1e-12) and rhs == pytest.approx(0.0, abs=1e-12)


def test_performance_difference_counterexample_h1_vs_expert():
    ce = counterexample(10)
    lhs, rhs = performance_difference(ce.mdp, ce.policy_class[0], ce.expert)
    assert lhs == pytest.approx(1.0, abs=1e-12) and rhs == pytest.approx(1.0, abs=1e-12)


@given(small_mdps())
def test_optimal_policy_beats_every_deterministic_policy(mdp):
    best = expected_cost(mdp, DeterministicPolicy(optimal_policy(mdp), mdp.n_actions))
    rng = np.random.default_rng(0)
    for table in rng.integers(0, mdp.n_actions, size=(20, mdp.n_states)):
        assert best <= expected_cost(mdp, DeterministicPolicy(table, mdp.n_actions)) + 1e-12


def test_undefined_reachable_state_is_named():
    mdp = counterexample_mdp(4)
    table = np.zeros(mdp.n_states, dtype=np.int64)
    s2 = mdp.labels.index("S2")
    table[0] = R
    table[s2] = UNDEFINED
    with pytest.raises(PolicyUndefinedError) as info:
        backward_dp(mdp, DeterministicPolicy(table, 2))
    assert info.value.state == s2 and "S2" in str(info.value)


def test_undefined_unreachable_state_is_ignored():
    mdp = chain_mdp(3, n_actions=2, width=3)
    table = np.zeros(mdp.n_states, dtype=np.int64)
    table[~mdp.reachable()] = UNDEFINED
    assert expected_cost(mdp, DeterministicPolicy(table, 2)) == 0.0


# -------------------------------------------------------------- visitation


def test_single_path_chain_visits_uniformly():
    mdp = chain_mdp(3)
    d = forward_visitation(mdp, DeterministicPolicy([0, 0, 0], 2)).d
    np.testing.assert_allclose(d, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


@pytest.mark.parametrize("H", [3, 5, 10])
def test_counterexample_h2_visitation(H):
    ce = counterexample(H)
    by_label = forward_visitation(ce.mdp, ce.policy_class[1]).by_label(ce.mdp)
    assert by_label["S0"] == pytest.approx(1 / H, abs=1e-15)
    assert by_label["S2"] == pytest.approx(1 / H, abs=1e-15)
    assert by_label["S4"] == pytest.approx((H - 2) / H, abs=1e-12)


# ------------------------------------------------------------- Monte Carlo


@pytest.fixture(scope="module")
def mc_case():
    rng = np.random.default_rng(7)
    mdp = random_mdp(4, 3, 2, rng)
    pi = StochasticPolicy.random(mdp.n_states, 2, rng)
    return mdp, pi


def test_expected_cost_matches_monte_carlo(mc_case):
    mdp, pi = mc_case
    _, _, costs = simulate(mdp, pi, N_MC, np.random.default_rng(1))
    returns = costs.sum(axis=1)
    assert within_se(returns.mean(), expected_cost(mdp, pi), returns.std(ddof=1) / np.sqrt(N_MC))


def test_initial_values_match_monte_carlo(mc_case):
    mdp, pi = mc_case
    V = backward_dp(mdp, pi).V
    states, _, costs = simulate(mdp, pi, N_MC, np.random.default_rng(2))
    returns = costs.sum(axis=1)
    for s in mdp.layer(0):
        mask = states[:, 0] == s
        se = returns[mask].std(ddof=1) / np.sqrt(mask.sum())
        assert within_se(returns[mask].mean(), V[s], se)


def test_visitation_matches_monte_carlo(mc_case):
    mdp, pi = mc_case
    d = forward_visitation(mdp, pi).d
    samples = sample_visitation_states(mdp, pi, N_MC, np.random.default_rng(3), mode="iid")
    freq = np.bincount(samples, minlength=mdp.n_states) / N_MC
    se = np.sqrt(d * (1 - d) / N_MC)
    assert np.all(np.abs(freq - d) <= 3 * se + 1e-12)


def test_next_state_frequencies_match_transitions(mc_case):
    mdp, pi = mc_case
    states, actions, _ = simulate(mdp, pi, N_MC, np.random.default_rng(4), steps=2)
    s, a = int(mdp.layer(0)[0]), 0
    mask = (states[:, 0] == s) & (actions[:, 0] == a)
    n = mask.sum()
    freq = np.bincount(states[mask, 1], minlength=mdp.n_states) / n
    p = mdp.transitions[s, a]
    assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n) + 1e-12)


def test_noisy_costs_stay_in_range_and_keep_means():
    mdp = random_mdp(3, 2, 2, np.random.default_rng(5))
    noisy = LayeredMdp(mdp.layer_sizes, 2, mdp.initial_dist, mdp.transitions, mdp.cost_mean, cost_noise=0.3)
    pi = StochasticPolicy.random(mdp.n_states, 2, np.random.default_rng(6))
    _, _, costs = simulate(noisy, pi, N_MC, np.random.default_rng(7))
    assert costs.min() >= 0.0 and costs.max() <= 1.0
    returns = costs.sum(axis=1)
    assert within_se(returns.mean(), expected_cost(mdp, pi), returns.std(ddof=1) / np.sqrt(N_MC))


# ---------------------------------------------------------------- rollouts


def test_deterministic_rollout_ignores_seed():
    mdp = chain_mdp(5, n_actions=2, width=2)
    pi = DeterministicPolicy(np.ones(mdp.n_states, dtype=np.int64), 2)
    a = rollout(mdp, pi, np.random.default_rng(0))
    b = rollout(mdp, pi, np.random.default_rng(99))
    assert np.array_equal(a.states, b.states) and np.array_equal(a.costs, b.costs)


def test_rollout_is_reproducible_and_layered(mc_case):
    mdp, pi = mc_case
    a = rollout(mdp, pi, np.random.default_rng(11))
    b = rollout(mdp, pi, np.random.default_rng(11))
    assert np.array_equal(a.states, b.states) and np.array_equal(a.actions, b.actions)
    assert len(a) == mdp.horizon
    assert mdp.layer_of[a.states].tolist() == list(range(mdp.horizon))


def test_one_step_mdp_samples_follow_rho():
    mdp = random_mdp(1, 4, 2, np.random.default_rng(8))
    pi = StochasticPolicy.random(4, 2, np.random.default_rng(9))
    samples = sample_visitation_states(mdp, pi, N_MC, np.random.default_rng(10))
    freq = np.bincount(samples, minlength=4) / N_MC
    rho = mdp.initial_dist
    assert np.all(np.abs(freq - rho) <= 3 * np.sqrt(rho * (1 - rho) / N_MC) + 1e-12)


@pytest.mark.parametrize("mode", ["iid", "slice"])
def test_chain_samples_cover_the_path(mode):
    mdp = chain_mdp(4)
    pi = DeterministicPolicy(np.zeros(4, dtype=np.int64), 2)
    samples = sample_visitation_states(mdp, pi, 40_000, np.random.default_rng(0), mode=mode)
    freq = np.bincount(samples, minlength=4) / len(samples)
    assert np.all(np.abs(freq - 0.25) <= 0.01)


def test_slice_mode_returns_consecutive_states():
    mdp = chain_mdp(4)
    pi = DeterministicPolicy(np.zeros(4, dtype=np.int64), 2)
    assert sample_visitation_states(mdp, pi, 6, np.random.default_rng(0), mode="slice").tolist() == [0, 1, 2, 3, 0, 1]


def test_unknown_sampling_mode():
    with pytest.raises(ValueError):
        sample_visitation_states(chain_mdp(2), DeterministicPolicy([0, 0], 2), 3, np.random.default_rng(0), "batch")


# -------------------------------------------------------------- builders


def test_fork_expert_is_zero_cost():
    mdp = fork_mdp(6, 0.1)
    expert = DeterministicPolicy(fork_expert_table(6), 2)
    assert expected_cost(mdp, expert) == 0.0
    for a in (0, 1):
        const = DeterministicPolicy(np.full(mdp.n_states, a), 2)
        assert expected_cost(mdp, const) > 1.0


# ---------------------------------------------------------- serialization


@given(small_mdps())
def test_dict_round_trip_is_lossless(mdp):
    back = mdp_from_dict(mdp_to_dict(mdp))
    assert back.layer_sizes == mdp.layer_sizes
    assert np.array_equal(back.transitions, mdp.transitions)
    assert np.array_equal(back.cost_mean, mdp.cost_mean)
    assert np.array_equal(back.initial_dist, mdp.initial_dist)


def test_file_round_trip_with_policy_class(tmp_path):
    ce = counterexample(5)
    path = tmp_path / "ce.json"
    save_mdp(ce.mdp, path, policy_class=ce.policy_class.to_dict())
    mdp, extra = load_mdp(path)
    assert mdp.labels == ce.mdp.labels
    assert np.array_equal(mdp.transitions, ce.mdp.transitions)
    cls = FinitePolicyClass.from_dict(extra["policy_class"])
    assert cls.names == ("h1", "h2")
    assert np.array_equal(cls.tables, ce.policy_class.tables)
