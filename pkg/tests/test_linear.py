import numpy as np
import pytest

from gammanet.environments import FiniteMDPEnv, SquareWaveEnv
from gammanet.evaluation import analytic_mdp_values
from gammanet.features import OneHotCoder, TileLayerSpec, build_tile_coder
from gammanet.linear import (
    FixedBaseline,
    LinearGammaNet,
    load_weights,
    run_online,
    save_weights,
    td_delta,
)
from gammanet.timescale import (
    Timescale,
    TimescaleInput,
    TimescaleInputMode,
    TimescaleSetSpec,
)

GAMMA_ONLY = TimescaleInputMode(TimescaleInput.GAMMA_ONLY)


def make_tabular_net(n_states, loss_scaling=False, step_size=0.1):
    return LinearGammaNet(OneHotCoder(n_states), GAMMA_ONLY,
                          step_size=step_size, divide_by_active=False,
                          loss_scaling=loss_scaling)


def test_predict_zero_weights():
    net = make_tabular_net(3)
    assert net.predict([0.0], Timescale.from_gamma(0.5)) == 0.0


def test_predict_scaling_arithmetic():
    net = make_tabular_net(1, loss_scaling=True)
    net.weights[0] = 0.5
    assert net.predict([0.0], Timescale.from_gamma(0.5)) == pytest.approx(1.0)
    net_unscaled = make_tabular_net(1, loss_scaling=False)
    net_unscaled.weights[0] = 0.5
    assert net_unscaled.predict([0.0], Timescale.from_gamma(0.5)) == pytest.approx(0.5)


def test_td_update_gamma_zero():
    net = make_tabular_net(2)
    deltas = net.td_update([0.0], [1.0], 1.0, [Timescale.from_gamma(0.0)])
    assert deltas[0] == pytest.approx(1.0)


def test_td_update_terminal():
    net = make_tabular_net(2)
    net.weights[0] = 0.4
    deltas = net.td_update([0.0], [1.0], 1.0, [Timescale.from_gamma(0.5)],
                           terminal=True)
    assert deltas[0] == pytest.approx(0.6)


def test_self_loop_fixed_point():
    net = make_tabular_net(1, step_size=0.1)
    ts = Timescale.from_gamma(0.5)
    for _ in range(200):
        net.td_update([0.0], [0.0], 1.0, [ts])
    assert net.predict([0.0], ts) == pytest.approx(2.0, abs=1e-3)


def five_state_cycle():
    # irreducible 5-state cycle with varied per-arc cumulants
    P = np.zeros((5, 5))
    C = np.zeros((5, 5))
    for s, c in enumerate([1.0, -0.5, 0.3, 0.8, -1.0]):
        P[s, (s + 1) % 5] = 1.0
        C[s, (s + 1) % 5] = c
    return P, C


@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.9])
def test_tabular_fixed_point_matches_analytic(gamma):
    P, C = five_state_cycle()
    env = FiniteMDPEnv(P, C, rng=np.random.default_rng(1))
    v_true = analytic_mdp_values(env, gamma)
    net = make_tabular_net(5, step_size=0.1)
    ts = Timescale.from_gamma(gamma)
    spec = TimescaleSetSpec(always_include=(ts,))
    run_online(net, env, 30_000, spec, np.random.default_rng(2))
    v_est = np.array([net.predict([s / 4], ts) for s in range(5)])
    np.testing.assert_allclose(v_est, v_true, atol=1e-3)


def test_tabular_convergence_stochastic_chain():
    # noisy transitions: sampled TD(0) reaches the analytic values at the
    # looser tolerance a finite run affords
    P = np.array([
        [0.3, 0.7, 0.0, 0.0, 0.0],
        [0.0, 0.2, 0.8, 0.0, 0.0],
        [0.0, 0.0, 0.4, 0.6, 0.0],
        [0.0, 0.0, 0.0, 0.3, 0.7],
        [0.5, 0.0, 0.0, 0.0, 0.5],
    ])
    C = np.random.default_rng(0).uniform(-1, 1, size=(5, 5))
    gamma = 0.9
    env = FiniteMDPEnv(P, C, rng=np.random.default_rng(1))
    v_true = analytic_mdp_values(env, gamma)
    net = make_tabular_net(5, step_size=0.2)
    ts = Timescale.from_gamma(gamma)
    spec = TimescaleSetSpec(always_include=(ts,))
    run_online(net, env, 100_000, spec, np.random.default_rng(2),
               decay_to_zero=True)
    v_est = np.array([net.predict([s / 4], ts) for s in range(5)])
    np.testing.assert_allclose(v_est, v_true, atol=0.05)


def test_scaled_unscaled_delta_relation():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        gamma = rng.uniform(0.0, 0.999)
        c, v_next, v_now = rng.normal(size=3)
        unscaled = td_delta(c, v_next, v_now, gamma, False, False)
        # scaled head sees f-values: f = (1 - gamma) * V
        scaled = td_delta(c, (1 - gamma) * v_next, (1 - gamma) * v_now,
                          gamma, False, True)
        assert abs(scaled - (1 - gamma) * unscaled) <= 1e-12


def test_update_order_commutativity():
    rng = np.random.default_rng(8)
    mode = TimescaleInputMode()
    coder = build_tile_coder([TileLayerSpec(8, 0.25)], input_dim=3, rng=rng)
    gammas = [Timescale.from_gamma(g) for g in (0.0, 0.5, 0.9, 0.975)]
    net_a = LinearGammaNet(coder, mode)
    net_b = LinearGammaNet(coder, mode)
    net_a.weights[:] = net_b.weights[:] = rng.normal(size=coder.dim)
    net_a.td_update([0.2], [0.3], 1.0, gammas)
    net_b.td_update([0.2], [0.3], 1.0, list(reversed(gammas)))
    np.testing.assert_allclose(net_a.weights, net_b.weights, atol=1e-12)


def test_baseline_matches_single_timescale_net():
    # Identical feature streams: both use the same tabular coder, and the
    # gamma-net's timescale inputs are ignored by it (held constant).
    gamma_star = Timescale.from_gamma(0.9)
    coder = OneHotCoder(4)
    net = LinearGammaNet(coder, GAMMA_ONLY, step_size=0.1,
                         divide_by_active=False, loss_scaling=True)
    baseline = FixedBaseline(coder, gamma_star, step_size=0.1,
                             divide_by_active=False, loss_scaling=True)
    rng = np.random.default_rng(4)
    for _ in range(100):
        s, s2 = rng.integers(0, 4, size=2)
        c = rng.normal()
        term = bool(rng.random() < 0.1)
        net.td_update([s / 3], [s2 / 3], c, [gamma_star], terminal=term)
        baseline.td_update([s / 3], [s2 / 3], c, terminal=term)
    np.testing.assert_allclose(net.weights, baseline.weights, atol=1e-12)


def test_baseline_rejects_other_timescales():
    baseline = FixedBaseline(OneHotCoder(2), Timescale.from_gamma(0.9))
    with pytest.raises(ValueError):
        baseline.predict([0.0], Timescale.from_gamma(0.5))


def test_run_online_zero_steps():
    net = make_tabular_net(2)
    before = net.weights.copy()
    result = run_online(net, SquareWaveEnv(), 0,
                        TimescaleSetSpec(always_include=(Timescale.from_gamma(0.5),)),
                        np.random.default_rng(0))
    assert result.steps_run == 0 and not result.truncated
    np.testing.assert_array_equal(net.weights, before)


def test_run_online_deterministic():
    def run(seed):
        rng = np.random.default_rng(seed)
        coder = build_tile_coder([TileLayerSpec(4, 0.5)], input_dim=3,
                                 rng=np.random.default_rng(0))
        net = LinearGammaNet(coder, TimescaleInputMode())
        spec = TimescaleSetSpec(always_include=(Timescale.from_tau(1),),
                                n_gamma_uniform=1, n_tau_uniform=1)
        run_online(net, SquareWaveEnv(), 500, spec, rng)
        return net.weights

    np.testing.assert_array_equal(run(11), run(11))
    assert not np.array_equal(run(11), run(12))


def test_run_online_checkpoint_callback():
    seen = []
    net = make_tabular_net(2)
    run_online(net, SquareWaveEnv(), 100,
               TimescaleSetSpec(always_include=(Timescale.from_gamma(0.5),)),
               np.random.default_rng(0), checkpoint_every=30,
               checkpoint_cb=seen.append)
    assert seen == [30, 60, 90]


def test_weight_snapshot_roundtrip(tmp_path):
    w = np.random.default_rng(0).normal(size=17)
    path = tmp_path / "w.csv"
    save_weights(path, w, config_hash="abc123")
    loaded, chash = load_weights(path)
    np.testing.assert_array_equal(loaded, w)
    assert chash == "abc123"
