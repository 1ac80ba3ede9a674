import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gammanet.environments import FiniteMDPEnv, SquareWaveEnv
from gammanet.evaluation import (
    DEFAULT_PROBE_TAUS,
    MetricsReport,
    analytic_mdp_values,
    compose_difference_return,
    default_probes,
    interpolate_prediction,
    monte_carlo_return,
    normalized_mse,
    prediction_correlation,
    train_probe_suite,
    true_return_periodic,
)
from gammanet.features import OneHotCoder
from gammanet.linear import FixedBaseline
from gammanet.timescale import Timescale


def brute_force_periodic(signal, phase, gamma, horizon=20_000):
    period = len(signal)
    return sum(gamma**k * signal[(phase + 1 + k) % period]
               for k in range(horizon))


@given(st.integers(min_value=0, max_value=99),
       st.sampled_from([0.0, 0.3, 0.9, 0.99]))
@settings(max_examples=60, deadline=None)
def test_true_return_matches_brute_force(phase, gamma):
    signal = SquareWaveEnv(period=100).signal_sequence()
    closed = true_return_periodic(signal, phase, gamma)
    assert closed == pytest.approx(brute_force_periodic(signal, phase, gamma),
                                   abs=1e-9)


def test_true_return_gamma_zero_is_next_signal():
    signal = np.array([3.0, -1.0, 2.0, 5.0])
    for phase in range(4):
        assert true_return_periodic(signal, phase, 0.0) == signal[(phase + 1) % 4]


def test_true_return_domain():
    with pytest.raises(ValueError):
        true_return_periodic(np.ones(4), 0, 1.0)


def cycle_env(n=4):
    P = np.roll(np.eye(n), 1, axis=1)
    C = np.roll(np.diag(np.arange(1.0, n + 1)), 1, axis=1)
    return FiniteMDPEnv(P, C, rng=np.random.default_rng(0))


def test_analytic_values_match_power_iteration():
    rng = np.random.default_rng(6)
    P = rng.dirichlet(np.ones(4), size=4)
    C = rng.normal(size=(4, 4))
    env = FiniteMDPEnv(P, C, rng=rng)
    gamma = 0.85
    v = np.zeros(4)
    r_bar = env.expected_cumulant()
    for _ in range(2000):
        v = r_bar + gamma * P @ v
    np.testing.assert_allclose(analytic_mdp_values(env, gamma), v, atol=1e-10)


def test_analytic_values_terminal_row():
    P = np.array([[0.0, 1.0], [0.0, 1.0]])
    C = np.array([[0.0, 3.0], [0.0, 0.0]])
    env = FiniteMDPEnv(P, C, terminals=(1,))
    v = analytic_mdp_values(env, 0.9)
    # state 0 earns 3 and the episode ends; the terminal state is worth 0
    np.testing.assert_allclose(v, [3.0, 0.0])


def test_monte_carlo_matches_analytic():
    env = cycle_env()
    gamma = 0.8
    est = monte_carlo_return(env, 0, gamma, n_rollouts=400, horizon=200,
                             rng=np.random.default_rng(3))
    v = analytic_mdp_values(env, gamma)[0]
    # the cycle is deterministic, so the estimate is exact up to truncation
    assert abs(est.mean - v) <= est.truncation_bias_bound + 1e-12
    assert est.truncation_bias_bound == pytest.approx(
        gamma**200 * 4.0 / (1 - gamma))
    assert est.n_rollouts == 400


def test_monte_carlo_stops_at_terminal():
    P = np.array([[0.0, 1.0], [0.0, 1.0]])
    C = np.array([[0.0, 2.0], [0.0, 7.0]])
    env = FiniteMDPEnv(P, C, terminals=(1,))
    est = monte_carlo_return(env, 0, 0.9, n_rollouts=5, horizon=50,
                             rng=np.random.default_rng(0))
    assert est.mean == pytest.approx(2.0)
    assert est.std_error == 0.0


def test_monte_carlo_rejects_zero_rollouts():
    with pytest.raises(ValueError):
        monte_carlo_return(cycle_env(), 0, 0.5, 0, 10, np.random.default_rng(0))


def test_normalized_mse_example():
    table = {
        "a": {10.0: (2.0, 0.4), 20.0: (1.0, 0.1)},
        "b": {10.0: (4.0, 0.8), 20.0: (0.5, 0.2)},
    }
    report = normalized_mse(table)
    by = {(r["series"], r["tau"]): r for r in report.rows}
    assert by[("a", 10.0)]["norm_mse"] == pytest.approx(0.5)
    assert by[("b", 10.0)]["norm_mse"] == pytest.approx(1.0)
    assert by[("a", 20.0)]["norm_mse"] == pytest.approx(1.0)
    assert by[("b", 20.0)]["norm_mse"] == pytest.approx(0.5)
    # bar = mean of the per-tau normalized values
    assert report.bars["a"][0] == pytest.approx(0.75)
    assert report.bars["a"][1] == pytest.approx((0.5 + 0.5) / 2)


def test_normalization_idempotent():
    table = {
        "a": {10.0: (2.0, 0.4), 20.0: (1.0, 0.1)},
        "b": {10.0: (4.0, 0.8), 20.0: (0.5, 0.2)},
    }
    once = normalized_mse(table)
    renorm_input = {
        s: {r["tau"]: (r["norm_mse"], r["norm_var"])
            for r in once.rows if r["series"] == s}
        for s in once.series_names()
    }
    twice = normalized_mse(renorm_input)
    for a, b in zip(once.rows, twice.rows):
        assert b["norm_mse"] == pytest.approx(a["norm_mse"], abs=1e-15)
        assert b["norm_var"] == pytest.approx(a["norm_var"], abs=1e-15)


def test_normalized_mse_degenerate_zero():
    table = {"a": {5.0: (0.0, 0.0)}, "b": {5.0: (0.0, 0.0)}}
    report = normalized_mse(table)
    assert all(r["norm_mse"] == 0.0 and r["norm_var"] == 0.0
               for r in report.rows)


def test_normalized_mse_probe_mismatch():
    with pytest.raises(ValueError):
        normalized_mse({"a": {1.0: (1.0, 0.0)}, "b": {2.0: (1.0, 0.0)}})
    with pytest.raises(ValueError):
        normalized_mse({})


def test_metrics_csv_roundtrip(tmp_path):
    table = {"net": {1.0: (0.5, 0.01), 10.0: (0.25, 0.0)},
             "base": {1.0: (1.0, 0.02), 10.0: (0.5, 0.0)}}
    corr = {"net": {1.0: 0.99, 10.0: float("nan")},
            "base": {1.0: 0.95, 10.0: 0.9}}
    report = normalized_mse(table, corr)
    path = tmp_path / "metrics.csv"
    report.write_csv(path)
    loaded = MetricsReport.read_csv(path)
    assert loaded.series_names() == report.series_names()
    assert loaded.taus() == [1.0, 10.0]
    for a, b in zip(loaded.rows, report.rows):
        for k in ("mse_mean", "norm_mse", "norm_var"):
            assert a[k] == b[k]
    assert math.isnan(loaded.rows[2]["corr"])
    assert loaded.bars == report.bars


def test_metrics_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("series,tau,mse\nx,1.0,0.5\n")
    with pytest.raises(ValueError):
        MetricsReport.read_csv(p)


def test_correlation_basic():
    assert prediction_correlation([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert prediction_correlation([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert math.isnan(prediction_correlation([1, 2, 3], [5, 5, 5]))
    with pytest.raises(ValueError):
        prediction_correlation([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        prediction_correlation([1], [1])


def probe_pairs(values):
    return [(Timescale.from_tau(t), v) for t, v in values]


def test_interpolation_exact_at_probes():
    pairs = probe_pairs([(1, 0.1), (10, 0.5), (100, 0.9)])
    for ts, v in pairs:
        assert interpolate_prediction(pairs, ts) == v
        assert interpolate_prediction(pairs, ts, scale="gamma") == v


def test_interpolation_tau_scale_midpoint():
    pairs = probe_pairs([(20, 2.0), (40, 6.0)])
    got = interpolate_prediction(pairs, Timescale.from_tau(30), scale="tau")
    assert got == pytest.approx(4.0)


def test_interpolation_gamma_scale_weight():
    # tau=30 sits at gamma=0.96667 between gamma(20)=0.95 and gamma(40)=0.975
    pairs = probe_pairs([(20, 0.0), (40, 1.0)])
    got = interpolate_prediction(pairs, Timescale.from_tau(30), scale="gamma")
    lam = (1 - 1 / 30 - 0.95) / (0.975 - 0.95)
    assert got == pytest.approx(lam)
    assert got == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_interpolation_errors():
    pairs = probe_pairs([(10, 1.0), (20, 2.0)])
    with pytest.raises(ValueError):
        interpolate_prediction(pairs, Timescale.from_tau(5))
    with pytest.raises(ValueError):
        interpolate_prediction(pairs, Timescale.from_tau(30))
    with pytest.raises(ValueError):
        interpolate_prediction(pairs, Timescale.from_tau(15), scale="log")
    with pytest.raises(ValueError):
        interpolate_prediction([], Timescale.from_tau(15))


def test_compose_difference_return():
    env = cycle_env()
    g_long, g_short = 0.9, 0.5
    v = analytic_mdp_values(env, g_long)[0], analytic_mdp_values(env, g_short)[0]
    band = compose_difference_return(g_long, v[0], g_short, v[1])
    # the band return weights each step by the gap between the discounts
    expected = sum((g_long**k - g_short**k) * [1.0, 2.0, 3.0, 4.0][k % 4]
                   for k in range(5000))
    assert band == pytest.approx(expected, abs=1e-9)
    with pytest.raises(ValueError):
        compose_difference_return(0.5, 1.0, 0.9, 1.0)


def test_default_probes():
    assert tuple(ts.tau for ts in default_probes()) == DEFAULT_PROBE_TAUS


def test_train_probe_suite_tabular():
    env_factory = lambda: cycle_env()
    probes = [Timescale.from_tau(t) for t in (1.0, 10.0)]

    def factory(ts):
        return FixedBaseline(OneHotCoder(4), ts, step_size=0.1,
                             divide_by_active=False)

    suite = train_probe_suite(probes, factory, env_factory, n_steps=4000)
    assert suite.trained and set(suite.baselines) == {1.0, 10.0}
    env = cycle_env()
    for ts in probes:
        v_true = analytic_mdp_values(env, ts.gamma)
        base = suite.baselines[ts.tau]
        got = [base.predict(env.observe(s), ts) for s in range(4)]
        np.testing.assert_allclose(got, v_true, atol=1e-2)


def test_train_probe_suite_untrained():
    suite = train_probe_suite([Timescale.from_tau(1.0)],
                              lambda ts: FixedBaseline(OneHotCoder(2), ts),
                              lambda: cycle_env(), n_steps=0)
    assert not suite.trained
