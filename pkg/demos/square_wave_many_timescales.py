"""Train one linear net on a square wave and query it at nine horizons.

The net receives the prediction timescale as an extra input, so a single
weight vector answers "what is the discounted sum of the signal over the
next tau steps?" for any tau. Every transition trains six timescales at
once: the two bounds (tau=1 and tau=100) plus four random draws.

Run from the repository root:

    python demos/square_wave_many_timescales.py
"""

import numpy as np

from gammanet import (
    LinearGammaNet,
    SquareWaveEnv,
    TileLayerSpec,
    Timescale,
    TimescaleInputMode,
    TimescaleSetSpec,
    build_tile_coder,
    prediction_correlation,
    run_online,
    true_return_periodic,
)

rng = np.random.default_rng(0)

env = SquareWaveEnv(period=100)

# Observation is the normalized phase; the timescale adds two more inputs
# (gamma and tau/100), so the tile coder works in three dimensions.
mode = TimescaleInputMode()
coder = build_tile_coder(
    [TileLayerSpec(20, 1.0), TileLayerSpec(20, 0.5), TileLayerSpec(30, 0.1)],
    input_dim=1 + mode.n_inputs,
    rng=rng,
)
net = LinearGammaNet(coder, mode, step_size=0.1, loss_scaling=True)

spec = TimescaleSetSpec(
    always_include=(Timescale.from_tau(1), Timescale.from_tau(100)),
    n_gamma_uniform=2,
    n_tau_uniform=2,
)

print("training for 50,000 steps...")
run_online(net, env, 50_000, spec, rng)

signal = env.signal_sequence()
phases = np.arange(env.period)

print(f"{'tau':>6} {'corr':>7} {'rmse':>8}   prediction at phase 0 vs truth")
for tau in (1, 2, 5, 10, 20, 40, 60, 80, 100):
    ts = Timescale.from_tau(tau)
    truth = np.array([true_return_periodic(signal, p, ts.gamma) for p in phases])
    preds = np.array([net.predict([p / env.period], ts) for p in phases])
    corr = prediction_correlation(truth, preds)
    rmse = np.sqrt(np.mean((preds - truth) ** 2))
    print(f"{tau:>6} {corr:>7.4f} {rmse:>8.4f}   {preds[0]:>8.3f} vs {truth[0]:>8.3f}")

# Short horizons see the square wave itself; long horizons approach the
# signal's mean (zero), which is why raw errors shrink with tau while the
# correlation stays the interesting number.
