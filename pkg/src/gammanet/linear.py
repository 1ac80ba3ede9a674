"""Linear-function-approximation value nets trained by TD(0).

The multi-timescale learner feeds (state, timescale) through a tile
coder and trains every timescale in the per-step set against the
pre-update weights, accumulating one combined weight change per
transition.  A fixed-timescale baseline shares the update rule but
codes the state alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environments import EndOfStream
from .timescale import (
    Timescale,
    TimescaleInputMode,
    TimescaleSetSpec,
    encode_timescale_input,
    sample_training_set,
)


def td_delta(cumulant: float, v_next: float, v_now: float, gamma: float,
             terminal: bool, loss_scaling: bool) -> float:
    """One-step TD error; with scaling the error is computed on the
    scaled-head parameterization, i.e. (1-gamma) times the unscaled error."""
    if terminal:
        delta = cumulant - v_now if not loss_scaling else (1.0 - gamma) * cumulant - v_now
    elif loss_scaling:
        delta = (1.0 - gamma) * cumulant + gamma * v_next - v_now
    else:
        delta = cumulant + gamma * v_next - v_now
    return delta


class LinearGammaNet:
    """Linear value estimator taking the timescale as an input.

    With `loss_scaling` on, the weights parameterize the scaled head f
    and queries divide by (1 - gamma).
    """

    def __init__(self, coder, input_mode: TimescaleInputMode,
                 step_size: float = 0.1, divide_by_active: bool = True,
                 loss_scaling: bool = True):
        self.coder = coder
        self.input_mode = input_mode
        self.step_size = float(step_size)
        self.divide_by_active = bool(divide_by_active)
        self.loss_scaling = bool(loss_scaling)
        self.weights = np.zeros(coder.dim)

    def features(self, state, ts: Timescale):
        inputs = np.concatenate(
            [np.asarray(state, dtype=float), encode_timescale_input(ts, self.input_mode)]
        )
        return self.coder.encode(inputs)

    def _features_batch(self, state, timescales):
        state = np.asarray(state, dtype=float)
        rows = np.stack([
            np.concatenate([state, encode_timescale_input(ts, self.input_mode)])
            for ts in timescales
        ])
        return self.coder.encode_batch(rows)

    def raw_output(self, state, ts: Timescale) -> float:
        return self.features(state, ts).dot(self.weights)

    def predict(self, state, ts: Timescale) -> float:
        out = self.raw_output(state, ts)
        if self.loss_scaling:
            out /= 1.0 - ts.gamma
        return out

    def _alpha(self, decay_scale: float = 1.0) -> float:
        alpha = self.step_size * decay_scale
        if self.divide_by_active:
            n_active = self.coder.n_tilings_total + (
                1 if getattr(self.coder, "include_bias", False) else 0
            )
            alpha /= n_active
        return alpha

    def td_update(self, state, next_state, cumulant: float,
                  timescales, terminal: bool = False,
                  decay_scale: float = 1.0) -> np.ndarray:
        """Apply one TD(0) transition over a set of timescales.

        All per-timescale errors are computed against the pre-update
        weights and the accumulated change is applied once.
        """
        timescales = list(timescales)
        if not timescales:
            raise ValueError("timescale set must be non-empty")
        phis = self._features_batch(state, timescales)
        phis_next = None if terminal else self._features_batch(next_state, timescales)
        deltas = np.empty(len(timescales))
        idx_chunks, val_chunks = [], []
        for k, ts in enumerate(timescales):
            v_now = phis[k].dot(self.weights)
            v_next = 0.0 if terminal else phis_next[k].dot(self.weights)
            delta = td_delta(cumulant, v_next, v_now, ts.gamma, terminal,
                             self.loss_scaling)
            deltas[k] = delta
            idx_chunks.append(phis[k].active_indices)
            val_chunks.append(np.full(len(phis[k].active_indices), delta))
        alpha = self._alpha(decay_scale)
        np.add.at(self.weights, np.concatenate(idx_chunks),
                  alpha * np.concatenate(val_chunks))
        return deltas


class FixedBaseline:
    """Single-timescale linear predictor with no timescale inputs."""

    def __init__(self, coder, timescale: Timescale, step_size: float = 0.1,
                 divide_by_active: bool = True, loss_scaling: bool = True):
        self.coder = coder
        self.timescale = timescale
        self.step_size = float(step_size)
        self.divide_by_active = bool(divide_by_active)
        self.loss_scaling = bool(loss_scaling)
        self.weights = np.zeros(coder.dim)

    def _check(self, ts: Timescale | None):
        if ts is not None and abs(ts.gamma - self.timescale.gamma) > 1e-12:
            raise ValueError(
                f"baseline is fixed at tau={self.timescale.tau}; "
                f"queried at tau={ts.tau}"
            )

    def features(self, state):
        return self.coder.encode(np.asarray(state, dtype=float))

    def predict(self, state, ts: Timescale | None = None) -> float:
        self._check(ts)
        out = self.features(state).dot(self.weights)
        if self.loss_scaling:
            out /= 1.0 - self.timescale.gamma
        return out

    def td_update(self, state, next_state, cumulant: float,
                  terminal: bool = False, decay_scale: float = 1.0) -> float:
        phi = self.features(state)
        v_now = phi.dot(self.weights)
        v_next = 0.0 if terminal else self.features(next_state).dot(self.weights)
        delta = td_delta(cumulant, v_next, v_now, self.timescale.gamma,
                         terminal, self.loss_scaling)
        alpha = self.step_size * decay_scale
        if self.divide_by_active:
            n_active = self.coder.n_tilings_total + (
                1 if getattr(self.coder, "include_bias", False) else 0
            )
            alpha /= n_active
        np.add.at(self.weights, phi.active_indices,
                  np.full(len(phi.active_indices), alpha * delta))
        return delta


@dataclass
class OnlineRunResult:
    steps_run: int
    truncated: bool
    deltas: list[np.ndarray] = field(default_factory=list)


def run_online(net, env, n_steps: int, set_spec: TimescaleSetSpec | None,
               rng: np.random.Generator, decay_to_zero: bool = False,
               log_deltas: bool = False, checkpoint_every: int = 0,
               checkpoint_cb=None) -> OnlineRunResult:
    """Drive TD(0) over an environment, resampling the timescale set per step.

    Works for both the multi-timescale net (set_spec given) and the
    fixed baseline (set_spec None).  With `decay_to_zero` the step size
    decays linearly to zero over the run.  `checkpoint_cb(steps_done)`
    fires every `checkpoint_every` steps when both are given.
    """
    result = OnlineRunResult(steps_run=0, truncated=False)
    for t in range(n_steps):
        try:
            tr = env.step()
        except EndOfStream:
            result.truncated = True
            break
        decay = (1.0 - t / n_steps) if decay_to_zero else 1.0
        if set_spec is not None:
            gammas = sample_training_set(set_spec, rng)
            deltas = net.td_update(tr.state, tr.next_state, tr.cumulant,
                                   gammas, tr.terminal, decay_scale=decay)
        else:
            deltas = np.array([
                net.td_update(tr.state, tr.next_state, tr.cumulant,
                              tr.terminal, decay_scale=decay)
            ])
        if log_deltas:
            result.deltas.append(deltas)
        result.steps_run += 1
        if checkpoint_every and checkpoint_cb is not None \
                and result.steps_run % checkpoint_every == 0:
            checkpoint_cb(result.steps_run)
    return result


def save_weights(path, weights: np.ndarray, config_hash: str = ""):
    """Flat CSV snapshot with a one-line header (dimension, config hash)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={len(weights)},config={config_hash}\n")
        for w in weights:
            fh.write(f"{float(w)!r}\n")


def load_weights(path) -> tuple[np.ndarray, str]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        fields = dict(kv.split("=", 1) for kv in header.split(","))
        weights = np.array([float(line) for line in fh])
    if len(weights) != int(fields["dim"]):
        raise ValueError(f"{path}: expected {fields['dim']} weights, got {len(weights)}")
    return weights, fields.get("config", "")
