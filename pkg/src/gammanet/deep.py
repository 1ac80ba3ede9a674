"""Fully-connected multi-timescale value net with n-step TD training.

The net maps (feature vector, timescale inputs) through one of four
embedding schemes into a stack of dense layers (rectified hidden, linear
head).  Training samples from a prioritized replay buffer, tiles each
batch across the per-step timescale set, bootstraps from a periodically
synchronized target copy (semi-gradient), and updates with Adam.
Gradients are computed by hand-written backpropagation.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .environments import EndOfStream
from .timescale import (
    Timescale,
    TimescaleInputMode,
    TimescaleSetSpec,
    encode_timescale_input,
    sample_training_set,
    tau_to_gamma,
)


class EmbeddingKind(enum.Enum):
    DIRECT = "direct"
    LEARNED_CONCAT = "l_embed"
    HADAMARD = "h_l_embed"
    MATRIX = "matrix"


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else z


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    return (z > 0.0).astype(z.dtype) if kind == "relu" else np.ones_like(z)


class DeepGammaNet:
    """Value net whose head predicts the scaled value f when
    `loss_scaling` is on; queries then divide by (1 - gamma)."""

    def __init__(self, phi_dim: int, layer_sizes=(32, 16, 8, 4, 1),
                 embedding: EmbeddingKind = EmbeddingKind.DIRECT,
                 input_mode: TimescaleInputMode = TimescaleInputMode(),
                 loss_scaling: bool = True, embed_size: int = 16,
                 embed_activation: str = "linear",
                 rng: np.random.Generator | None = None):
        if layer_sizes[-1] != 1:
            raise ValueError("final layer must have output size 1")
        if embed_activation not in ("linear", "relu"):
            raise ValueError(f"unknown embed activation {embed_activation!r}")
        self.phi_dim = int(phi_dim)
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.embedding = embedding
        self.input_mode = input_mode
        self.loss_scaling = bool(loss_scaling)
        self.embed_size = int(embed_size)
        self.embed_activation = embed_activation
        rng = rng if rng is not None else np.random.default_rng(0)

        m = input_mode.n_inputs
        d = self.phi_dim
        self.params: dict[str, np.ndarray] = {}
        if embedding is EmbeddingKind.LEARNED_CONCAT:
            self.params["emb_W"] = rng.normal(0.0, 0.1, size=(m, self.embed_size))
            self.params["emb_b"] = np.zeros(self.embed_size)
            nu_dim = d + self.embed_size
        elif embedding is EmbeddingKind.HADAMARD:
            # start near the identity gate: xi(ts) ~ 1
            self.params["emb_W"] = rng.normal(0.0, 0.1, size=(m, d))
            self.params["emb_b"] = np.ones(d)
            nu_dim = d
        elif embedding is EmbeddingKind.MATRIX:
            self.params["emb_W"] = rng.normal(0.0, 0.01, size=(m, d * d))
            self.params["emb_b"] = np.eye(d).ravel().copy()
            nu_dim = d
        else:
            nu_dim = d + m

        fan_in = nu_dim
        for i, size in enumerate(self.layer_sizes):
            last = i == len(self.layer_sizes) - 1
            std = np.sqrt((1.0 if last else 2.0) / fan_in)
            self.params[f"W{i}"] = rng.normal(0.0, std, size=(fan_in, size))
            self.params[f"b{i}"] = np.zeros(size)
            fan_in = size

    # -- embedding ---------------------------------------------------------

    def embed(self, phi: np.ndarray, ts_enc: np.ndarray):
        """Combine features and timescale inputs; returns (nu, cache)."""
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        ts_enc = np.atleast_2d(np.asarray(ts_enc, dtype=float))
        if phi.shape[1] != self.phi_dim:
            raise ValueError(f"expected phi dim {self.phi_dim}, got {phi.shape[1]}")
        if ts_enc.shape[1] != self.input_mode.n_inputs:
            raise ValueError(
                f"expected {self.input_mode.n_inputs} timescale inputs, "
                f"got {ts_enc.shape[1]}"
            )
        kind = self.embedding
        if kind is EmbeddingKind.DIRECT:
            return np.concatenate([phi, ts_enc], axis=1), (phi, ts_enc, None)
        z = ts_enc @ self.params["emb_W"] + self.params["emb_b"]
        xi = _act(z, self.embed_activation)
        if kind is EmbeddingKind.LEARNED_CONCAT:
            nu = np.concatenate([phi, xi], axis=1)
        elif kind is EmbeddingKind.HADAMARD:
            nu = phi * xi
        else:  # MATRIX
            B, d = phi.shape
            Xi = xi.reshape(B, d, d)
            nu = np.einsum("bi,bij->bj", phi, Xi)
        return nu, (phi, ts_enc, z)

    def _embed_backward(self, dnu: np.ndarray, cache, grads: dict):
        phi, ts_enc, z = cache
        kind = self.embedding
        if kind is EmbeddingKind.DIRECT:
            return
        if kind is EmbeddingKind.LEARNED_CONCAT:
            dxi = dnu[:, self.phi_dim:]
        elif kind is EmbeddingKind.HADAMARD:
            dxi = dnu * phi
        else:  # MATRIX
            B, d = phi.shape
            dXi = np.einsum("bi,bj->bij", phi, dnu)
            dxi = dXi.reshape(B, d * d)
        dz = dxi * _act_grad(z, self.embed_activation)
        grads["emb_W"] = ts_enc.T @ dz
        grads["emb_b"] = dz.sum(axis=0)

    # -- forward / backward ------------------------------------------------

    def head_batch(self, phi: np.ndarray, ts_enc: np.ndarray,
                   with_cache: bool = False):
        """Raw head output f (or V when scaling is off), shape (batch,)."""
        nu, emb_cache = self.embed(phi, ts_enc)
        a = nu
        zs, acts = [], [a]
        n = len(self.layer_sizes)
        for i in range(n):
            z = a @ self.params[f"W{i}"] + self.params[f"b{i}"]
            a = _act(z, "relu") if i < n - 1 else z
            zs.append(z)
            acts.append(a)
        out = a[:, 0]
        if with_cache:
            return out, (emb_cache, zs, acts)
        return out

    def forward(self, phi, ts: Timescale) -> float:
        """Value estimate for a single (features, timescale) query."""
        ts_enc = encode_timescale_input(ts, self.input_mode)
        out = float(self.head_batch(np.atleast_2d(phi), ts_enc[None, :])[0])
        if self.loss_scaling:
            out /= 1.0 - ts.gamma
        return out

    def loss_and_grads(self, phi: np.ndarray, ts_enc: np.ndarray,
                       targets: np.ndarray):
        """Mean squared TD loss and its gradient w.r.t. all parameters.

        Targets are constants (semi-gradient); only the online head
        output at the start state carries gradient.
        """
        preds, (emb_cache, zs, acts) = self.head_batch(phi, ts_enc, with_cache=True)
        deltas = np.asarray(targets, dtype=float) - preds
        B = len(deltas)
        loss = float(np.mean(deltas**2))
        grads: dict[str, np.ndarray] = {}
        da = (-2.0 * deltas / B)[:, None]
        n = len(self.layer_sizes)
        for i in reversed(range(n)):
            dz = da if i == n - 1 else da * _act_grad(zs[i], "relu")
            grads[f"W{i}"] = acts[i].T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            da = dz @ self.params[f"W{i}"].T
        self._embed_backward(da, emb_cache, grads)
        return loss, grads, deltas

    # -- lifecycle ---------------------------------------------------------

    def clone(self) -> "DeepGammaNet":
        other = object.__new__(DeepGammaNet)
        other.__dict__.update(self.__dict__)
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def save(self, path, config_hash: str = ""):
        meta = {
            "phi_dim": self.phi_dim,
            "layer_sizes": list(self.layer_sizes),
            "embedding": self.embedding.value,
            "input_kind": self.input_mode.kind.value,
            "tau_max": self.input_mode.tau_max,
            "loss_scaling": self.loss_scaling,
            "embed_size": self.embed_size,
            "embed_activation": self.embed_activation,
            "config_hash": config_hash,
        }
        np.savez(path, __meta__=np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
        ), **self.params)

    @classmethod
    def load(cls, path) -> "DeepGammaNet":
        from .timescale import TimescaleInput

        with np.load(path) as data:
            meta = json.loads(bytes(data["__meta__"]).decode())
            params = {k: data[k] for k in data.files if k != "__meta__"}
        net = cls(
            phi_dim=meta["phi_dim"],
            layer_sizes=meta["layer_sizes"],
            embedding=EmbeddingKind(meta["embedding"]),
            input_mode=TimescaleInputMode(
                TimescaleInput(meta["input_kind"]), meta["tau_max"]
            ),
            loss_scaling=meta["loss_scaling"],
            embed_size=meta["embed_size"],
            embed_activation=meta["embed_activation"],
        )
        net.params = params
        return net


def init_scaled_weights(net: DeepGammaNet, mode: str = "scaled") -> DeepGammaNet:
    """Shrink the head's initial weights so early scaled-value queries
    at long timescales stay small."""
    if mode == "off":
        return net
    if mode != "scaled":
        raise ValueError(f"unknown init mode {mode!r}")
    if not net.loss_scaling:
        raise ValueError("scaled weight init requires loss scaling")
    factor = 1.0 - tau_to_gamma(net.input_mode.tau_max)
    last = len(net.layer_sizes) - 1
    net.params[f"W{last}"] *= factor
    net.params[f"b{last}"] *= factor
    return net


def sync_target(net: DeepGammaNet, target: DeepGammaNet) -> DeepGammaNet:
    """Copy online parameters into the frozen bootstrap copy."""
    for k, v in net.params.items():
        np.copyto(target.params[k], v)
    return target


def nstep_scaled_delta(cumulants, bootstrap: float, current: float,
                       gamma: float, scaled: bool,
                       terminal: bool = False) -> float:
    """n-step TD error from value-level quantities.

    `bootstrap` and `current` are value estimates (target net at the
    window end, online net at the start).  Terminal windows drop the
    bootstrap term.  With `scaled` the whole error is multiplied by
    (1 - gamma), which equals computing it on the scaled-head
    parameterization.
    """
    cumulants = np.asarray(cumulants, dtype=float)
    n = len(cumulants)
    if n == 0:
        raise ValueError("window must contain at least one cumulant")
    discounted = float(np.sum(gamma ** np.arange(n) * cumulants))
    delta = discounted - current
    if not terminal:
        delta += gamma**n * bootstrap
    return (1.0 - gamma) * delta if scaled else delta


class Adam:
    """Adaptive-moment optimizer over a named parameter dict."""

    def __init__(self, params: dict, step_size: float = 6.25e-5,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.step_size = step_size
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def update(self, params: dict, grads: dict):
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g**2
            params[k] -= self.step_size * (self.m[k] / bc1) / (
                np.sqrt(self.v[k] / bc2) + self.eps
            )


@dataclass(frozen=True)
class Window:
    """An n-step slice of experience that never crosses a terminal."""

    start_phi: np.ndarray
    cumulants: np.ndarray
    bootstrap_phi: np.ndarray
    terminal: bool


class PrioritizedReplay:
    """Proportional prioritized buffer of transitions with n-step windows.

    New samples enter at the current maximum priority; after training,
    a sample's priority becomes its maximum squared loss across the
    step's timescale set.  No importance-sampling correction is applied
    by default.
    """

    def __init__(self, capacity: int = 100_000, n_step: int = 4,
                 batch_size: int = 32, min_history: int = 20_000,
                 priority_exponent: float = 1.0):
        if capacity < 1 or n_step < 1 or batch_size < 1:
            raise ValueError("capacity, n_step and batch_size must be >= 1")
        self.capacity = capacity
        self.n_step = n_step
        self.batch_size = batch_size
        self.min_history = min_history
        self.priority_exponent = priority_exponent
        self.size = 0
        self._write = 0
        self._phi = None
        self._next_phi = None
        self._cum = np.zeros(capacity)
        self._term = np.zeros(capacity, dtype=bool)
        self._prio = np.zeros(capacity)
        self._max_prio = 1.0

    def __len__(self) -> int:
        return self.size

    def _physical(self, logical) -> np.ndarray:
        return (self._write - self.size + np.asarray(logical)) % self.capacity

    def add(self, phi, cumulant: float, next_phi, terminal: bool):
        phi = np.asarray(phi, dtype=float)
        next_phi = np.asarray(next_phi, dtype=float)
        if self._phi is None:
            self._phi = np.zeros((self.capacity, len(phi)))
            self._next_phi = np.zeros((self.capacity, len(phi)))
        i = self._write
        self._phi[i] = phi
        self._next_phi[i] = next_phi
        self._cum[i] = cumulant
        self._term[i] = terminal
        self._prio[i] = self._max_prio
        self._write = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def can_sample(self) -> bool:
        return self.size >= max(self.min_history, 1)

    def window_at(self, logical: int) -> Window:
        """Up-to-n-step window starting at a logical index (0 = oldest);
        truncated at the newest transition or at the first terminal."""
        phys = self._physical(logical)
        length = min(self.n_step, self.size - logical)
        cums, terminal = [], False
        for j in range(length):
            p = self._physical(logical + j)
            cums.append(self._cum[p])
            if self._term[p]:
                terminal = True
                length = j + 1
                break
        last = self._physical(logical + length - 1)
        return Window(self._phi[phys].copy(), np.array(cums),
                      self._next_phi[last].copy(), terminal)

    def sample(self, rng: np.random.Generator):
        """Priority-proportional draw of batch_size window start indices."""
        if not self.can_sample():
            raise RuntimeError(
                f"replay holds {self.size} < min_history {self.min_history} items"
            )
        prios = self._prio[self._physical(np.arange(self.size))]
        weights = prios**self.priority_exponent
        probs = weights / weights.sum()
        logical = rng.choice(self.size, size=self.batch_size, p=probs)
        return logical, [self.window_at(int(l)) for l in logical]

    def update_priorities(self, logical, priorities):
        priorities = np.asarray(priorities, dtype=float)
        self._prio[self._physical(logical)] = priorities
        if len(priorities):
            self._max_prio = max(self._max_prio, float(priorities.max()))

    def priority_at(self, logical: int) -> float:
        return float(self._prio[self._physical(logical)])


@dataclass
class TrainStepSummary:
    trained: bool
    effective_batch_size: int = 0
    mean_loss: float = float("nan")
    deltas: np.ndarray | None = None  # (batch, |timescale set|)
    timescales: list = field(default_factory=list)


def train_step(net: DeepGammaNet, target: DeepGammaNet,
               replay: PrioritizedReplay, set_spec: TimescaleSetSpec,
               optimizer: Adam, rng: np.random.Generator) -> TrainStepSummary:
    """One training update: sample a batch, tile it across a freshly
    drawn timescale set, backprop the squared n-step TD loss through the
    online net only, and refresh the samples' priorities with their
    maximum squared loss across the set."""
    if not replay.can_sample():
        return TrainStepSummary(trained=False)
    logical, windows = replay.sample(rng)
    gammas = sample_training_set(set_spec, rng)
    B, K = len(windows), len(gammas)

    ts_enc_all = np.stack([encode_timescale_input(ts, net.input_mode)
                           for ts in gammas])
    # bootstrap values from the frozen target copy, per (window, timescale)
    boot_phi = np.stack([w.bootstrap_phi for w in windows])
    start_phi = np.stack([w.start_phi for w in windows])
    phi_tiled = np.repeat(start_phi, K, axis=0)
    ts_tiled = np.tile(ts_enc_all, (B, 1))

    boot = np.empty((B, K))
    for k in range(K):
        boot[:, k] = target.head_batch(boot_phi, np.tile(ts_enc_all[k], (B, 1)))

    targets = np.empty(B * K)
    scale = net.loss_scaling
    for b, w in enumerate(windows):
        n = len(w.cumulants)
        for k, ts in enumerate(gammas):
            g = ts.gamma
            G = float(np.sum(g ** np.arange(n) * w.cumulants))
            t = (1.0 - g) * G if scale else G
            if not w.terminal:
                t += g**n * boot[b, k]
            targets[b * K + k] = t

    loss, grads, deltas = net.loss_and_grads(phi_tiled, ts_tiled, targets)
    optimizer.update(net.params, grads)
    deltas = deltas.reshape(B, K)
    replay.update_priorities(logical, (deltas**2).max(axis=1))
    return TrainStepSummary(trained=True, effective_batch_size=B * K,
                            mean_loss=loss, deltas=deltas, timescales=gammas)


@dataclass
class DeepRunResult:
    env_steps: int
    train_steps: int
    syncs: int
    truncated: bool


def run_deep_training(net: DeepGammaNet, env, replay: PrioritizedReplay,
                      set_spec: TimescaleSetSpec, n_env_steps: int,
                      optimizer: Adam, rng: np.random.Generator,
                      train_every: int = 4, sync_interval: int = 10_000,
                      checkpoint_every: int = 0,
                      checkpoint_cb=None) -> DeepRunResult:
    """Feed an environment/trace into replay and train periodically.

    The train-every counter persists across episode boundaries.
    """
    target = net.clone()
    env_steps = train_steps = syncs = 0
    truncated = False
    for step in range(1, n_env_steps + 1):
        try:
            tr = env.step()
        except EndOfStream:
            truncated = True
            break
        env_steps = step
        replay.add(tr.state, tr.cumulant, tr.next_state, tr.terminal)
        if step % train_every == 0:
            summary = train_step(net, target, replay, set_spec, optimizer, rng)
            if summary.trained:
                train_steps += 1
                if train_steps % sync_interval == 0:
                    sync_target(net, target)
                    syncs += 1
                if checkpoint_every and train_steps % checkpoint_every == 0 \
                        and checkpoint_cb is not None:
                    checkpoint_cb(train_steps, net)
    return DeepRunResult(env_steps, train_steps, syncs, truncated)
