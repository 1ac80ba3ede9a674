"""Transition streams: square wave, finite Markov chains, CSV trace replay.

Every environment exposes ``step() -> Transition``.  The cumulant
returned by a step is the signal observed on arrival in the next state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


class EndOfStream(Exception):
    """Raised when a finite trace has no transitions left."""


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    cumulant: float
    next_state: np.ndarray
    terminal: bool


class SquareWaveEnv:
    """Repeating square wave: +1 on the first half-period, -1 on the second.

    The observation is the normalized phase, ``p / period``; the signal
    never terminates.
    """

    def __init__(self, period: int = 100, phase: int = 0):
        if period < 2 or period % 2 != 0:
            raise ValueError(f"period must be even and >= 2, got {period}")
        self.period = int(period)
        self.phase = int(phase) % self.period

    def signal(self, phase: int) -> float:
        return 1.0 if (phase % self.period) < self.period // 2 else -1.0

    def observe(self) -> np.ndarray:
        return np.array([self.phase / self.period])

    def signal_sequence(self) -> np.ndarray:
        """One full period of the cumulant, indexed by phase."""
        return np.array([self.signal(p) for p in range(self.period)])

    def step(self) -> Transition:
        state = self.observe()
        self.phase = (self.phase + 1) % self.period
        return Transition(state, self.signal(self.phase), self.observe(), False)


class FiniteMDPEnv:
    """Finite Markov chain with the policy folded into the transition matrix.

    `cumulants[s, s']` is the expected signal for the transition; on
    reaching a terminal state the chain resets to `start_state`.
    """

    def __init__(self, transition_matrix, cumulants, terminals=(),
                 start_state: int = 0, rng: np.random.Generator | None = None,
                 obs_kind: str = "scalar"):
        P = np.asarray(transition_matrix, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("transition matrix must be square")
        if not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("each row of the transition matrix must sum to 1")
        C = np.asarray(cumulants, dtype=float)
        if C.shape != P.shape:
            raise ValueError("cumulant matrix must match the transition matrix")
        if obs_kind not in ("scalar", "one_hot"):
            raise ValueError(f"unknown obs_kind {obs_kind!r}")
        self.P = P
        self.cumulants = C
        self.n_states = P.shape[0]
        self.terminals = frozenset(int(t) for t in terminals)
        self.start_state = int(start_state)
        self.state = self.start_state
        self.obs_kind = obs_kind
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def observe(self, state: int | None = None) -> np.ndarray:
        s = self.state if state is None else state
        if self.obs_kind == "one_hot":
            v = np.zeros(self.n_states)
            v[s] = 1.0
            return v
        return np.array([s / max(self.n_states - 1, 1)])

    def step(self) -> Transition:
        s = self.state
        s_next = int(self.rng.choice(self.n_states, p=self.P[s]))
        c = self.cumulants[s, s_next]
        terminal = s_next in self.terminals
        tr = Transition(self.observe(s), c, self.observe(s_next), terminal)
        self.state = self.start_state if terminal else s_next
        return tr

    def clone_at(self, state: int, rng: np.random.Generator) -> "FiniteMDPEnv":
        env = FiniteMDPEnv(self.P, self.cumulants, self.terminals,
                           self.start_state, rng, self.obs_kind)
        env.state = int(state)
        return env

    def expected_cumulant(self) -> np.ndarray:
        """Per-state expected one-step cumulant under the chain."""
        return (self.P * self.cumulants).sum(axis=1)


class TraceReplay:
    """Replay of recorded (observation, cumulant, terminal) records, in order."""

    def __init__(self, observations: np.ndarray, cumulants: np.ndarray,
                 terminals: np.ndarray):
        self.observations = observations
        self.cumulants = cumulants
        self.terminals = terminals
        self.cursor = 0

    def __len__(self) -> int:
        return len(self.cumulants)

    @property
    def obs_dim(self) -> int:
        return self.observations.shape[1]

    def reset(self):
        self.cursor = 0

    def step(self) -> Transition:
        # A record at index i is the arrival data for the step from i-1
        # to i, so the last usable source index is len - 2.
        i = self.cursor
        if i + 1 >= len(self):
            raise EndOfStream("trace exhausted")
        self.cursor += 1
        return Transition(
            self.observations[i],
            float(self.cumulants[i + 1]),
            self.observations[i + 1],
            bool(self.terminals[i + 1]),
        )


def load_trace(path) -> TraceReplay:
    """Load a trace CSV with columns obs_0..obs_{d-1}, cumulant, terminal."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty trace file") from None
        obs_cols = [c for c in header if c.startswith("obs_")]
        expected = [f"obs_{i}" for i in range(len(obs_cols))] + ["cumulant", "terminal"]
        if header != expected:
            raise ValueError(
                f"{path}: bad header {header}, expected {expected}"
            )
        d = len(obs_cols)
        obs, cums, terms = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise ValueError(f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}")
            try:
                obs.append([float(x) for x in row[:d]])
                cums.append(float(row[d]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value in row") from None
            if row[d + 1] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: terminal must be 0 or 1")
            terms.append(row[d + 1] == "1")
    if not cums:
        raise ValueError(f"{path}: trace has a header but no records")
    return TraceReplay(np.array(obs), np.array(cums), np.array(terms))
