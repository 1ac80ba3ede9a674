"""Timescale representation and sampling.

A prediction timescale can be expressed either as a continuation
probability ``gamma`` in [0, 1) or as an expected horizon ``tau`` in
timesteps, related by ``tau = 1 / (1 - gamma)``.  Learners take sets of
timescales to train on per transition, and the timescale itself is fed
to the learner as one or two normalized scalars.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

_REL_TOL = 1e-12


def gamma_to_tau(gamma: float) -> float:
    """Expected horizon in timesteps for a continuation probability."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    return 1.0 / (1.0 - gamma)


def tau_to_gamma(tau: float) -> float:
    """Continuation probability for an expected horizon in timesteps."""
    if tau < 1.0:
        raise ValueError(f"tau must be >= 1, got {tau}")
    return 1.0 - 1.0 / tau


@dataclass(frozen=True)
class Timescale:
    """A (gamma, tau) pair kept consistent under tau = 1/(1-gamma)."""

    gamma: float
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.tau < 1.0:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        expected = 1.0 / (1.0 - self.gamma)
        if abs(self.tau - expected) > _REL_TOL * max(abs(expected), 1.0):
            raise ValueError(
                f"inconsistent pair: gamma={self.gamma} implies tau={expected}, got {self.tau}"
            )

    @classmethod
    def from_gamma(cls, gamma: float) -> "Timescale":
        return cls(float(gamma), gamma_to_tau(float(gamma)))

    @classmethod
    def from_tau(cls, tau: float) -> "Timescale":
        return cls(tau_to_gamma(float(tau)), float(tau))


class TimescaleInput(enum.Enum):
    """Which scalars describe the timescale at the learner's input."""

    GAMMA_ONLY = "gamma"
    TAU_ONLY = "tau"
    BOTH = "both"


@dataclass(frozen=True)
class TimescaleInputMode:
    kind: TimescaleInput = TimescaleInput.BOTH
    tau_max: float = 100.0

    def __post_init__(self):
        if self.tau_max < 1.0:
            raise ValueError(f"tau_max must be >= 1, got {self.tau_max}")

    @property
    def n_inputs(self) -> int:
        return 2 if self.kind is TimescaleInput.BOTH else 1


def encode_timescale_input(ts: Timescale, mode: TimescaleInputMode) -> np.ndarray:
    """Encode a timescale as 1-2 scalars in [0, 1] for learner input."""
    if mode.kind is not TimescaleInput.GAMMA_ONLY and ts.tau > mode.tau_max:
        raise ValueError(f"tau={ts.tau} exceeds tau_max={mode.tau_max}")
    if mode.kind is TimescaleInput.GAMMA_ONLY:
        return np.array([ts.gamma])
    if mode.kind is TimescaleInput.TAU_ONLY:
        return np.array([ts.tau / mode.tau_max])
    return np.array([ts.gamma, ts.tau / mode.tau_max])


@dataclass(frozen=True)
class TimescaleSetSpec:
    """Recipe for a per-step training set of timescales.

    The set always contains `always_include` (typically the tau bounds)
    plus `n_gamma_uniform` draws uniform in gamma and `n_tau_uniform`
    draws uniform in tau.  Duplicates are permitted; the TD update
    simply counts a repeated timescale twice.
    """

    always_include: tuple[Timescale, ...] = ()
    n_gamma_uniform: int = 0
    n_tau_uniform: int = 0
    gamma_range: tuple[float, float] = (0.0, 0.99)
    tau_range: tuple[float, float] = (1.0, 100.0)
    tau_integer: bool = False

    def __post_init__(self):
        if self.n_gamma_uniform < 0 or self.n_tau_uniform < 0:
            raise ValueError("sample counts must be non-negative")
        if self.n_gamma_uniform > 0:
            lo, hi = self.gamma_range
            if not (0.0 <= lo < hi <= 1.0) or hi > 1.0:
                raise ValueError(f"invalid gamma_range {self.gamma_range}")
        if self.n_tau_uniform > 0:
            lo, hi = self.tau_range
            if not (1.0 <= lo < hi):
                raise ValueError(f"invalid tau_range {self.tau_range}")
            if self.tau_integer and int(lo) >= int(hi):
                raise ValueError(
                    f"tau_range {self.tau_range} holds no integer to draw"
                )

    @property
    def size(self) -> int:
        return len(self.always_include) + self.n_gamma_uniform + self.n_tau_uniform


def sample_training_set(
    spec: TimescaleSetSpec, rng: np.random.Generator
) -> list[Timescale]:
    """Draw one training set of timescales. Deterministic under the rng seed."""
    out = list(spec.always_include)
    if spec.n_gamma_uniform > 0:
        lo, hi = spec.gamma_range
        for g in rng.uniform(lo, hi, size=spec.n_gamma_uniform):
            out.append(Timescale.from_gamma(g))
    if spec.n_tau_uniform > 0:
        lo, hi = spec.tau_range
        if spec.tau_integer:
            draws = rng.integers(int(np.ceil(lo)), int(hi), size=spec.n_tau_uniform)
        else:
            draws = rng.uniform(lo, hi, size=spec.n_tau_uniform)
        for t in draws:
            out.append(Timescale.from_tau(float(t)))
    return out
