"""Ground-truth return oracles, metrics, probes and composition helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environments import FiniteMDPEnv
from .linear import run_online
from .timescale import Timescale, gamma_to_tau

DEFAULT_PROBE_TAUS = (1.0, 2.0, 5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0)

METRICS_CSV_COLUMNS = ("series", "tau", "mse_mean", "mse_var",
                       "norm_mse", "norm_var", "corr")


def default_probes() -> list[Timescale]:
    return [Timescale.from_tau(t) for t in DEFAULT_PROBE_TAUS]


def true_return_periodic(signal: np.ndarray, phase: int, gamma: float) -> float:
    """Exact infinite discounted return of a deterministic periodic signal.

    `signal[p]` is the cumulant observed on arriving at phase p; the
    return from `phase` starts at the next arrival.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    signal = np.asarray(signal, dtype=float)
    period = len(signal)
    ks = np.arange(period)
    one_period = float(np.sum(gamma**ks * signal[(phase + 1 + ks) % period]))
    return one_period / (1.0 - gamma**period)


def analytic_mdp_values(env: FiniteMDPEnv, gamma: float) -> np.ndarray:
    """Exact state values by solving the Bellman linear system."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    P = env.P.copy()
    r_bar = env.expected_cumulant().copy()
    # A terminal arrival ends the return: no value flows out of terminals.
    for t in env.terminals:
        P[t, :] = 0.0
        r_bar[t] = 0.0
    n = env.n_states
    v = np.linalg.solve(np.eye(n) - gamma * P, r_bar)
    residual = np.max(np.abs((np.eye(n) - gamma * P) @ v - r_bar))
    if residual > 1e-10:
        raise RuntimeError(f"Bellman solve residual {residual} too large")
    return v


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    truncation_bias_bound: float
    n_rollouts: int


def monte_carlo_return(env: FiniteMDPEnv, state: int, gamma: float,
                       n_rollouts: int, horizon: int,
                       rng: np.random.Generator) -> MonteCarloEstimate:
    """Mean discounted return over rollouts from a state of a finite chain."""
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    returns = np.empty(n_rollouts)
    max_c = float(np.max(np.abs(env.cumulants)))
    for r in range(n_rollouts):
        sim = env.clone_at(state, rng)
        total, disc = 0.0, 1.0
        for _ in range(horizon):
            tr = sim.step()
            total += disc * tr.cumulant
            if tr.terminal:
                break
            disc *= gamma
        returns[r] = total
    se = float(returns.std(ddof=1) / math.sqrt(n_rollouts)) if n_rollouts > 1 else 0.0
    bias = gamma**horizon * max_c / (1.0 - gamma) if gamma < 1.0 else float("inf")
    return MonteCarloEstimate(float(returns.mean()), se, bias, n_rollouts)


@dataclass
class MetricsReport:
    """Per-(series, tau) error table plus per-series bar summaries."""

    rows: list[dict] = field(default_factory=list)
    bars: dict = field(default_factory=dict)  # series -> (avg_norm_mse, avg_norm_var)
    meta: dict = field(default_factory=dict)

    def series_names(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r["series"] not in seen:
                seen.append(r["series"])
        return seen

    def taus(self) -> list[float]:
        return sorted({r["tau"] for r in self.rows})

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(METRICS_CSV_COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(_fmt(r[c]) for c in METRICS_CSV_COLUMNS) + "\n")

    @classmethod
    def read_csv(cls, path) -> "MetricsReport":
        rows = []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != METRICS_CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected metrics header {header}")
            for line in fh:
                vals = line.strip().split(",")
                row = dict(zip(METRICS_CSV_COLUMNS, vals))
                for k in METRICS_CSV_COLUMNS[1:]:
                    row[k] = float(row[k]) if row[k] != "nan" else float("nan")
                rows.append(row)
        report = cls(rows=rows)
        report.bars = _bars_from_rows(rows)
        return report


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(float(v)) if isinstance(v, float) else str(v)


def _bars_from_rows(rows) -> dict:
    by_series: dict[str, list[dict]] = {}
    for r in rows:
        by_series.setdefault(r["series"], []).append(r)
    return {
        s: (float(np.mean([r["norm_mse"] for r in rs])),
            float(np.mean([r["norm_var"] for r in rs])))
        for s, rs in by_series.items()
    }


def normalized_mse(table: dict, corr: dict | None = None,
                   meta: dict | None = None) -> MetricsReport:
    """Normalize per-tau errors by the largest mean across series.

    `table` maps series -> {tau: (mse_mean, mse_var)}; every series must
    cover the same taus.  When the maximum mean (or variance) at a tau
    is zero all series report 0 there.
    """
    if not table:
        raise ValueError("at least one series is required")
    series_names = list(table.keys())
    taus = sorted(table[series_names[0]].keys())
    for s in series_names:
        if sorted(table[s].keys()) != taus:
            raise ValueError(f"series {s!r} does not share the probe set")
    rows = []
    for tau in taus:
        max_mean = max(table[s][tau][0] for s in series_names)
        max_var = max(table[s][tau][1] for s in series_names)
        for s in series_names:
            mean, var = table[s][tau]
            rows.append({
                "series": s,
                "tau": float(tau),
                "mse_mean": float(mean),
                "mse_var": float(var),
                "norm_mse": float(mean / max_mean) if max_mean > 0 else 0.0,
                "norm_var": float(var / max_var) if max_var > 0 else 0.0,
                "corr": float(corr[s].get(tau, float("nan"))) if corr else float("nan"),
            })
    report = MetricsReport(rows=rows, meta=meta or {})
    report.bars = _bars_from_rows(rows)
    return report


def prediction_correlation(expected, predicted) -> float:
    """Pearson correlation; NaN when either side has zero variance."""
    expected = np.asarray(expected, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if len(expected) != len(predicted):
        raise ValueError("sequences must have equal length")
    if len(expected) < 2:
        raise ValueError("need at least two points")
    if expected.std() == 0.0 or predicted.std() == 0.0:
        # A constant output can minimize MSE while not being predictive.
        return float("nan")
    return float(np.corrcoef(expected, predicted)[0, 1])


def interpolate_prediction(probe_values, query: Timescale,
                           scale: str = "tau") -> float:
    """Linear interpolation between the bracketing probe predictions.

    `probe_values` is a sequence of (Timescale, value).  The weight is
    computed in gamma or tau coordinates as selected; an exact probe hit
    returns that probe's value.
    """
    if scale not in ("tau", "gamma"):
        raise ValueError(f"unknown interpolation scale {scale!r}")
    pairs = sorted(probe_values, key=lambda p: p[0].tau)
    taus = [p[0].tau for p in pairs]
    if not taus:
        raise ValueError("no probes given")
    if query.tau < taus[0] - 1e-12 or query.tau > taus[-1] + 1e-12:
        raise ValueError(
            f"tau={query.tau} outside probe range [{taus[0]}, {taus[-1]}]"
        )
    for ts, v in pairs:
        if abs(ts.tau - query.tau) <= 1e-12:
            return v
    hi = next(i for i, t in enumerate(taus) if t > query.tau)
    (ts_lo, v_lo), (ts_hi, v_hi) = pairs[hi - 1], pairs[hi]
    if scale == "tau":
        lam = (query.tau - ts_lo.tau) / (ts_hi.tau - ts_lo.tau)
    else:
        lam = (query.gamma - ts_lo.gamma) / (ts_hi.gamma - ts_lo.gamma)
    return (1.0 - lam) * v_lo + lam * v_hi


def compose_difference_return(gamma_long: float, v_long: float,
                              gamma_short: float, v_short: float) -> float:
    """Band return formed by differencing two geometric-return estimates."""
    if gamma_long < gamma_short:
        raise ValueError(
            f"gamma_long={gamma_long} must be >= gamma_short={gamma_short}"
        )
    return v_long - v_short


@dataclass
class ProbeSuite:
    baselines: dict  # tau -> FixedBaseline
    trained: bool


def train_probe_suite(probes, baseline_factory, env_factory,
                      n_steps: int, decay_to_zero: bool = False) -> ProbeSuite:
    """Train one fixed-timescale baseline per probe on fresh environments."""
    baselines = {}
    for ts in probes:
        baseline = baseline_factory(ts)
        if n_steps > 0:
            rng = np.random.default_rng(0)  # baseline has no sampling; unused
            run_online(baseline, env_factory(), n_steps, None, rng,
                       decay_to_zero=decay_to_zero)
        baselines[ts.tau] = baseline
    return ProbeSuite(baselines=baselines, trained=n_steps > 0)
