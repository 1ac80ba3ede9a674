"""Render gammanet CSV outputs into the standard figure styles.

This package is a pure view layer: it consumes the CSV schemas emitted
by the gammanet experiment runner (metrics, prediction dumps, learning
curves) and never recomputes metrics.  Five figure kinds are supported:

    mse_by_tau        normalized MSE per probe timescale, dual x-axes
                      split at tau=10, min/max shading across input files
    bar               averaged normalized MSE and variance per series
    correlation       prediction/true-return correlation per probe
    learning_curve    MSE over training steps, one line per timescale
    prediction_trace  predictions vs the true return at each eval point

Rendering is deterministic for fixed inputs (no timestamps in the image
content).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# schemas owned by the experiment runner; duplicated here on purpose so
# this package has no import dependency on it
METRICS_COLUMNS = ("series", "tau", "mse_mean", "mse_var",
                   "norm_mse", "norm_var", "corr")
PREDICTIONS_COLUMNS = ("series", "tau", "point", "prediction", "true_return")
LEARNING_CURVE_COLUMNS = ("series", "step", "tau", "mse")

KINDS = ("mse_by_tau", "bar", "correlation", "learning_curve",
         "prediction_trace")

plt.rcParams["svg.hashsalt"] = "gammanet-plots"

__version__ = "0.1.0"


class PlotError(ValueError):
    pass


@dataclass
class PlotSpec:
    kind: str
    inputs: list
    output: str
    split_tau: float = 10.0
    rescale: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; "
                            f"choose from {', '.join(KINDS)}")
        if not self.inputs:
            raise PlotError("at least one input CSV is required")


def read_table(path, columns) -> dict:
    """Load a CSV with the given schema into column arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotError(f"{path}: empty CSV") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise PlotError(
                f"{path}: missing columns: {', '.join(missing)} "
                f"(found {', '.join(header)})"
            )
        idx = {c: header.index(c) for c in columns}
        rows = [[row[idx[c]] for c in columns] for row in reader]
    if not rows:
        raise PlotError(f"{path}: CSV has a header but no rows")
    out = {}
    for j, c in enumerate(columns):
        vals = [r[j] for r in rows]
        if c in ("series",):
            out[c] = np.array(vals, dtype=object)
        else:
            out[c] = np.array([float(v) for v in vals])
    return out


def _series_tau_stats(tables, value_col):
    """Mean/min/max of a column per (series, tau) across the input files."""
    acc: dict[tuple, list] = {}
    for t in tables:
        for s, tau, v in zip(t["series"], t["tau"], t[value_col]):
            acc.setdefault((s, float(tau)), []).append(float(v))
    series_names = []
    for t in tables:
        for s in t["series"]:
            if s not in series_names:
                series_names.append(s)
    taus = sorted({k[1] for k in acc})
    stats = {}
    for s in series_names:
        vals = np.array([acc[(s, tau)] for tau in taus if (s, tau) in acc])
        cov = [tau for tau in taus if (s, tau) in acc]
        stats[s] = (np.array(cov), vals.mean(axis=1), vals.min(axis=1),
                    vals.max(axis=1))
    return series_names, taus, stats


def _split_axes(fig, taus, split):
    if not (min(taus) <= split <= max(taus)):
        raise PlotError(
            f"split tau {split} outside the probe range "
            f"[{min(taus)}, {max(taus)}]"
        )
    left, right = fig.subplots(1, 2, sharey=True,
                               gridspec_kw={"wspace": 0.0})
    left.set_xlim(min(taus), split)
    right.set_xlim(split, max(taus))
    right.tick_params(left=False)
    left.axvline(split, color="black", linewidth=1.2)
    left.set_xlabel("timescale (short)")
    right.set_xlabel("timescale (long)")
    return left, right


def _plot_split_series(left, right, taus, mean, lo, hi, label, color=None):
    for ax in (left, right):
        line, = ax.plot(taus, mean, label=label, color=color)
        ax.fill_between(taus, lo, hi, alpha=0.25, color=line.get_color())
        color = line.get_color()
    return color


def build_figure(spec: PlotSpec):
    """Assemble the matplotlib figure for a spec without saving it."""
    if spec.kind in ("mse_by_tau", "bar", "correlation"):
        tables = [read_table(p, METRICS_COLUMNS) for p in spec.inputs]
    elif spec.kind == "learning_curve":
        tables = [read_table(p, LEARNING_CURVE_COLUMNS) for p in spec.inputs]
    else:
        tables = [read_table(p, PREDICTIONS_COLUMNS) for p in spec.inputs]

    fig = plt.figure(figsize=(8, 4.5))

    if spec.kind == "mse_by_tau":
        names, taus, stats = _series_tau_stats(tables, "norm_mse")
        left, right = _split_axes(fig, taus, spec.split_tau)
        for s in names:
            cov, mean, lo, hi = stats[s]
            _plot_split_series(left, right, cov, mean, lo, hi, s)
        left.set_ylabel("normalized MSE")
        right.legend(loc="upper right")

    elif spec.kind == "correlation":
        names, taus, stats = _series_tau_stats(tables, "corr")
        left, right = _split_axes(fig, taus, spec.split_tau)
        for s in names:
            cov, mean, lo, hi = stats[s]
            _plot_split_series(left, right, cov, mean, lo, hi, s)
        left.set_ylabel("correlation with true return")
        right.legend(loc="lower right")

    elif spec.kind == "bar":
        names, _, mse_stats = _series_tau_stats(tables, "norm_mse")
        _, _, var_stats = _series_tau_stats(tables, "norm_var")
        ax = fig.subplots()
        x = np.arange(len(names))
        width = 0.38
        avg_mse = [mse_stats[s][1].mean() for s in names]
        avg_var = [var_stats[s][1].mean() for s in names]
        ax.bar(x - width / 2, avg_mse, width, label="avg normalized MSE")
        ax.bar(x + width / 2, avg_var, width, label="avg normalized variance")
        ax.set_xticks(x)
        ax.set_xticklabels(names)
        ax.legend()

    elif spec.kind == "learning_curve":
        acc: dict[tuple, dict] = {}
        for t in tables:
            for s, step, tau, v in zip(t["series"], t["step"], t["tau"],
                                       t["mse"]):
                acc.setdefault((s, float(tau)), {}).setdefault(
                    float(step), []).append(float(v))
        ax = fig.subplots()
        for (s, tau), by_step in sorted(acc.items(), key=lambda k: k[0][1]):
            steps = np.array(sorted(by_step))
            vals = [by_step[st] for st in steps]
            mean = np.array([np.mean(v) for v in vals])
            lo = np.array([np.min(v) for v in vals])
            hi = np.array([np.max(v) for v in vals])
            line, = ax.plot(steps, mean, label=f"{s} tau={tau:g}")
            ax.fill_between(steps, lo, hi, alpha=0.25,
                            color=line.get_color())
        ax.set_xlabel("environment steps")
        ax.set_ylabel("MSE")
        ax.legend()

    else:  # prediction_trace
        ax = fig.subplots()
        for t in tables:
            keys = []
            for s, tau in zip(t["series"], t["tau"]):
                if (s, float(tau)) not in keys:
                    keys.append((s, float(tau)))
            for s, tau in keys:
                mask = (t["series"] == s) & (t["tau"] == tau)
                order = np.argsort(t["point"][mask])
                pts = t["point"][mask][order]
                pred = t["prediction"][mask][order]
                truth = t["true_return"][mask][order]
                if spec.rescale:
                    # display values as scaled returns: multiply by
                    # (1 - gamma) = 1/tau so all horizons share one axis
                    pred = pred * (1.0 / tau)
                    truth = truth * (1.0 / tau)
                line, = ax.plot(pts, pred, label=f"{s} tau={tau:g}")
                ax.plot(pts, truth, linestyle="--", linewidth=0.9,
                        color=line.get_color())
        ax.set_xlabel("evaluation point")
        ax.set_ylabel("scaled prediction" if spec.rescale else "prediction")
        ax.legend(fontsize="small")

    return fig


def render(spec: PlotSpec) -> str:
    """Render a spec to its output image and return the output path."""
    fig = build_figure(spec)
    try:
        metadata = {"Software": None} if str(spec.output).endswith(".png") \
            else {"Date": None}
        fig.savefig(spec.output, metadata=metadata)
    finally:
        plt.close(fig)
    return str(spec.output)
