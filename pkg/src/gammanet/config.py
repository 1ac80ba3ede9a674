"""Declarative experiment configuration (TOML) with strict validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .timescale import (
    Timescale,
    TimescaleInput,
    TimescaleInputMode,
    TimescaleSetSpec,
)


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "experiment": {
        "name", "kind", "seeds", "steps", "out_dir", "checkpoint_interval",
    },
    "environment": {
        "period", "transition_matrix", "cumulants", "terminals",
        "start_state", "path",
    },
    "learner": {
        "family", "loss_scaling", "input_mode", "tau_max", "step_size",
        "divide_by_active", "decay_to_zero", "tilings", "index_space",
        "bias", "layer_sizes", "embedding", "embed_size",
        "embed_activation", "learning_rate", "batch_size", "n_step",
        "replay_capacity", "min_history", "sync_interval", "train_every",
        "scaled_init",
    },
    "timescales": {
        "always_tau", "n_gamma", "n_tau", "gamma_range", "tau_range",
        "tau_integer",
    },
    "evaluation": {
        "probes", "points_stride", "mc_horizon",
    },
}

_KINDS = ("squarewave", "mdp", "trace")
_FAMILIES = ("linear", "deep")
_INPUT_MODES = {"gamma": TimescaleInput.GAMMA_ONLY,
                "tau": TimescaleInput.TAU_ONLY,
                "both": TimescaleInput.BOTH}


@dataclass
class ExperimentConfig:
    raw: dict
    path: str = ""

    # -- experiment --------------------------------------------------------
    @property
    def name(self) -> str:
        return self.raw["experiment"].get("name", "experiment")

    @property
    def kind(self) -> str:
        return self.raw["experiment"]["kind"]

    @property
    def seeds(self) -> list[int]:
        return [int(s) for s in self.raw["experiment"].get("seeds", [0])]

    @property
    def steps(self) -> int:
        return int(self.raw["experiment"].get("steps", 50_000))

    @property
    def out_dir(self) -> str:
        return self.raw["experiment"].get("out_dir", "out")

    @property
    def checkpoint_interval(self) -> int:
        return int(self.raw["experiment"].get("checkpoint_interval", 0))

    # -- sections ----------------------------------------------------------
    @property
    def environment(self) -> dict:
        return self.raw.get("environment", {})

    @property
    def learner(self) -> dict:
        return self.raw.get("learner", {})

    @property
    def evaluation(self) -> dict:
        return self.raw.get("evaluation", {})

    @property
    def family(self) -> str:
        return self.learner.get("family", "linear")

    @property
    def loss_scaling(self) -> bool:
        return bool(self.learner.get("loss_scaling", True))

    def input_mode(self) -> TimescaleInputMode:
        return TimescaleInputMode(
            _INPUT_MODES[self.learner.get("input_mode", "both")],
            float(self.learner.get("tau_max", 100.0)),
        )

    def timescale_set_spec(self) -> TimescaleSetSpec:
        ts = self.raw.get("timescales", {})
        return TimescaleSetSpec(
            always_include=tuple(
                Timescale.from_tau(float(t)) for t in ts.get("always_tau", [1, 100])
            ),
            n_gamma_uniform=int(ts.get("n_gamma", 2)),
            n_tau_uniform=int(ts.get("n_tau", 2)),
            gamma_range=tuple(ts.get("gamma_range", (0.0, 0.99))),
            tau_range=tuple(ts.get("tau_range", (1.0, 100.0))),
            tau_integer=bool(ts.get("tau_integer", False)),
        )

    def probe_taus(self) -> list[float]:
        from .evaluation import DEFAULT_PROBE_TAUS

        return [float(t) for t in self.evaluation.get("probes", DEFAULT_PROBE_TAUS)]

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def validate(raw: dict, path: str = "") -> ExperimentConfig:
    for section, table in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in table:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown field {key!r} in [{section}]")
    if "experiment" not in raw or "kind" not in raw["experiment"]:
        raise ConfigError("missing required field 'kind' in [experiment]")
    cfg = ExperimentConfig(raw, path)
    if cfg.kind not in _KINDS:
        raise ConfigError(f"experiment.kind must be one of {_KINDS}, got {cfg.kind!r}")
    if cfg.family not in _FAMILIES:
        raise ConfigError(f"learner.family must be one of {_FAMILIES}, got {cfg.family!r}")
    mode = cfg.learner.get("input_mode", "both")
    if mode not in _INPUT_MODES:
        raise ConfigError(f"learner.input_mode must be one of {sorted(_INPUT_MODES)}")
    if cfg.kind == "mdp" and "transition_matrix" not in cfg.environment:
        raise ConfigError("mdp experiments need environment.transition_matrix")
    if cfg.kind == "trace" and "path" not in cfg.environment:
        raise ConfigError("trace experiments need environment.path")
    # construct derived objects now so bad values fail at validation time
    cfg.input_mode()
    cfg.timescale_set_spec()
    probes = cfg.probe_taus()
    if any(t < 1 for t in probes) or sorted(probes) != probes:
        raise ConfigError("evaluation.probes must be increasing and >= 1")
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return validate(raw, str(path))
