import pytest

from gammanet.config import ConfigError, load_config, validate
from gammanet.timescale import TimescaleInput

MINIMAL = """
[experiment]
kind = "squarewave"
"""

FULL = """
[experiment]
name = "demo"
kind = "mdp"
seeds = [3, 4]
steps = 1234
out_dir = "results"

[environment]
transition_matrix = [[0.0, 1.0], [1.0, 0.0]]
cumulants = [[0.0, 1.0], [-1.0, 0.0]]

[learner]
family = "linear"
input_mode = "gamma"
loss_scaling = false
step_size = 0.05

[timescales]
always_tau = [1, 50]
n_gamma = 3
n_tau = 0

[evaluation]
probes = [1.0, 10.0, 100.0]
"""


def write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_defaults(tmp_path):
    cfg = load_config(write(tmp_path, MINIMAL))
    assert cfg.name == "experiment"
    assert cfg.kind == "squarewave"
    assert cfg.seeds == [0]
    assert cfg.steps == 50_000
    assert cfg.family == "linear"
    assert cfg.loss_scaling
    assert cfg.input_mode().kind is TimescaleInput.BOTH
    spec = cfg.timescale_set_spec()
    assert spec.size == 6
    assert cfg.probe_taus()[0] == 1.0 and cfg.probe_taus()[-1] == 100.0


def test_full_config(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    assert cfg.name == "demo" and cfg.kind == "mdp"
    assert cfg.seeds == [3, 4] and cfg.steps == 1234
    assert cfg.out_dir == "results"
    assert not cfg.loss_scaling
    assert cfg.input_mode().kind is TimescaleInput.GAMMA_ONLY
    spec = cfg.timescale_set_spec()
    assert spec.size == 5  # 2 fixed + 3 gamma draws
    assert cfg.probe_taus() == [1.0, 10.0, 100.0]


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(write(tmp_path, MINIMAL + "\n[mystery]\nx = 1\n"))


def test_unknown_field_rejected(tmp_path):
    text = MINIMAL.replace('kind = "squarewave"',
                           'kind = "squarewave"\ncolor = "red"')
    with pytest.raises(ConfigError, match="'color'"):
        load_config(write(tmp_path, text))


def test_missing_kind():
    with pytest.raises(ConfigError, match="kind"):
        validate({"experiment": {"name": "x"}})


def test_bad_enums():
    with pytest.raises(ConfigError, match="experiment.kind"):
        validate({"experiment": {"kind": "maze"}})
    with pytest.raises(ConfigError, match="learner.family"):
        validate({"experiment": {"kind": "squarewave"},
                  "learner": {"family": "forest"}})
    with pytest.raises(ConfigError, match="input_mode"):
        validate({"experiment": {"kind": "squarewave"},
                  "learner": {"input_mode": "sideways"}})


def test_kind_specific_requirements():
    with pytest.raises(ConfigError, match="transition_matrix"):
        validate({"experiment": {"kind": "mdp"}})
    with pytest.raises(ConfigError, match="path"):
        validate({"experiment": {"kind": "trace"}})


def test_probe_ordering_enforced():
    with pytest.raises(ConfigError, match="probes"):
        validate({"experiment": {"kind": "squarewave"},
                  "evaluation": {"probes": [10.0, 5.0]}})
    with pytest.raises(ConfigError, match="probes"):
        validate({"experiment": {"kind": "squarewave"},
                  "evaluation": {"probes": [0.5, 5.0]}})


def test_config_hash_stability(tmp_path):
    a = load_config(write(tmp_path, FULL, "a.toml"))
    b = load_config(write(tmp_path, FULL, "b.toml"))
    assert a.config_hash() == b.config_hash()
    assert len(a.config_hash()) == 12
    c = load_config(write(tmp_path, FULL.replace("1234", "1235"), "c.toml"))
    assert c.config_hash() != a.config_hash()
