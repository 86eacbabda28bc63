import pytest

from data_models import ScheduleKind
from errors import ConfigError
from run_config import ScheduleConfig, load_config, solver_specs


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_with_defaults(tmp_path):
    cfg = load_config(write(tmp_path, "instance:\n  name: abs_square\nsolver:\n  name: prox_linear\n"))
    assert cfg.instance.name == "abs_square"
    assert cfg.instance.beta_scale == 1.0
    assert cfg.solver.max_outer == 100
    assert cfg.output.timing is False
    assert cfg.verify.t_factors == [1.0, 0.5]


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "instance:\n  name: lad\n  colour: red\n"))


def test_wrong_type(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "instance:\n  name: lad\nsolver:\n  name: accelerated\n  N: many\n"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.yaml"))


def test_overrides(tmp_path):
    text = ("instance:\n  name: lad\n  seed: 1\n"
            "solvers:\n  - name: accelerated\n    seed: 1\n  - name: prox_linear\n")
    cfg = load_config(write(tmp_path, text), seed=7, out="elsewhere.csv")
    assert cfg.instance.seed == 7
    assert [spec.seed for spec in cfg.solvers] == [7, 7]
    assert cfg.output.path == "elsewhere.csv"


def test_solver_specs(tmp_path):
    text = "instance:\n  name: lad\nsolver:\n  name: accelerated\nsolvers:\n  - name: prox_linear\n"
    names = [spec.name for spec in solver_specs(load_config(write(tmp_path, text)))]
    assert names == ["accelerated", "prox_linear"]
    with pytest.raises(ConfigError):
        solver_specs(load_config(write(tmp_path, "instance:\n  name: lad\n", "empty.yaml")))


def test_schedule_config():
    schedule = ScheduleConfig(kind="power_law", scale=1.0, q=3.0).build()
    assert schedule.kind == ScheduleKind.POWER_LAW
    assert schedule.eps(2) == pytest.approx(1 / 16)
    with pytest.raises(ConfigError):
        ScheduleConfig(kind="geometric").build()
