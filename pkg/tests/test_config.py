# -*- coding: utf-8 -*-

import logging
import os

import pytest
import yaml

from config.config_manager import ConfigManager
from config.presets import DEFAULTS, deep_merge, get_preset, preset_names
from config.run_config import ConfigError, parse_run_config


def test_defaults_parse():
    config = parse_run_config({})
    assert config.method == "nitsche"
    assert config.name == "nitsche-dirichlet-heat"
    assert config.tree["run"]["name"] == config.name
    assert config.grid().count == 100
    assert config.sampler(3).n_interior == 1800
    assert config.training.initial().epochs == 50000
    assert config.penalty.safety_factor == 500.0


@pytest.mark.parametrize("name", preset_names())
def test_presets_parse(name):
    config = parse_run_config(get_preset(name))
    assert config.name == name
    assert config.dims


def test_desk_presets():
    table1 = parse_run_config(get_preset("table1-desk"))
    assert table1.dims == (2, 3)
    assert (table1.width, table1.blocks, table1.tau) == (20, 2, 0.05)
    assert table1.training.step().epochs == 400
    assert (table1.penalty.mode, table1.penalty.grad_floor) == ("pointwise", 0.25)

    table3 = parse_run_config(get_preset("table3-desk"))
    assert table3.method == "jko"
    assert table3.dims == (2, 10)
    assert table3.problem(10).domain.dim == 10
    assert not table3.sampler(2).fresh
    jko = table3.jko_config(2)
    assert (jko.entropy_normalization, jko.mass_weight) == ("raw", 10.0)


def test_dgm_architecture_includes_time():
    config = parse_run_config({"run": {"method": "dgm"}})
    assert config.architecture(3).input_dim == 4
    assert config.dgm_config(3).n_interior == 600 * 4


def test_horizon_reaches_problem():
    config = parse_run_config({"problem": {"T": 0.5, "tau": 0.1}})
    assert config.problem(2).horizon == 0.5
    assert config.grid().count == 5


@pytest.mark.parametrize(
    "tree, key",
    [
        ({"problem": {"tau": -0.1}}, "problem.tau"),
        ({"problem": {"T": 1.0, "tau": 0.3}}, "problem.tau"),
        ({"problem": {"dims": [2, 0]}}, "problem.dims[1]"),
        ({"problem": {"flavor": "wave"}}, "problem.flavor"),
        ({"run": {"method": "jko"}}, "problem.flavor"),
        ({"network": {"width": 0}}, "network.width"),
        ({"network": {"activation": "gelu"}}, "network.activation"),
        ({"training": {"step_schedule": [[1, -1e-3]]}}, "training.step_schedule"),
        ({"training": {"initial_epochs": 1.5}}, "training.initial_epochs"),
        ({"sampling": {"fresh": "yes"}}, "sampling.fresh"),
        ({"penalty": {"mode": "mean"}}, "penalty.mode"),
        ({"penalty": {"grad_floor": -0.5}}, "penalty.grad_floor"),
        ({"jko": {"mass_weight": -1.0}}, "jko.mass_weight"),
        ({"network": {"depth": 3}}, "network.depth"),
        ({"optimizer": {}}, "optimizer"),
    ],
)
def test_errors_name_the_key(tree, key):
    with pytest.raises(ConfigError) as info:
        parse_run_config(tree)
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_scalar_schedule_is_constant():
    config = parse_run_config({"training": {"step_schedule": 0.01}})
    assert config.training.step().schedule.to_list() == [[1, 0.01]]


def test_penalty_ignored_for_other_methods(caplog):
    tree = {"run": {"method": "dgm"}, "penalty": {"mode": "pointwise"}}
    with caplog.at_level(logging.WARNING, logger="training"):
        parse_run_config(tree)
    assert any("penalty" in r.getMessage() for r in caplog.records)


def test_unknown_preset():
    with pytest.raises(ConfigError) as info:
        get_preset("table9")
    assert info.value.key == "preset"


def test_deep_merge_does_not_mutate():
    merged = deep_merge(DEFAULTS, {"problem": {"dims": [5]}})
    assert merged["problem"]["dims"] == [5]
    assert merged["problem"]["T"] == 1.0
    assert DEFAULTS["problem"]["dims"] == [2]


def test_config_manager_reads_sets_and_saves(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("problem:\n  dims: [2, 3]\nrun:\n  seed: 4\n", encoding="utf-8")
    manager = ConfigManager(str(path))
    assert manager.get("problem.dims") == [2, 3]
    assert manager.get("problem.missing", "x") == "x"

    manager.set("run.seed", 9)
    manager.set("evaluation.n_test", 10)
    out = tmp_path / "saved.yaml"
    manager.save(str(out))
    saved = yaml.safe_load(out.read_text(encoding="utf-8"))
    assert saved["run"]["seed"] == 9
    assert saved["evaluation"]["n_test"] == 10


def test_config_manager_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        ConfigManager(str(tmp_path / "absent.yaml"))
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(yaml.YAMLError):
        ConfigManager(str(bad))


def test_shipped_config_file_parses():
    with open(os.path.join(os.path.dirname(__file__), "..", "config.yaml"), "r", encoding="utf-8") as file:
        tree = yaml.safe_load(file)
    assert parse_run_config(tree).name == "nitsche-dirichlet-heat"
