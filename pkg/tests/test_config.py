"""Strict config validation and resolution to engine inputs."""

import json

import numpy as np
import pytest

from dtwa_quench.config import ConfigError, load_json, resolve_run_config


def _base(**overrides):
    cfg = {
        "model": "ising",
        "lattice": {"nx": 2, "ny": 3},
        "alpha": 1.0,
        "sample_times": [0.1, 0.2],
        "n_t": 16,
        "master_seed": 1,
    }
    cfg.update(overrides)
    return cfg


def test_load_json_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_json(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_json(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="must be a JSON object"):
        load_json(arr)


def test_unknown_key_named_at_root():
    with pytest.raises(ConfigError) as err:
        resolve_run_config(_base(typo=1), "dtwa")
    assert err.value.key == "typo"
    assert "typo" in str(err.value)


def test_unknown_key_named_in_nested_section():
    cfg = _base(
        observables={"correlations": {"reference": "center", "axis": "y", "oops": 2}}
    )
    with pytest.raises(ConfigError) as err:
        resolve_run_config(cfg, "dtwa")
    assert err.value.key == "observables.correlations.oops"


def test_error_record_is_machine_readable():
    try:
        resolve_run_config(_base(alpha="one"), "dtwa")
    except ConfigError as err:
        rec = err.record()
        json.dumps(rec)
        assert rec["type"] == "config"
        assert rec["key"] == "alpha"
    else:
        pytest.fail("expected ConfigError")


def test_type_checks_reject_bool_as_number():
    with pytest.raises(ConfigError):
        resolve_run_config(_base(alpha=True), "dtwa")
    with pytest.raises(ConfigError):
        resolve_run_config(_base(n_t=2.5), "dtwa")


def test_missing_required_keys():
    cfg = _base()
    del cfg["model"]
    with pytest.raises(ConfigError, match="model"):
        resolve_run_config(cfg, "dtwa")
    cfg = _base()
    del cfg["n_t"]
    with pytest.raises(ConfigError, match="n_t"):
        resolve_run_config(cfg, "dtwa")


def test_mc_keys_optional_for_oracle_runs():
    cfg = _base()
    del cfg["n_t"]
    del cfg["master_seed"]
    resolved = resolve_run_config(cfg, "oracle-ising")
    assert resolved.run.n_t == 1


def test_oracle_ising_requires_ising_model():
    with pytest.raises(ConfigError, match="ising"):
        resolve_run_config(_base(model="xy"), "oracle-ising")


def test_times_as_explicit_list():
    resolved = resolve_run_config(_base(sample_times=[0.0, 0.5, 1.0]), "dtwa")
    assert np.array_equal(resolved.times_tj, [0.0, 0.5, 1.0])


def test_times_stop_step_grid():
    resolved = resolve_run_config(
        _base(sample_times={"stop": 1.0, "step": 0.25}), "dtwa"
    )
    assert np.allclose(resolved.times_tj, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_times_stop_num_grid():
    resolved = resolve_run_config(_base(sample_times={"stop": 2.0, "num": 5}), "dtwa")
    assert np.allclose(resolved.times_tj, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_times_validation():
    for bad in (
        [],
        [0.2, 0.1],
        [-0.1, 0.2],
        {"stop": 1.0},
        {"stop": 1.0, "step": 0.25, "num": 5},
        {"stop": 1.0, "step": 0.3},
        {"stop": -1.0, "step": 0.1},
    ):
        with pytest.raises(ConfigError):
            resolve_run_config(_base(sample_times=bad), "dtwa")


def test_times_are_rescaled_by_J():
    resolved = resolve_run_config(_base(J=2.0, sample_times=[0.5, 1.0]), "dtwa")
    # config times are tJ; the engine runs in physical time
    assert np.allclose(resolved.run.sample_times, [0.25, 0.5])
    assert np.array_equal(resolved.times_tj, [0.5, 1.0])
    resolved = resolve_run_config(
        _base(J=2.0, model="xy", integrator={"step": 0.01}), "dtwa"
    )
    assert resolved.run.integrator.step == pytest.approx(0.005)


def test_reference_resolution():
    cfg = _base(
        lattice={"nx": 3, "ny": 3},
        observables={"correlations": {"reference": "center", "axis": "x"}},
    )
    assert resolve_run_config(cfg, "dtwa").reference == 4
    cfg["observables"]["correlations"]["reference"] = "corner"
    assert resolve_run_config(cfg, "dtwa").reference == 0
    cfg["observables"]["correlations"]["reference"] = [2, 3]
    assert resolve_run_config(cfg, "dtwa").reference == 7
    cfg["observables"]["correlations"]["reference"] = [4, 1]
    with pytest.raises(ConfigError):
        resolve_run_config(cfg, "dtwa")
    cfg["observables"]["correlations"]["reference"] = "middle"
    with pytest.raises(ConfigError):
        resolve_run_config(cfg, "dtwa")


def test_partners_follow_axis_and_j_max():
    cfg = _base(
        lattice={"nx": 3, "ny": 4},
        observables={
            "correlations": {"reference": "corner", "axis": "y", "j_max": 2}
        },
    )
    resolved = resolve_run_config(cfg, "dtwa")
    assert resolved.partners == (3, 6)
    assert resolved.components == ("yy",)


def test_component_validation():
    cfg = _base(observables={"correlations": {"components": ["xy"]}})
    with pytest.raises(ConfigError, match="components"):
        resolve_run_config(cfg, "dtwa")


def test_seed_override_wins():
    resolved = resolve_run_config(_base(master_seed=5), "dtwa", seed_override=99)
    assert resolved.run.master_seed == 99


def test_seed_range_checked():
    with pytest.raises(ConfigError, match="master_seed"):
        resolve_run_config(_base(master_seed=-1), "dtwa")
    with pytest.raises(ConfigError, match="master_seed"):
        resolve_run_config(_base(master_seed=2**64), "dtwa")


def test_protocol_fixed():
    with pytest.raises(ConfigError, match="protocol"):
        resolve_run_config(_base(protocol="z_quench"), "dtwa")
    resolved = resolve_run_config(_base(protocol="plus_x_quench"), "dtwa")
    assert resolved.model == "ising"


def test_alpha_optional_only_when_requested():
    cfg = _base()
    del cfg["alpha"]
    with pytest.raises(ConfigError, match="alpha"):
        resolve_run_config(cfg, "dtwa")
    resolved = resolve_run_config(cfg, "crossover", require_alpha=False)
    assert resolved.couplings is None


def test_j_min_default_by_dimensionality():
    chain = resolve_run_config(_base(lattice={"nx": 1, "ny": 8}), "dtwa")
    assert chain.j_min_default() == 1
    grid = resolve_run_config(_base(lattice={"nx": 4, "ny": 5}), "dtwa")
    assert grid.j_min_default() == 2
