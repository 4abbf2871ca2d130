import pytest

from krflow import scenarios
from krflow.diagnostics import ricci_consistent
from krflow.errors import InputError
from krflow.lattice import blowup_p2, save_geometry


def test_registry_is_exact():
    assert scenarios.REGISTRY == (
        "homogeneous_ode", "torus_c1_zero", "model_negative_c1", "tsuji_degenerate_model",
        "product_elliptic", "linear_degeneration", "blowup_p2_classflow", "fano_p2_classflow",
        "two_point_blowup_mmp",
    )


@pytest.mark.parametrize("name", scenarios.REGISTRY)
def test_bundled_configs_load(name):
    cfg = scenarios.load_scenario(name)
    assert cfg["name"] == name
    assert cfg.get("engine", "flow") in scenarios.RUNNERS


def test_unknown_scenario():
    with pytest.raises(InputError, match="available"):
        scenarios.load_scenario("missing")


def test_torus_config_matches_criteria():
    cfg = scenarios.load_scenario("torus_c1_zero")
    assert cfg["N"] == 64 and cfg["t_end"] == 10 and cfg["nu"] == 0
    p = scenarios.build_problem(cfg)
    assert ricci_consistent(p)


def test_model_scenarios_are_labelled():
    for name in ("model_negative_c1", "tsuji_degenerate_model", "linear_degeneration"):
        p = scenarios.build_problem(scenarios.load_scenario(name))
        assert p.model


def test_overrides_do_not_touch_bundled_config():
    cfg = scenarios.load_scenario("product_elliptic")
    new = scenarios.apply_overrides(cfg, {"N": 16, "tolerance": 1e-5, "t_end": 3})
    assert new["E"]["N"] == new["S"]["N"] == 16
    assert new["estimates"]["tolerance"] == 1e-5
    assert new["t_end"] == 3
    assert scenarios.load_scenario("product_elliptic") == cfg


def test_geometry_specs(tmp_path):
    assert scenarios.geometry_from_spec("blowup_p2") == blowup_p2()
    path = tmp_path / "g.json"
    save_geometry(blowup_p2(), path)
    assert scenarios.geometry_from_spec(str(path)) == blowup_p2()
    assert scenarios.geometry_from_spec(blowup_p2().to_json()) == blowup_p2()
    with pytest.raises(InputError):
        scenarios.geometry_from_spec("no_such_surface")


def test_unknown_engine():
    with pytest.raises(InputError):
        scenarios.run_config({"engine": "spectral"})


def test_unknown_family():
    cfg = dict(scenarios.load_scenario("homogeneous_ode"))
    cfg["family"] = {"kind": "cubic"}
    with pytest.raises(InputError):
        scenarios.build_problem(cfg)


def test_in_memory_run_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    outcome = scenarios.run_scenario("fano_p2_classflow")
    assert outcome.files == {}
    assert list(tmp_path.iterdir()) == []
    kinds = [p["classification"]["kind"] for p in outcome.summary["presets"]]
    assert kinds == ["CollapseToPoint", "CollapseToPoint"]
