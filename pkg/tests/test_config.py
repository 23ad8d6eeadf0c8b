import pytest
import yaml

from risaccess.config import (
    ConfigError, SystemConfig, desk_profile, load_config, load_sweep_section, paper_profile,
)


def test_paper_defaults():
    cfg = paper_profile()
    assert (cfg.K, cfg.M, cfg.N1, cfg.N2, cfg.lambda_alpha) == (1000, 40, 7, 7, 0.08)
    assert cfg.N == 49 and cfg.Mp == 80 and cfg.Np == 196
    assert cfg.amp.I_max == 2000 and cfg.trials == 50
    assert cfg.pathloss.tau_0 == pytest.approx(1e-3)
    assert (cfg.pathloss.mu_G, cfg.pathloss.mu_h, cfg.pathloss.d_0) == (2.2, 2.5, 1.0)
    assert cfg.cluster_model.n_clusters == 10 and cfg.cluster_model.subpaths_per_cluster == 5


def test_desk_profile():
    cfg = desk_profile()
    assert (cfg.K, cfg.lambda_alpha, cfg.M, cfg.N1, cfg.N2, cfg.L, cfg.grid_ratio) == (100, 0.1, 16, 4, 4, 40, 2)
    assert cfg.amp.I_max == 300 and cfg.trials == 20


@pytest.mark.parametrize("override", [
    {"L": 0}, {"K": 0}, {"lambda_alpha": 1.0}, {"tau_n": 0.0}, {"amp.damping": 0.0},
    {"amp.I_max": 0}, {"priors.lambda_s": 1.5}, {"M_grid": 8}, {"seed": -1}, {"scene.kind": "x"},
    {"nonsense": 1}, {"amp.nonsense": 1},
])
def test_invalid_configs(override):
    with pytest.raises(ConfigError):
        desk_profile().with_overrides(**override)


def test_yaml_flat_keys(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("profile: desk\nL: 60\namp.I_max: 50\ngeometry.R: 20.0\nsweep.parameter: L\n")
    cfg = load_config(p)
    assert cfg.K == 100 and cfg.L == 60 and cfg.amp.I_max == 50 and cfg.geometry.R == 20.0
    assert load_sweep_section(p) == {"parameter": "L"}
    assert load_config(p, profile="paper").K == 1000


def test_yaml_nested_and_round_trip(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"amp": {"tol": 1e-3}, "M": 8}))
    assert load_config(p, fallback="desk").amp.tol == 1e-3
    cfg = desk_profile().with_overrides(L=33, **{"scene.kind": "on_grid"})
    p.write_text(yaml.safe_dump(cfg.to_flat_dict()))
    back = load_config(p)
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


@pytest.mark.parametrize("text", ["[1, 2]", "L: [unclosed", "profile: huge"])
def test_bad_files(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_config_is_immutable():
    cfg = SystemConfig()
    with pytest.raises(Exception):
        cfg.K = 3
