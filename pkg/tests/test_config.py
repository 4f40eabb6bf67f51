import math

import pytest

from cptych import PoissonNoise, RunConfig, SolverConfig, TVProxConfig, load_config
from cptych._config import THREADS_ENV, parse_config, thread_count
from cptych._types import ConfigError


CONFIG_TOML = """
[scenario]
object_size = [64, 64]
num_positions = 4
seed = 3

[geometry]
sr_ratio = 2
d1 = 100e-6

[solver]
algorithm = "lsq-ml"
outer_iters = 5
cs_update_start = 3

[solver.tv]
lambda = 0.01

[noise]
kind = "poisson"
photon_scale = 100.0
seed = 5

[perturbation]
sigma_amp = 0.05
"""


def test_defaults():
    cfg = load_config(None)
    assert cfg.scenario.object_size == (256, 256)
    assert cfg.scenario.num_positions == 8
    assert cfg.scenario.background == 0.2
    assert cfg.scenario.phase_range == (0.0, math.pi)
    assert cfg.geometry.sr_ratio == 4
    assert cfg.scenario.sensor_size(cfg.geometry.sr_ratio) == (64, 64)
    assert cfg.solver.algorithm == "pptv"
    assert cfg.solver.init_object == "flat"
    assert cfg.solver.tv.lam == 1e-3
    assert cfg.solver.tv.eta == 0.125
    assert cfg.solver.tv.sub_iters == 20
    assert cfg.noise.kind == "none"
    assert cfg.perturbation is None


def test_load_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG_TOML)
    cfg = load_config(path)
    assert cfg.scenario.object_size == (64, 64)
    assert cfg.geometry.d1 == 100e-6
    assert cfg.geometry.d2 == 500e-6
    assert cfg.solver.algorithm == "lsq-ml"
    assert cfg.solver.tv.lam == 0.01
    assert isinstance(cfg.noise, PoissonNoise)
    assert cfg.noise.photon_scale == 100.0
    assert cfg.perturbation is not None and cfg.perturbation.sigma_ang == 0.3


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="unknown configuration key 'solver.step'"):
        parse_config({"solver": {"step": 1.0}})


def test_invalid_values_are_rejected():
    with pytest.raises(ConfigError, match="scenario.num_positions"):
        parse_config({"scenario": {"num_positions": 0}})
    with pytest.raises(ConfigError, match="solver.algorithm"):
        parse_config({"solver": {"algorithm": "dm"}})
    with pytest.raises(ConfigError, match="divisible"):
        parse_config({"scenario": {"object_size": [30, 32]}, "geometry": {"sr_ratio": 4}})
    with pytest.raises(ConfigError, match="lambda"):
        parse_config({"solver": {"tv": {"lambda": -1.0}}})


def test_malformed_toml(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[solver\n")
    with pytest.raises(ConfigError, match="broken.toml"):
        load_config(path)


def test_large_dual_step_warns():
    with pytest.warns(RuntimeWarning, match="1/8"):
        TVProxConfig(eta=0.2)


def test_lambda_accepts_both_names():
    assert TVProxConfig(lam=0.5).lam == 0.5
    assert TVProxConfig.model_validate({"lambda": 0.25}).lam == 0.25


def test_with_seed_replaces_every_seed(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG_TOML)
    cfg = load_config(path).with_seed(11)
    assert cfg.scenario.seed == 11
    assert cfg.solver.seed == 11
    assert isinstance(cfg.noise, PoissonNoise) and cfg.noise.seed == 11
    assert cfg.perturbation is not None and cfg.perturbation.seed == 11


def test_digest_tracks_content():
    a = RunConfig()
    assert a.digest() == RunConfig().digest()
    assert len(a.digest()) == 32
    assert a.digest() != a.with_seed(1).digest()


def test_effective_batch_size():
    assert SolverConfig().effective_batch_size(4) == 4
    assert SolverConfig().effective_batch_size(20) == 8
    assert SolverConfig(batch_size=3).effective_batch_size(20) == 3
    with pytest.raises(ConfigError, match="exceeds"):
        SolverConfig(batch_size=5).effective_batch_size(4)


def test_surface_update_schedule():
    assert not SolverConfig().cs_active(100)
    cfg = SolverConfig(cs_update_start=3)
    assert [cfg.cs_active(j) for j in range(1, 5)] == [False, False, True, True]


def test_thread_count(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert thread_count() == 1
    monkeypatch.setenv(THREADS_ENV, "4")
    assert thread_count() == 4
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ConfigError, match=THREADS_ENV):
        thread_count()
