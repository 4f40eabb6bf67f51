import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from cptych import (
    CodedSurface,
    PerturbationConfig,
    ScanPosition,
    ScenarioConfig,
    make_coded_surface,
    make_ground_truth,
    make_positions,
    perturb_coded_surface,
)
from cptych._config import OpticalGeometry
from cptych._io import write_pgm16
from cptych._scenario import builtin_source, default_span, resample
from cptych._types import DimensionError


SMALL = ScenarioConfig(object_size=(16, 16))


def test_zero_sources_give_constant_background():
    zeros = np.zeros((16, 16))
    obj = make_ground_truth(SMALL, amplitude=zeros, phase=zeros)
    np.testing.assert_array_equal(obj, np.full((16, 16), 0.2 + 0j))


def test_background_is_a_lower_bound_on_modulus():
    obj = make_ground_truth(ScenarioConfig(object_size=(64, 64)))
    assert np.min(np.abs(obj)) >= 0.2 - 1e-12
    assert np.all(np.isfinite(obj))


def test_sources_can_be_recovered():
    rng = np.random.default_rng(0)
    amp = rng.random((16, 16))
    phase = rng.random((16, 16))
    obj = make_ground_truth(SMALL, amplitude=amp, phase=phase)
    np.testing.assert_allclose(np.abs(obj) - 0.2, amp, atol=1e-12)
    np.testing.assert_allclose(np.angle(obj) / np.pi, phase, atol=1e-12)


def test_phase_range_is_configurable():
    cfg = ScenarioConfig(object_size=(16, 16), phase_range=(-1.0, 1.0), background=0.0)
    ones = np.ones((16, 16))
    obj = make_ground_truth(cfg, amplitude=ones, phase=ones)
    np.testing.assert_allclose(np.angle(obj), 1.0, atol=1e-12)


def test_ground_truth_rejects_bad_sources():
    with pytest.raises(DimensionError, match="shape"):
        make_ground_truth(SMALL, amplitude=np.zeros((8, 8)))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        make_ground_truth(SMALL, amplitude=np.full((16, 16), 2.0))
    missing = ScenarioConfig(object_size=(16, 16), amp_source="/nonexistent/street.pgm")
    with pytest.raises(FileNotFoundError, match="does not exist"):
        make_ground_truth(missing)


def test_ground_truth_from_pgm_source(tmp_path):
    pattern = np.tile(np.linspace(0.0, 1.0, 16), (16, 1))
    path = tmp_path / "amp.pgm"
    write_pgm16(path, pattern)
    cfg = ScenarioConfig(object_size=(16, 16), amp_source=str(path))
    obj = make_ground_truth(cfg, phase=np.zeros((16, 16)))
    np.testing.assert_allclose(np.abs(obj) - 0.2, pattern, atol=1e-5)


def test_pgm_source_of_wrong_size_is_rejected(tmp_path):
    path = tmp_path / "small.pgm"
    write_pgm16(path, np.zeros((8, 8)))
    cfg = ScenarioConfig(object_size=(16, 16), phase_source=str(path))
    with pytest.raises(DimensionError, match="expected"):
        make_ground_truth(cfg)


def test_bundled_sources_span_the_unit_interval():
    for name in ("street", "peppers"):
        img = builtin_source(name, (128, 128))
        assert img.shape == (128, 128)
        assert img.min() == 0.0 and img.max() == 1.0


def test_bundled_sources_are_resampled_to_the_object_size():
    for name in ("street", "peppers"):
        img = builtin_source(name, (64, 48))
        assert img.shape == (64, 48)
        assert 0.0 <= img.min() and img.max() <= 1.0
        assert img.std() > 0.1


def test_unknown_bundled_source():
    with pytest.raises(ValueError, match="unknown built-in source"):
        builtin_source("lena", (8, 8))


def test_resample_keeps_matching_shapes_and_constants():
    img = np.linspace(0.0, 1.0, 12).reshape(3, 4)
    np.testing.assert_array_equal(resample(img, (3, 4)), img)
    np.testing.assert_allclose(resample(np.full((5, 5), 0.25), (10, 20)), 0.25, atol=1e-6)


def test_default_ground_truth_uses_bundled_scenes():
    obj = make_ground_truth(ScenarioConfig(object_size=(32, 32)))
    np.testing.assert_allclose(np.abs(obj) - 0.2, builtin_source("street", (32, 32)), atol=1e-12)


def test_coded_surface_is_reproducible():
    a = make_coded_surface((32, 32), seed=7)
    b = make_coded_surface((32, 32), seed=7)
    c = make_coded_surface((32, 32), seed=8)
    np.testing.assert_array_equal(a.transmittance, b.transmittance)
    assert not np.array_equal(a.transmittance, c.transmittance)


def test_coded_surface_modulus_range():
    cs = make_coded_surface((64, 64), seed=1)
    mod = np.abs(cs.transmittance)
    assert mod.max() <= 1.0
    assert mod.min() >= 0.3 - 1e-12
    floorless = make_coded_surface((64, 64), seed=1, modulus_floor=0.0)
    assert np.abs(floorless.transmittance).min() < 0.3


def test_coded_surface_phase_is_uniform():
    cs = make_coded_surface((1000, 1000), seed=2)
    phase = np.mod(np.angle(cs.transmittance), 2 * np.pi)
    counts, _ = np.histogram(phase, bins=20, range=(0.0, 2 * np.pi))
    assert chisquare(counts).pvalue > 0.01


def test_perturbation_with_zero_noise_is_identity():
    cs = make_coded_surface((32, 32), seed=3)
    out = perturb_coded_surface(cs, PerturbationConfig(sigma_amp=0.0, sigma_ang=0.0))
    np.testing.assert_allclose(out.transmittance, cs.transmittance, atol=1e-15)


def test_perturbation_respects_unit_modulus():
    cs = make_coded_surface((64, 64), seed=4)
    out = perturb_coded_surface(cs, PerturbationConfig(sigma_amp=2.0, sigma_ang=3.0, seed=1))
    assert np.abs(out.transmittance).max() <= 1.0


def test_perturbation_amplitude_statistics():
    rng = np.random.default_rng(5)
    cs = CodedSurface(0.5 * np.exp(2j * np.pi * rng.random((1000, 1000))))
    sigma = 0.05
    out = perturb_coded_surface(cs, PerturbationConfig(sigma_amp=sigma, sigma_ang=0.1, seed=9))
    deviation = np.mean(np.abs(np.abs(out.transmittance) - 0.5))
    assert deviation == pytest.approx(sigma * np.sqrt(2 / np.pi), rel=0.05)


@pytest.mark.parametrize("mode", ["jittered_grid", "random_uniform"])
def test_single_position_is_the_origin(mode):
    assert make_positions(1, 5e-6, mode, seed=3) == [ScanPosition(0.0, 0.0)]


@pytest.mark.parametrize("mode", ["jittered_grid", "random_uniform"])
def test_positions_are_reproducible_and_bounded(mode):
    span = 8e-6
    a = make_positions(9, span, mode, seed=4)
    assert a == make_positions(9, span, mode, seed=4)
    assert len(set(a)) == 9
    assert all(abs(p.dx) <= span and abs(p.dy) <= span for p in a)


def test_jittered_grid_keeps_positions_apart():
    span = 10e-6
    k = 8
    for seed in range(100):
        positions = make_positions(k, span, "jittered_grid", seed=seed)
        closest = min(
            np.hypot(p.dx - q.dx, p.dy - q.dy) for p, q in itertools.combinations(positions, 2)
        )
        assert closest > 0.25 * span / np.sqrt(k)


def test_positions_reject_empty_scan():
    with pytest.raises(ValueError, match=">= 1"):
        make_positions(0, 1e-6)
    with pytest.raises(ValueError, match="unknown position mode"):
        make_positions(2, 1e-6, "spiral")  # type: ignore[arg-type]


def test_default_span_is_an_eighth_of_the_object():
    geom = OpticalGeometry(pitch=2e-6)
    assert default_span(ScenarioConfig(object_size=(64, 64)), geom) == pytest.approx(16e-6)
    explicit = ScenarioConfig(object_size=(64, 64), position_span=3e-6)
    assert default_span(explicit, geom) == 3e-6
