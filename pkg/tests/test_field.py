import numpy as np
import pytest

from cptych import OpticalGeometry, ScanPosition, bin_intensity, fft2, ifft2, propagate, shift
from cptych._field import propagation_band, upsample_adjoint
from cptych._types import DimensionError


GEOM = OpticalGeometry(wavelength=532e-9, pitch=1e-6, d1=100e-6, d2=100e-6, sr_ratio=1)
# Sampling finer than half a wavelength leaves the grid corners evanescent.
FINE_GEOM = OpticalGeometry(wavelength=532e-9, pitch=0.2e-6, d1=0.0, d2=0.0, sr_ratio=1)


def _random_field(shape, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_fft_of_ones_is_dc_spike():
    out = fft2(np.ones((8, 8), dtype=np.complex128))
    assert out[0, 0] == pytest.approx(8.0)
    rest = out.copy()
    rest[0, 0] = 0.0
    assert np.max(np.abs(rest)) < 1e-12


def test_fft_inverse_pair():
    f = _random_field((32, 32))
    assert np.max(np.abs(ifft2(fft2(f)) - f)) < 1e-12


def test_fft_preserves_energy():
    f = _random_field((16, 24), seed=1)
    assert np.linalg.norm(fft2(f)) == pytest.approx(np.linalg.norm(f), rel=1e-12)


def test_default_sampling_is_fully_propagating():
    assert propagation_band((32, 32), GEOM).all()
    assert not propagation_band((32, 32), FINE_GEOM).all()


def test_propagate_zero_distance_is_identity():
    f = _random_field((16, 16))
    np.testing.assert_array_equal(propagate(f, 0.0, GEOM), f)


def test_propagate_round_trip():
    f = _random_field((32, 32), seed=2)
    back = propagate(propagate(f, 500e-6, GEOM), -500e-6, GEOM)
    assert np.max(np.abs(back - f)) < 1e-10


def test_propagate_preserves_norm():
    f = _random_field((32, 32), seed=3)
    out = propagate(f, 250e-6, GEOM)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(f), rel=1e-10)


def test_propagate_suppresses_evanescent_components():
    f = _random_field((32, 32), seed=4)
    out = propagate(f, 1e-6, FINE_GEOM)
    band = propagation_band((32, 32), FINE_GEOM)
    assert np.max(np.abs(fft2(out)[~band])) < 1e-12
    assert np.linalg.norm(out) < np.linalg.norm(f)


def test_propagate_rejects_non_finite_distance():
    with pytest.raises(ValueError, match="finite"):
        propagate(_random_field((8, 8)), float("nan"), GEOM)


def test_shift_by_zero_is_identity():
    f = _random_field((16, 16))
    np.testing.assert_array_equal(shift(f, ScanPosition(0.0, 0.0), GEOM), f)


def test_integer_shift_matches_roll():
    f = np.zeros((16, 16), dtype=np.complex128)
    f[3, 5] = 1.0
    out = shift(f, ScanPosition(2e-6, -3e-6), GEOM)
    # Output samples f(x + dx): content moves towards lower indices by dx.
    expected = np.roll(f, shift=(3, -2), axis=(0, 1))
    assert np.max(np.abs(out - expected)) < 1e-12


def test_shift_and_inverse_shift_round_trip():
    f = _random_field((32, 32), seed=5)
    pos = ScanPosition(3.37e-6, -1.21e-6)
    back = shift(shift(f, pos, GEOM), -pos, GEOM)
    assert np.max(np.abs(back - f)) < 1e-12


def test_shift_is_unitary():
    f = _random_field((32, 32), seed=6)
    out = shift(f, ScanPosition(0.4e-6, 2.7e-6), GEOM)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(f), rel=1e-12)


def test_shift_by_full_period_is_identity():
    f = _random_field((16, 16), seed=7)
    out = shift(f, ScanPosition(16 * GEOM.pitch, 0.0), GEOM)
    assert np.max(np.abs(out - f)) < 1e-10


def test_shift_commutes_with_propagation():
    f = _random_field((32, 32), seed=8)
    pos = ScanPosition(1.5e-6, -0.25e-6)
    a = shift(propagate(f, 300e-6, GEOM), pos, GEOM)
    b = propagate(shift(f, pos, GEOM), 300e-6, GEOM)
    assert np.max(np.abs(a - b)) < 1e-10


def test_bin_ratio_one_is_identity():
    rng = np.random.default_rng(0)
    img = rng.random((8, 8))
    np.testing.assert_array_equal(bin_intensity(img, 1), img)


def test_bin_ones_block():
    out = bin_intensity(np.ones((4, 4)), 4)
    np.testing.assert_array_equal(out, np.array([[16.0]]))


def test_bin_preserves_total_energy():
    rng = np.random.default_rng(1)
    img = rng.random((64, 64))
    assert bin_intensity(img, 4).sum() == pytest.approx(img.sum(), rel=1e-12)


@pytest.mark.parametrize("r", [1, 2, 4])
def test_upsample_is_adjoint_of_binning(r):
    rng = np.random.default_rng(r)
    x = rng.random((16, 16))
    y = rng.random((16 // r, 16 // r))
    lhs = float(np.sum(bin_intensity(x, r) * y))
    rhs = float(np.sum(x * upsample_adjoint(y, r)))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_upsample_replicates_blocks():
    out = upsample_adjoint(np.array([[1.0, 2.0]]), 2)
    np.testing.assert_array_equal(out, [[1.0, 1.0, 2.0, 2.0], [1.0, 1.0, 2.0, 2.0]])


def test_bin_rejects_indivisible_shape():
    with pytest.raises(DimensionError, match="not divisible"):
        bin_intensity(np.ones((6, 6)), 4)
