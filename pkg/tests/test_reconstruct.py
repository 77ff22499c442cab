import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrspiral.errors import ConfigError, UndefinedMetricError
from corrspiral.interfere import THETAS, retrieve_coefficients, simulate_rates
from corrspiral.modes import BeamGeometry, ModeIndex, eval_mode
from corrspiral.objects import Disk, Polygon, Square, Strip, parse_pgm
from corrspiral.overlap import OverlapWindow, compute_overlaps
from corrspiral.reconstruct import (GridSpec, RasterImage, azimuthal_variance, integrated_power,
                                    object_coefficients, render_coherent, render_incoherent,
                                    rotational_correlation)

RECON_WINDOW = OverlapWindow(-15, 15, 0, 0)


@pytest.fixture(scope="module")
def square_coeffs():
    return object_coefficients(compute_overlaps(Square(1.0), 0.0, RECON_WINDOW))


@pytest.fixture(scope="module")
def strip_coeffs():
    return object_coefficients(compute_overlaps(Strip(0.9), 0.0, RECON_WINDOW))


def test_gaussian_spot_flat():
    img = render_coherent({(0, 0): 1.0})
    assert azimuthal_variance(img) < 1e-6
    x, y = GridSpec().coords()
    expect = np.abs(eval_mode(ModeIndex(0, 0), BeamGeometry(0.0), np.hypot(x, y), np.arctan2(y, x))) ** 2
    np.testing.assert_allclose(img.values, expect, rtol=1e-12)


def test_two_lobes():
    img = render_coherent({(1, 0): 1.0, (-1, 0): 1.0})
    assert azimuthal_variance(img) > 0.1
    # |e^{i phi} + e^{-i phi}|^2 = 4 cos^2 phi: dark along the y axis, bright along x
    n = img.values.shape[0]
    c = n // 2
    assert img.values[0:c, c - 1:c + 1].max() < 1e-3 * img.values.max()
    assert rotational_correlation(img, 2) > 0.99


def test_single_coefficient_images_coincide():
    c = {(2, 1): 0.7 - 0.2j}
    np.testing.assert_allclose(render_coherent(c).values, render_incoherent(c).values, rtol=1e-12)


def test_incoherent_ring():
    img = render_incoherent({(3, 0): 1.0})
    x, y = GridSpec().coords()
    r = np.hypot(x, y)
    expect = np.abs(eval_mode(ModeIndex(3, 0), BeamGeometry(0.0), r, 0.0)) ** 2
    np.testing.assert_allclose(img.values, expect, rtol=1e-12, atol=1e-300)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_incoherent_rotationally_symmetric(seed):
    rng = np.random.default_rng(seed)
    coeffs = {(l, p): complex(*rng.normal(size=2)) for l in range(-4, 5) for p in range(2)}
    img = render_incoherent(coeffs)
    v = img.values
    # exact on the grid's symmetry group, and flat to interpolation accuracy on circles
    for other in (np.rot90(v), v.T, v[::-1]):
        assert np.max(np.abs(other - v)) < 1e-9 * v.max()
    assert azimuthal_variance(img) < 1e-6


def test_phase_invariance(square_coeffs):
    rng = np.random.default_rng(0)
    shifted = {k: v * np.exp(1j * rng.uniform(0, 2 * np.pi)) for k, v in square_coeffs.items()}
    np.testing.assert_allclose(render_incoherent(shifted).values, render_incoherent(square_coeffs).values,
                               rtol=1e-12)
    a, b = render_coherent(shifted).values, render_coherent(square_coeffs).values
    assert np.max(np.abs(a - b)) > 1e-3 * b.max()


def test_parseval(square_coeffs):
    big = GridSpec(512, 12.0 / 512)
    power = integrated_power(render_coherent(square_coeffs, grid=big))
    expect = sum(abs(v) ** 2 for v in square_coeffs.values())
    assert abs(power - expect) < 0.01 * expect


def test_square_contrast(square_coeffs, strip_coeffs):
    co, inc = render_coherent(square_coeffs), render_incoherent(square_coeffs)
    assert azimuthal_variance(inc) < 1e-6
    assert azimuthal_variance(co) > 100 * azimuthal_variance(inc)
    four = rotational_correlation(co, 4)
    assert four > 0.9
    assert four > rotational_correlation(render_coherent(strip_coeffs), 4)
    assert rotational_correlation(co, 2) > 0.9


def test_triangle_threefold():
    c = object_coefficients(compute_overlaps(Polygon(3, 0.9), 0.0, RECON_WINDOW))
    img = render_coherent(c)
    assert rotational_correlation(img, 3) > 0.9
    assert rotational_correlation(img, 2) < 0


def test_disk_flat():
    c = object_coefficients(compute_overlaps(Disk(0.5), 0.0, RECON_WINDOW))
    assert azimuthal_variance(render_coherent(c)) < 1e-6
    assert azimuthal_variance(render_incoherent(c)) < 1e-6


def test_retrieval_path_matches_direct():
    t = compute_overlaps(Square(1.0), 10.0, OverlapWindow(-10, 10, 0, 0))
    back = retrieve_coefficients(simulate_rates(t, THETAS))
    g = BeamGeometry(0.0)
    a = render_coherent(object_coefficients(t), g).values
    b = render_coherent(object_coefficients(back), g).values
    assert np.max(np.abs(a - b)) < 1e-6


def test_metric_errors():
    with pytest.raises(UndefinedMetricError):
        azimuthal_variance(RasterImage(np.zeros((8, 8)), 0.1))
    flat = render_incoherent({(0, 0): 1.0})
    with pytest.raises(UndefinedMetricError):
        rotational_correlation(RasterImage(np.ones((16, 16)), 0.1), 2)
    with pytest.raises(ConfigError):
        rotational_correlation(flat, 7)
    with pytest.raises(ConfigError):
        render_coherent({})
    with pytest.raises(ConfigError):
        RasterImage(-np.ones((2, 2)), 0.1)
    with pytest.raises(ConfigError):
        GridSpec(1, 0.1)


def test_pgm_and_csv():
    img = render_coherent({(1, 0): 1.0, (-1, 0): 0.5}, grid=GridSpec(32, 4.0 / 32))
    pix = parse_pgm(img.to_pgm())
    assert pix.shape == (32, 32) and pix.max() == 255
    rows = img.to_csv().splitlines()
    assert len(rows) == 32 and len(rows[0].split(",")) == 32
