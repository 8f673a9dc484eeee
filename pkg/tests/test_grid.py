import numpy as np
import pytest

from densflow import Grid, load_field, save_field
from conftest import band_limited


def test_constructor_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(12)  # not a power of two
    with pytest.raises(ValueError):
        Grid(8)  # below the minimum
    with pytest.raises(ValueError):
        Grid((16, 16, 16, 16))
    with pytest.raises(ValueError):
        Grid(16, lengths=(-1.0,))


def test_integrate_constant_is_exact():
    for shape in (16, (16, 32), (16, 16, 16)):
        g = Grid(shape)
        assert g.integrate(np.ones(g.shape)) == 1.0


def test_integrate_trig_identities(grid64):
    x = grid64.axis_coordinate(0)
    assert abs(grid64.integrate(np.cos(x))) < 1e-13
    assert abs(grid64.integrate(np.cos(x) ** 2) - 0.5) < 1e-13


def test_derivative_trig(grid64):
    x = grid64.axis_coordinate(0)
    assert np.max(np.abs(grid64.derivative(np.sin(x), 0) - np.cos(x))) < 1e-12
    assert np.max(np.abs(grid64.derivative(np.ones(64), 0))) < 1e-13


def test_derivative_axis_out_of_range(grid64):
    with pytest.raises(ValueError):
        grid64.derivative(np.ones(64), 1)


def test_derivative_matches_finite_differences():
    # centered differences of the trig interpolant converge at O(h^2)
    rng = np.random.default_rng(3)
    g = Grid(64)
    f = band_limited(g, rng, kmax=5)
    coeff = np.fft.fft(f) / f.size
    k = np.fft.fftfreq(64, d=1.0 / 64) * 2 * np.pi / g.lengths[0]

    def interp(xs):
        return np.real(np.exp(1j * np.outer(xs, k)) @ coeff)

    x = g.axis_coordinate(0)
    exact = g.derivative(f, 0)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (interp(x + h) - interp(x - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_second_derivative_and_laplacian(grid64):
    x = grid64.axis_coordinate(0)
    assert np.max(np.abs(grid64.laplacian(np.cos(x)) + np.cos(x))) < 1e-12
    assert np.max(np.abs(grid64.derivative(np.cos(2 * x), 0, order=2) + 4 * np.cos(2 * x))) < 1e-11


def test_nyquist_zeroed_on_odd_derivative():
    g = Grid(16)
    x = g.axis_coordinate(0)
    nyq = np.cos(8 * x)  # pure Nyquist mode
    assert np.max(np.abs(g.derivative(nyq, 0))) < 1e-12
    # even order keeps it
    assert np.max(np.abs(g.derivative(nyq, 0, order=2) + 64 * nyq)) < 1e-9


def test_inverse_laplacian(grid64):
    x = grid64.axis_coordinate(0)
    assert np.max(np.abs(grid64.inverse_laplacian(np.cos(x)) + np.cos(x))) < 1e-12
    u = grid64.inverse_laplacian(np.cos(3 * x))
    assert np.max(np.abs(grid64.laplacian(u) - np.cos(3 * x))) < 1e-11
    with pytest.raises(ValueError):
        grid64.inverse_laplacian(np.ones(64))


def test_dealias_cuts_top_third(grid64):
    x = grid64.axis_coordinate(0)
    f = np.cos(4 * x) + np.cos(30 * x)
    d = grid64.dealias(f)
    assert np.max(np.abs(d - np.cos(4 * x))) < 1e-12


def test_parseval(grid64):
    rng = np.random.default_rng(7)
    f = band_limited(grid64, rng)
    coeff = np.fft.fft(f) / f.size
    assert grid64.integrate(f * f) == pytest.approx(np.sum(np.abs(coeff) ** 2), rel=1e-11)


def test_integration_by_parts():
    rng = np.random.default_rng(11)
    for shape in (64, (32, 32)):
        g = Grid(shape)
        f = band_limited(g, rng)
        h = band_limited(g, rng)
        lhs = g.integrate(f * g.derivative(h, 0))
        rhs = -g.integrate(h * g.derivative(f, 0))
        assert lhs == pytest.approx(rhs, abs=1e-11)


def test_gradient_divergence_consistency():
    g = Grid((32, 32))
    rng = np.random.default_rng(13)
    f = band_limited(g, rng)
    v = g.gradient(f)
    assert np.max(np.abs(g.divergence(v) - g.laplacian(f))) < 1e-10


def test_curl_of_gradient_vanishes():
    g = Grid((16, 16, 16))
    rng = np.random.default_rng(17)
    f = band_limited(g, rng, kmax=3)
    assert np.max(np.abs(g.curl(g.gradient(f)))) < 1e-10


def test_perp_gradient_is_divergence_free():
    g = Grid((32, 32))
    rng = np.random.default_rng(19)
    f = band_limited(g, rng)
    assert g.l2_norm(g.divergence(g.perp_gradient(f))) < 1e-11


def test_spectral_tail_fraction(grid64):
    x = grid64.axis_coordinate(0)
    assert grid64.spectral_tail_fraction(np.cos(x)) < 1e-20
    hot = np.cos(20 * x)  # inside the retained band, top third
    assert grid64.spectral_tail_fraction(hot) > 0.9


def test_snapshot_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(23)
    for shape, cplx in ((64, False), ((16, 32), False), ((16, 16), True)):
        g = Grid(shape)
        vals = rng.standard_normal(g.shape)
        if cplx:
            vals = vals + 1j * rng.standard_normal(g.shape)
        base = tmp_path / "field"
        save_field(g, vals, "payload", base)
        g2, name, back = load_field(base)
        assert g2 == g
        assert name == "payload"
        assert back.dtype == vals.dtype
        assert np.array_equal(back, vals)


def test_non_default_lengths():
    g = Grid(64, lengths=(4.0,))
    x = g.axis_coordinate(0)
    k = 2 * np.pi / 4.0
    f = np.sin(k * x)
    assert np.max(np.abs(g.derivative(f, 0) - k * np.cos(k * x))) < 1e-12
    assert g.integrate(np.ones(64)) == 1.0
