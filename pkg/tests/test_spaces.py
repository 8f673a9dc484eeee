import numpy as np
import pytest

from densflow import (
    ConvergenceError,
    Density,
    Grid,
    PositivityError,
    TangentDensity,
    ThetaFR,
    ThetaWO,
    WaveFunction,
    fr_distance,
    fr_geodesic,
    fr_gradient,
    fr_metric,
    fubini_study_metric,
    sasaki_fr_metric,
    sqrt_map,
    sqrt_map_inverse,
    weighted_poisson_solve,
    wo_gradient,
    wo_metric,
)
from densflow import potentials as pots
from conftest import band_limited, random_density, random_tangent, rel_err


# ----------------------------------------------------------------------
# types


def test_density_rejects_bad_input(grid64):
    with pytest.raises(ValueError):
        Density(grid64, 2.0 * np.ones(64))  # mass 2
    with pytest.raises(PositivityError):
        x = grid64.axis_coordinate(0)
        Density.normalized(grid64, np.abs(np.cos(x)) + 1e-12)  # touches zero


def test_tangent_density_zero_mean(grid64):
    with pytest.raises(ValueError):
        TangentDensity(grid64, np.ones(64))
    t = TangentDensity.projected(grid64, np.ones(64) + np.cos(grid64.axis_coordinate(0)))
    assert abs(grid64.integrate(t.values)) < 1e-14


def test_theta_gauges(grid64):
    x = grid64.axis_coordinate(0)
    tw = ThetaWO(grid64, 5.0 + np.cos(x))
    assert abs(grid64.integrate(tw.values)) < 1e-13
    rho = random_density(grid64, np.random.default_rng(0))
    tf = ThetaFR(grid64, 5.0 + np.cos(x), rho)
    assert abs(grid64.integrate(tf.values * rho.values)) < 1e-13


def test_wavefunction_norm_and_gauge(grid64):
    x = grid64.axis_coordinate(0)
    with pytest.raises(ValueError):
        WaveFunction(grid64, 2.0 * np.exp(1j * x))
    psi = WaveFunction.normalized(grid64, np.exp(1j * (x + 1.0)))
    assert psi.values.flat[0].imag == 0.0
    assert psi.values.flat[0].real >= 0.0


# ----------------------------------------------------------------------
# metrics


def test_fr_metric_examples(grid64):
    x = grid64.axis_coordinate(0)
    one = Density.uniform(grid64)
    zero = TangentDensity(grid64, np.zeros(64))
    a = TangentDensity.projected(grid64, np.cos(x))
    assert fr_metric(one, zero, zero) == 0.0
    assert fr_metric(one, a, a) == pytest.approx(0.5, abs=1e-13)


def test_fr_metric_pushforward_oracle(grid64):
    rng = np.random.default_rng(21)
    for _ in range(20):
        rho = random_density(grid64, rng)
        a, b = random_tangent(grid64, rng), random_tangent(grid64, rng)
        fa = a.values / (2.0 * np.sqrt(rho.values))
        fb = b.values / (2.0 * np.sqrt(rho.values))
        assert rel_err(fr_metric(rho, a, b), 4.0 * grid64.integrate(fa * fb)) < 1e-12


def test_fr_metric_positive_definite(grid64):
    rng = np.random.default_rng(22)
    rho = random_density(grid64, rng)
    a = random_tangent(grid64, rng)
    assert fr_metric(rho, a, a) > 0.0
    zero = TangentDensity(grid64, np.zeros(64))
    assert abs(fr_metric(rho, zero, zero)) < 1e-12


def test_wo_metric_examples(grid64):
    x = grid64.axis_coordinate(0)
    one = Density.uniform(grid64)
    a = TangentDensity.projected(grid64, np.cos(x))
    b = TangentDensity.projected(grid64, np.sin(2 * x))
    assert wo_metric(one, TangentDensity(grid64, np.zeros(64)), b) == 0.0
    # theta = cos x solves div(grad theta) = -cos x on the 2*pi circle
    assert wo_metric(one, a, a) == pytest.approx(0.5, abs=1e-12)


def test_wo_metric_symmetry(grid64):
    rng = np.random.default_rng(23)
    for _ in range(5):
        rho = random_density(grid64, rng)
        a, b = random_tangent(grid64, rng), random_tangent(grid64, rng)
        assert wo_metric(rho, a, b) == pytest.approx(wo_metric(rho, b, a), abs=1e-10)


def test_weighted_poisson_examples(grid64):
    x = grid64.axis_coordinate(0)
    one = Density.uniform(grid64)
    th = weighted_poisson_solve(one, -np.cos(x))
    assert np.max(np.abs(th.values - np.cos(x))) < 1e-10
    assert np.max(np.abs(weighted_poisson_solve(one, np.zeros(64)).values)) == 0.0
    with pytest.raises(ValueError):
        weighted_poisson_solve(one, np.ones(64))


def test_weighted_poisson_residual(grid64):
    rng = np.random.default_rng(29)
    for _ in range(10):
        rho = random_density(grid64, rng)
        rhs = random_tangent(grid64, rng).values
        th = weighted_poisson_solve(rho, rhs)
        res = grid64.divergence(rho.values * grid64.gradient(th.values)) - rhs
        assert grid64.l2_norm(res) < 1e-9 * max(grid64.l2_norm(rhs), 1e-30)


def test_weighted_poisson_nonconvergence():
    g = Grid(64)
    rng = np.random.default_rng(31)
    rho = random_density(g, rng)
    with pytest.raises(ConvergenceError):
        weighted_poisson_solve(rho, random_tangent(g, rng).values, maxiter=1, tol=1e-14)


# ----------------------------------------------------------------------
# gradients


def test_wo_gradient_of_entropy_is_heat_operator():
    # spectrally resolved densities: log(rho) tails must sit below the cutoff
    g = Grid(128)
    rng = np.random.default_rng(37)
    for _ in range(10):
        rho = random_density(g, rng, dev=0.2, kmax=2)
        grad = wo_gradient(pots.Entropy(), rho)
        assert np.max(np.abs(grad.values + g.laplacian(rho.values))) < 1e-9


def test_wo_gradient_trivia(grid64):
    rng = np.random.default_rng(38)
    rho = random_density(grid64, rng)
    assert np.max(np.abs(wo_gradient(pots.Zero(), rho).values)) == 0.0
    x = grid64.axis_coordinate(0)
    V = np.cos(2 * x)
    grad = wo_gradient(pots.Linear(V), Density.uniform(grid64))
    assert np.max(np.abs(grad.values + grid64.laplacian(V))) < 1e-11


def test_fr_gradient_examples(grid64):
    x = grid64.axis_coordinate(0)
    one = Density.uniform(grid64)
    assert np.max(np.abs(fr_gradient(pots.Zero(), one).values)) == 0.0
    assert np.max(np.abs(fr_gradient(pots.FisherInformation(), one).values)) < 1e-10
    V = np.cos(3 * x)
    grad = fr_gradient(pots.Linear(V), one)
    assert np.max(np.abs(grad.values - (V - grid64.integrate(V)))) < 1e-12


def test_wo_gradient_pairing_consistency(grid64):
    # metric pairing of the gradient against a reproduces <vder, a>
    rng = np.random.default_rng(39)
    U = pots.Barotropic(pots.make_state_function("polytropic", a=1.7))
    rho = random_density(grid64, rng, dev=0.2)
    a = random_tangent(grid64, rng)
    lhs = wo_metric(rho, wo_gradient(U, rho), a)
    rhs = grid64.integrate(U.vder(grid64, rho.values) * a.values)
    # and both equal the directional derivative, Richardson-extrapolated
    vals = []
    for eps in (1e-3, 5e-4):
        up = U.value(grid64, rho.values + eps * a.values)
        dn = U.value(grid64, rho.values - eps * a.values)
        vals.append((up - dn) / (2 * eps))
    extrap = (4 * vals[1] - vals[0]) / 3
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert extrap == pytest.approx(rhs, rel=1e-6)


# ----------------------------------------------------------------------
# square-root map, distance, geodesic


def test_sqrt_map_roundtrip(grid64):
    rng = np.random.default_rng(41)
    rho = random_density(grid64, rng)
    f = sqrt_map(rho)
    back = sqrt_map_inverse(grid64, f)
    assert np.max(np.abs(back.values - rho.values)) < 1e-12
    assert np.all(sqrt_map(Density.uniform(grid64)) == 1.0)
    with pytest.raises(PositivityError):
        sqrt_map_inverse(grid64, -f)
    with pytest.raises(ValueError):
        sqrt_map_inverse(grid64, 1.1 * f)


def test_fr_distance_frozen_value(grid64):
    # overlap of 1 and 1 + cos(x)/2 computed by adaptive quadrature
    x = grid64.axis_coordinate(0)
    rho1 = Density(grid64, 1.0 + 0.5 * np.cos(x))
    one = Density.uniform(grid64)
    overlap = 0.9833426507751653
    assert fr_distance(one, rho1) == pytest.approx(2.0 * np.arccos(overlap), abs=1e-12)
    assert fr_distance(one, one) == 0.0


def test_fr_distance_symmetry_triangle(grid64):
    rng = np.random.default_rng(43)
    for _ in range(10):
        r1, r2, r3 = (random_density(grid64, rng) for _ in range(3))
        assert fr_distance(r1, r2) == pytest.approx(fr_distance(r2, r1), abs=1e-12)
        assert fr_distance(r1, r3) <= fr_distance(r1, r2) + fr_distance(r2, r3) + 1e-9


def test_fr_geodesic_endpoints_and_midpoint_ode(grid64):
    x = grid64.axis_coordinate(0)
    r0 = Density.uniform(grid64)
    r1 = Density(grid64, 1.0 + 0.5 * np.cos(x))
    assert np.max(np.abs(fr_geodesic(r0, r1, 0.0).values - r0.values)) < 1e-12
    assert np.max(np.abs(fr_geodesic(r0, r1, 1.0).values - r1.values)) < 1e-12
    assert np.max(np.abs(fr_geodesic(r0, r0, 0.7).values - r0.values)) < 1e-12

    # independent oracle: integrate the second-order geodesic ODE
    # rho'' = rho'^2/(2 rho) + lam rho, lam = -1/2 integral(rho'^2/rho)
    f0, f1 = np.sqrt(r0.values), np.sqrt(r1.values)
    alpha = np.arccos(np.clip(grid64.integrate(f0 * f1), -1, 1))
    fdot0 = alpha * (f1 - np.cos(alpha) * f0) / np.sin(alpha)
    rho, drho = r0.values.copy(), 2.0 * f0 * fdot0

    def rhs(u):
        rho, drho = u
        lam = -0.5 * grid64.integrate(drho * drho / rho)
        return (drho, 0.5 * drho * drho / rho + lam * rho)

    h = 1e-4
    for _ in range(5000):
        u = (rho, drho)
        k1 = rhs(u)
        k2 = rhs((u[0] + h / 2 * k1[0], u[1] + h / 2 * k1[1]))
        k3 = rhs((u[0] + h / 2 * k2[0], u[1] + h / 2 * k2[1]))
        k4 = rhs((u[0] + h * k3[0], u[1] + h * k3[1]))
        rho = rho + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        drho = drho + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    mid = fr_geodesic(r0, r1, 0.5)
    assert np.max(np.abs(mid.values - rho)) < 1e-7


# ----------------------------------------------------------------------
# lifted metrics


def test_sasaki_metric_examples(grid64):
    x = grid64.axis_coordinate(0)
    one = Density.uniform(grid64)
    th = ThetaFR(grid64, np.zeros(64), one)
    zero = (np.zeros(64), np.zeros(64))
    assert sasaki_fr_metric(one, th, zero, zero) == 0.0
    t = (np.cos(x), np.zeros(64))
    assert sasaki_fr_metric(one, th, t, t) == pytest.approx(0.5, abs=1e-13)
    with pytest.raises(ValueError):
        sasaki_fr_metric(one, th, (np.zeros(64), np.ones(64)), zero)


def test_fubini_study_examples(grid64):
    x = grid64.axis_coordinate(0)
    psi = WaveFunction.normalized(grid64, np.ones(64, dtype=complex))
    assert abs(fubini_study_metric(psi, 1j * psi.values, 1j * psi.values)) < 1e-13
    tang = np.sqrt(2.0) * np.cos(x) * (1.0 + 0j)
    assert fubini_study_metric(psi, tang, tang) == pytest.approx(1.0, abs=1e-12)


def test_fubini_study_matches_distance_rate(grid64):
    # squared FS distance along a curve reproduces the metric, O(eps^2)
    rng = np.random.default_rng(47)
    x = grid64.axis_coordinate(0)
    base = np.exp(1j * 0.3 * np.sin(x)) * (1.0 + 0.2 * np.cos(2 * x))
    psi0 = WaveFunction.normalized(grid64, base)
    dpsi = band_limited(grid64, rng) + 1j * band_limited(grid64, rng)
    speed2 = fubini_study_metric(psi0, dpsi, dpsi)

    def fs_distance(psi_a, psi_b):
        num = abs(grid64.inner(psi_a, psi_b))
        den = np.sqrt(grid64.inner(psi_a, psi_a).real * grid64.inner(psi_b, psi_b).real)
        return np.arccos(np.clip(num / den, -1.0, 1.0))

    # (d/eps)^2 = G + c1 eps + O(eps^2): extrapolate the linear term away
    ests = []
    for eps in (1e-3, 5e-4):
        d = fs_distance(psi0.values, psi0.values + eps * dpsi)
        ests.append((d / eps) ** 2)
    extrap = 2 * ests[1] - ests[0]
    assert extrap == pytest.approx(speed2, rel=1e-6)


def test_fubini_study_quarter_of_fr_on_real_slice(grid64):
    rng = np.random.default_rng(53)
    for _ in range(10):
        rho = random_density(grid64, rng)
        a = random_tangent(grid64, rng)
        psi = WaveFunction(grid64, np.sqrt(rho.values).astype(complex))
        push = a.values / (2.0 * np.sqrt(rho.values))
        fs = fubini_study_metric(psi, push.astype(complex), push.astype(complex))
        assert rel_err(fs, 0.25 * fr_metric(rho, a, a)) < 1e-10
