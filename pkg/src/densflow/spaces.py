"""The density manifold and its two geometries.

Probability densities are strictly positive unit-mass scalar fields;
their tangent vectors are zero-mean fields.  Two Riemannian structures
are provided:

* the optimal-transport (Otto) metric, evaluated through a
  density-weighted elliptic solve, and
* the Fisher-Rao metric, which the square-root map turns into (four
  times) the round metric of the unit sphere in L2.

Cotangent variables come in two gauges and are kept as distinct types so
they cannot be mixed up silently: ``ThetaWO`` is normalized against the
volume form (zero mu-mean) while ``ThetaFR`` is normalized against its
paired density (zero rho-weighted mean).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

__all__ = [
    "PositivityError",
    "ConvergenceError",
    "Density",
    "TangentDensity",
    "ThetaWO",
    "ThetaFR",
    "WaveFunction",
    "fr_metric",
    "wo_metric",
    "weighted_poisson_solve",
    "wo_gradient",
    "fr_gradient",
    "sqrt_map",
    "sqrt_map_inverse",
    "fr_distance",
    "fr_geodesic",
    "sasaki_fr_metric",
    "fubini_study_metric",
]

UNIT_MASS_TOL = 1e-10
ZERO_MEAN_TOL = 1e-10
POSITIVITY_FLOOR = 1e-8
UNIT_NORM_TOL = 1e-10


class PositivityError(ValueError):
    """A density (or wave-function modulus) dropped below its positivity floor."""


class ConvergenceError(RuntimeError):
    """The preconditioned CG solve for the weighted Poisson problem stalled."""


def values_of(x) -> np.ndarray:
    """Underlying node values of a typed field or a bare array."""
    return np.asarray(getattr(x, "values", x))


# ----------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class Density:
    """Strictly positive scalar field of unit total mass."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = self.grid.check_scalar(self.values)
        object.__setattr__(self, "values", v.astype(float, copy=False))
        if np.min(v) <= POSITIVITY_FLOOR:
            raise PositivityError(f"density min {np.min(v):.3e} is at or below floor {POSITIVITY_FLOOR:.0e}")
        mass = self.grid.integrate(v)
        if abs(mass - 1.0) > UNIT_MASS_TOL:
            raise ValueError(f"density mass {mass!r} deviates from 1 beyond {UNIT_MASS_TOL:.0e}")

    @classmethod
    def normalized(cls, grid: Grid, values) -> "Density":
        """Scale a positive field to unit mass and wrap it."""
        v = np.asarray(values, dtype=float)
        mass = grid.integrate(v)
        if mass <= 0:
            raise PositivityError("cannot normalize a field of non-positive mass")
        return cls(grid, v / mass)

    @classmethod
    def uniform(cls, grid: Grid) -> "Density":
        return cls(grid, np.ones(grid.shape))


@dataclass(frozen=True, eq=False)
class TangentDensity:
    """Zero-mean scalar field; a tangent vector to the density manifold."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = self.grid.check_scalar(self.values)
        object.__setattr__(self, "values", v.astype(float, copy=False))
        mean = self.grid.integrate(v)
        if abs(mean) > ZERO_MEAN_TOL:
            raise ValueError(f"tangent density mean {mean:.3e} exceeds {ZERO_MEAN_TOL:.0e}")

    @classmethod
    def projected(cls, grid: Grid, values) -> "TangentDensity":
        v = np.asarray(values, dtype=float)
        return cls(grid, v - grid.integrate(v))


@dataclass(frozen=True, eq=False)
class ThetaWO:
    """Cotangent scalar in the volume-form gauge: integral against mu is zero."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = self.grid.check_scalar(self.values).astype(float, copy=False)
        object.__setattr__(self, "values", v - self.grid.integrate(v))


@dataclass(frozen=True, eq=False)
class ThetaFR:
    """Cotangent scalar gauged against a paired density: integral of theta*rho is zero."""

    grid: Grid
    values: np.ndarray
    rho: Density = field(repr=False)

    def __post_init__(self):
        v = self.grid.check_scalar(self.values).astype(float, copy=False)
        if self.rho.grid != self.grid:
            raise ValueError("theta and its paired density live on different grids")
        shift = self.grid.integrate(v * self.rho.values)
        object.__setattr__(self, "values", v - shift)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Unit-L2-norm complex field with the global phase fixed.

    The projective gauge makes the value at grid node 0 real and
    nonnegative, which pins a canonical representative of the phase
    coset.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        self.grid.check_scalar(v.real)
        norm = self.grid.l2_norm(v)
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"wave function norm {norm!r} deviates from 1 beyond {UNIT_NORM_TOL:.0e}")
        anchor = v.flat[0]
        if abs(anchor) > 0:
            v = v * (np.conj(anchor) / abs(anchor))
            v.flat[0] = abs(v.flat[0])  # kill the roundoff imaginary part
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid: Grid, values) -> "WaveFunction":
        v = np.asarray(values, dtype=complex)
        norm = grid.l2_norm(v)
        if norm == 0:
            raise ValueError("cannot normalize the zero wave function")
        return cls(grid, v / norm)

    def density(self) -> Density:
        return Density(self.grid, np.abs(self.values) ** 2)


# ----------------------------------------------------------------------
# metrics


def fr_metric(rho: Density, a: TangentDensity, b: TangentDensity) -> float:
    """Fisher-Rao pairing integrate((a/rho)(b/rho) rho)."""
    g = _common_grid(rho, a, b)
    return float(g.integrate(a.values * b.values / rho.values))


def weighted_poisson_solve(rho: Density, rhs, tol: float = 1e-10, maxiter: int = 500) -> ThetaWO:
    """Solve div(rho grad theta) = rhs for the zero-mean theta.

    Preconditioned conjugate gradients on -div(rho grad .), which is
    symmetric positive definite on zero-mean fields; the constant
    coefficient inverse Laplacian is the preconditioner (near exact for
    rho close to one).
    """
    g = rho.grid
    b = -np.asarray(values_of(rhs), dtype=float)
    mean = g.integrate(b)
    if abs(mean) > ZERO_MEAN_TOL:
        raise ValueError(f"weighted Poisson solve needs a zero-mean right-hand side, mean {mean:.3e}")
    b_norm = g.l2_norm(b)
    if b_norm == 0.0:
        return ThetaWO(g, np.zeros(g.shape))

    rv = rho.values

    def apply(th):
        return -g.divergence(rv * g.gradient(th))

    def precond(r):
        return -g.inverse_laplacian(r - g.integrate(r))

    x = np.zeros(g.shape)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = g.integrate(r * z)
    for _ in range(maxiter):
        Ap = apply(p)
        alpha = rz / g.integrate(p * Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        if g.l2_norm(r) <= tol * b_norm:
            return ThetaWO(g, x)
        z = precond(r)
        rz_new = g.integrate(r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"weighted Poisson solve did not reach tol {tol:.1e} in {maxiter} iterations "
        "(the density weight is likely ill conditioned)"
    )


def wo_metric(rho: Density, a: TangentDensity, b: TangentDensity) -> float:
    """Otto (optimal transport) pairing via the weighted elliptic solve."""
    g = _common_grid(rho, a, b)
    if g.l2_norm(a.values) == 0.0 or g.l2_norm(b.values) == 0.0:
        return 0.0
    theta_a = weighted_poisson_solve(rho, -a.values)
    return float(g.integrate(theta_a.values * b.values))


def wo_gradient(potential, rho: Density) -> TangentDensity:
    """Otto-metric gradient: minus the rho-weighted Laplacian of the variational derivative."""
    g = rho.grid
    v = potential.vder(g, rho.values)
    w = g.divergence(rho.values * g.gradient(v))
    return TangentDensity.projected(g, -w)


def fr_gradient(potential, rho: Density) -> TangentDensity:
    """Fisher-Rao gradient: (dU/drho) rho recentred to zero mean."""
    g = rho.grid
    v = potential.vder(g, rho.values)
    out = v * rho.values
    return TangentDensity.projected(g, out)


# ----------------------------------------------------------------------
# square-root map, distance, geodesics


def sqrt_map(rho: Density) -> np.ndarray:
    """Pointwise square root; lands on the positive part of the unit L2 sphere."""
    return np.sqrt(rho.values)


def sqrt_map_inverse(grid: Grid, f) -> Density:
    f = np.asarray(values_of(f), dtype=float)
    if np.min(f) <= 0:
        raise PositivityError("square-root inverse needs a strictly positive field")
    norm2 = grid.integrate(f * f)
    if abs(norm2 - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"square-root inverse needs a unit-norm field, got norm^2 {norm2!r}")
    return Density(grid, f * f)


def fr_distance(rho0: Density, rho1: Density) -> float:
    """Spherical (Bhattacharyya-angle) distance 2*arccos integrate(sqrt(rho0 rho1))."""
    g = _common_grid(rho0, rho1)
    c = g.integrate(np.sqrt(rho0.values * rho1.values))
    if c > 1.0 + 1e-12 or c < -1e-12:
        raise ValueError(f"cosine overlap {c!r} outside [0, 1]; inputs are not valid densities")
    return float(2.0 * np.arccos(np.clip(c, 0.0, 1.0)))


def fr_geodesic(rho0: Density, rho1: Density, t: float) -> Density:
    """Point at parameter t of the Fisher-Rao geodesic from rho0 to rho1.

    Computed as the squared spherical interpolation of the square roots;
    endpoints are reproduced exactly.
    """
    g = _common_grid(rho0, rho1)
    f0, f1 = np.sqrt(rho0.values), np.sqrt(rho1.values)
    c = np.clip(g.integrate(f0 * f1), -1.0, 1.0)
    alpha = np.arccos(c)
    if alpha < 1e-14:
        return Density(g, rho0.values.copy())
    s = np.sin(alpha)
    f = (np.sin((1.0 - t) * alpha) * f0 + np.sin(t * alpha) * f1) / s
    return Density.normalized(g, f * f)


# ----------------------------------------------------------------------
# lifted metrics


THETA_GAUGE_TOL = 1e-8


def sasaki_fr_metric(rho: Density, theta, tangent1, tangent2) -> float:
    """Cotangent lift of the Fisher-Rao metric.

    ``tangent_i = (drho_i, dtheta_i)`` with the gauge constraint
    integrate(dtheta_i * rho) = 0.  The base point's theta does not enter
    the formula but is part of the signature to fix the footpoint.
    """
    g = rho.grid
    dr1, dt1 = (values_of(x) for x in tangent1)
    dr2, dt2 = (values_of(x) for x in tangent2)
    for dt in (dt1, dt2):
        gauge = g.integrate(dt * rho.values)
        if abs(gauge) > THETA_GAUGE_TOL:
            raise ValueError(f"theta-dot gauge integrate(dtheta*rho) = {gauge:.3e} exceeds {THETA_GAUGE_TOL:.0e}")
    rv = rho.values
    return float(g.integrate((dr1 * dr2 / rv ** 2 + dt1 * dt2) * rv))


def fubini_study_metric(psi, dpsi1, dpsi2) -> float:
    """Polarized Fubini-Study pairing of two tangents at a wave function."""
    g = psi.grid if hasattr(psi, "grid") else None
    if g is None:
        raise ValueError("fubini_study_metric needs a WaveFunction (or grid-carrying) base point")
    p = values_of(psi)
    d1 = np.asarray(values_of(dpsi1), dtype=complex)
    d2 = np.asarray(values_of(dpsi2), dtype=complex)
    nn = g.inner(p, p).real
    t1 = g.inner(d1, d2).real / nn
    t2 = (g.inner(d1, p) * g.inner(p, d2)).real / nn ** 2
    return float(t1 - t2)


def _common_grid(*typed):
    g0 = typed[0].grid
    for t in typed[1:]:
        if t.grid != g0:
            raise ValueError("fields live on different grids")
    return g0
