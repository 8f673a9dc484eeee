"""Transforms between fluid variables (rho, theta) and wave functions.

The polar map psi = sqrt(rho) exp(i theta / hbar) identifies cotangent
data over the density manifold with nonvanishing complex fields modulo a
global phase.  Its real sibling, the symmetrized Hopf-Cole map
eta_pm = sqrt(rho) exp(+-theta / (2 gamma)), linearizes viscous
Hamilton-Jacobi flows to heat flows; formally the two coincide under the
substitution gamma = -i hbar / 2 (a documentation-level remark; runtime
always uses real gamma).

Phase recovery uses continuous unwrapping swept axis by axis from grid
node 0 with a jump threshold of pi.  The per-point sign ambiguity of the
complex square root is resolved the same way.  Inputs whose phase winds
around a period are rejected: the phase is then not single-valued and
the polar map has no inverse on this class of fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .spaces import Density, PositivityError, ThetaFR, ThetaWO, WaveFunction, values_of

__all__ = [
    "WindingError",
    "MadelungParams",
    "madelung",
    "madelung_inverse",
    "madelung_pushforward",
    "canonical_symplectic",
    "projective_symplectic",
    "hopf_cole",
    "hopf_cole_inverse",
    "two_component_madelung",
    "unwrap_phase",
]

MODULUS_FLOOR = 1e-6


class WindingError(ValueError):
    """The phase of a wave function winds around a period; no single-valued angle exists."""


@dataclass(frozen=True)
class MadelungParams:
    """Transform constants: Planck-like hbar and Hopf-Cole viscosity gamma."""

    hbar: float = 2.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def madelung(rho: Density, theta, hbar: float = 2.0) -> WaveFunction:
    """Polar map (rho, theta) -> sqrt(rho) exp(i theta / hbar), gauged."""
    t = values_of(theta)
    psi = np.sqrt(rho.values) * np.exp(1j * t / hbar)
    return WaveFunction(rho.grid, psi)


def _wrap(d):
    return (d + np.pi) % (2.0 * np.pi) - np.pi


def _winding_numbers(grid: Grid, phase: np.ndarray):
    """Winding number of the raw phase along each axis through node 0."""
    out = []
    for ax in range(grid.dim):
        idx = [0] * grid.dim
        idx[ax] = slice(None)
        line = phase[tuple(idx)]
        jumps = _wrap(np.diff(line, append=line[:1]))
        out.append(float(np.sum(jumps) / (2.0 * np.pi)))
    return out


def unwrap_phase(grid: Grid, psi: np.ndarray) -> np.ndarray:
    """Continuously unwrapped angle of psi, anchored at grid node 0.

    Raises WindingError when the phase accumulates a full turn along any
    axis (endpoint mismatch above the pi threshold).
    """
    phase = np.angle(psi)
    for w in _winding_numbers(grid, phase):
        if abs(w) > 0.5:
            raise WindingError(f"phase winds {w:+.1f} turns along a period; no single-valued angle")
    for ax in range(grid.dim):
        phase = np.unwrap(phase, axis=ax)
    return phase


def madelung_inverse(psi, hbar: float = 2.0, rho_pair: bool = False):
    """Recover (rho, theta) from a nonvanishing wave function.

    Returns ``(Density, ThetaWO)`` by default, or ``(Density, ThetaFR)``
    when ``rho_pair`` is set; theta is defined modulo a constant and
    comes back in the requested gauge.
    """
    grid = psi.grid if hasattr(psi, "grid") else None
    if grid is None:
        raise ValueError("madelung_inverse needs a WaveFunction (grid-carrying) input")
    v = values_of(psi)
    mod = np.abs(v)
    if np.min(mod) <= MODULUS_FLOOR:
        raise PositivityError(
            f"wave function modulus min {np.min(mod):.3e} at or below {MODULUS_FLOOR:.0e}; polar inverse undefined"
        )
    rho = Density.normalized(grid, mod * mod)
    theta = hbar * unwrap_phase(grid, v)
    if rho_pair:
        return rho, ThetaFR(grid, theta, rho)
    return rho, ThetaWO(grid, theta)


def madelung_pushforward(rho: Density, theta, drho, dtheta, hbar: float = 2.0) -> np.ndarray:
    """Differential of the polar map applied to a tangent (drho, dtheta)."""
    t = values_of(theta)
    dr = values_of(drho)
    dt = values_of(dtheta)
    root = np.sqrt(rho.values)
    return (dr / (2.0 * root) + 1j * root * dt / hbar) * np.exp(1j * t / hbar)


def canonical_symplectic(tangent1, tangent2, grid: Grid) -> float:
    """Canonical two-form on cotangent data: integrate(dr1*dt2 - dr2*dt1)."""
    dr1, dt1 = (values_of(x) for x in tangent1)
    dr2, dt2 = (values_of(x) for x in tangent2)
    return float(grid.integrate(dr1 * dt2 - dr2 * dt1))


def projective_symplectic(dpsi1, dpsi2, hbar: float, grid: Grid) -> float:
    """Symplectic form on wave-function tangents, 2 hbar Im<dpsi1, dpsi2>.

    The orientation is fixed so that the polar-map pullback reproduces
    the canonical form above with a plus sign.
    """
    d1 = np.asarray(values_of(dpsi1), dtype=complex)
    d2 = np.asarray(values_of(dpsi2), dtype=complex)
    # Im(conj(d1) d2) spelled out in real arithmetic: exactly antisymmetric
    imag = d1.real * d2.imag - d1.imag * d2.real
    return float(2.0 * hbar * grid.integrate(imag))


# ----------------------------------------------------------------------
# Hopf-Cole


def hopf_cole(rho: Density, theta, gamma: float):
    """Symmetrized Hopf-Cole pair eta_pm = sqrt(rho) exp(+-theta/(2 gamma))."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    t = values_of(theta)
    root = np.sqrt(rho.values)
    return root * np.exp(t / (2.0 * gamma)), root * np.exp(-t / (2.0 * gamma))


def hopf_cole_inverse(grid: Grid, eta_plus, eta_minus, gamma: float):
    """Invert the Hopf-Cole pair: rho = eta+ eta-, theta = gamma log(eta+/eta-)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    ep = np.asarray(values_of(eta_plus), dtype=float)
    em = np.asarray(values_of(eta_minus), dtype=float)
    if np.min(ep) <= 0 or np.min(em) <= 0:
        raise PositivityError("Hopf-Cole inverse needs strictly positive components")
    rho = Density.normalized(grid, ep * em)
    theta = gamma * np.log(ep / em)
    return rho, ThetaWO(grid, theta)


def two_component_madelung(grid: Grid, rho1, theta1, rho2, theta2, hbar: float = 2.0):
    """Componentwise polar map into a pair of complex fields.

    The component weights are positive scalar fields (not unit-mass
    densities; their masses split the total).  Callers imposing the
    pointwise constraint rho1 + rho2 = 1 get a unit-modulus spinor
    suitable for the incompressible solver.
    """
    from .quantum import TwoComponentWave  # local import to avoid a cycle

    r1 = np.asarray(values_of(rho1), dtype=float)
    r2 = np.asarray(values_of(rho2), dtype=float)
    if np.min(r1) <= 0 or np.min(r2) <= 0:
        raise PositivityError("component weights must be strictly positive")
    t1, t2 = values_of(theta1), values_of(theta2)
    psi1 = np.sqrt(r1) * np.exp(1j * t1 / hbar)
    psi2 = np.sqrt(r2) * np.exp(1j * t2 / hbar)
    return TwoComponentWave(grid, psi1, psi2)
