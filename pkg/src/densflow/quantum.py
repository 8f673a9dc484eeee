"""Split-step solvers for wave equations on periodic domains.

``step_schrodinger`` is the standard Strang split: half a potential
phase, an exact kinetic Fourier multiplier, half a potential phase.  The
factors are unitary, so the L2 norm is preserved to roundoff.

``step_ise`` advances a two-component unit-modulus spinor: a free
kinetic step per component, then a pressure projection that removes the
divergent part of the extracted velocity through a common phase, then a
pointwise renormalization back to |Psi| = 1.  The pressure phase is the
minimal operator-splitting realization of the pointwise constraint; its
quality is measured by the divergence residual it leaves, not assumed.

``step_heat`` applies the exact diffusion multiplier; backward runs
(negative gamma) are meaningful only for band-limited data over a
bounded horizon, and amplification factors are clipped at 1e6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .potentials import Nonlinearity
from .spaces import PositivityError, values_of

__all__ = [
    "TwoComponentWave",
    "step_schrodinger",
    "schrodinger_hamiltonian",
    "step_heat",
    "step_ise",
    "velocity_from_psi",
]

_MODULUS_FLOOR = 1e-6
_BACKWARD_CLIP = 1e6


@dataclass(frozen=True, eq=False)
class TwoComponentWave:
    """Pair of complex fields with pointwise norm |psi1|^2 + |psi2|^2."""

    grid: Grid
    psi1: np.ndarray
    psi2: np.ndarray

    def __post_init__(self):
        p1 = np.asarray(self.psi1, dtype=complex)
        p2 = np.asarray(self.psi2, dtype=complex)
        self.grid.check_scalar(p1.real)
        self.grid.check_scalar(p2.real)
        object.__setattr__(self, "psi1", p1)
        object.__setattr__(self, "psi2", p2)

    def pointwise_norm2(self) -> np.ndarray:
        return np.abs(self.psi1) ** 2 + np.abs(self.psi2) ** 2

    def max_unit_defect(self) -> float:
        return float(np.max(np.abs(self.pointwise_norm2() - 1.0)))


def step_schrodinger(psi, V, nonlinearity: Nonlinearity | None, hbar: float, mass: float,
                     dt: float, grid: Grid | None = None) -> np.ndarray:
    """Strang split step of i hbar psi' = -(hbar^2/2m) lap psi + (V + f(|psi|^2)) psi."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = grid if grid is not None else psi.grid
    p = np.asarray(values_of(psi), dtype=complex)
    Vv = 0.0 if V is None else np.asarray(values_of(V), dtype=float)

    def potential_phase(q, tau):
        tot = Vv if nonlinearity is None else Vv + nonlinearity.f(np.abs(q) ** 2)
        return q * np.exp(-1j * tot * tau / hbar)

    kinetic = np.exp(-1j * hbar * g._k2_c * dt / (2.0 * mass))
    p = potential_phase(p, 0.5 * dt)
    p = g.ifft(g.fft(p) * kinetic, real=False)
    p = potential_phase(p, 0.5 * dt)
    return p


def schrodinger_hamiltonian(psi, V, nonlinearity: Nonlinearity | None, hbar: float,
                            mass: float, grid: Grid | None = None) -> float:
    """(hbar^2/2m) |grad psi|^2 + integrate(V |psi|^2 + F(|psi|^2))."""
    g = grid if grid is not None else psi.grid
    p = np.asarray(values_of(psi), dtype=complex)
    gp = g.gradient(p)
    kinetic = (hbar ** 2 / (2.0 * mass)) * g.integrate(np.sum(np.abs(gp) ** 2, axis=0))
    dens = np.abs(p) ** 2
    pot = 0.0 if V is None else g.integrate(np.asarray(values_of(V)) * dens)
    if nonlinearity is not None:
        pot = pot + g.integrate(nonlinearity.F(dens))
    return float(kinetic.real + pot)


def step_heat(eta, gamma: float, dt: float, grid: Grid | None = None) -> np.ndarray:
    """Exact spectral step of eta' = gamma lap eta.

    Negative gamma (or negative dt) runs the flow backward; the
    amplification of each mode is clipped at 1e6 to acknowledge the
    ill-posedness outside band-limited data.
    """
    g = grid if grid is not None else eta.grid
    e = np.asarray(values_of(eta))
    cplx = np.iscomplexobj(e)
    k2 = g._k2_c if cplx else g._k2_r
    mult = np.minimum(np.exp(-float(gamma) * k2 * float(dt)), _BACKWARD_CLIP)
    return g.ifft(g.fft(e) * mult, real=not cplx)


def velocity_from_psi(Psi, hbar: float = 1.0) -> np.ndarray:
    """Momentum-map velocity hbar Im(conj(psi1) grad psi1 + conj(psi2) grad psi2) / |Psi|^2.

    Accepts a TwoComponentWave or a single complex field (treated as the
    pair (psi, 0)).
    """
    if isinstance(Psi, TwoComponentWave):
        g = Psi.grid
        comps = (Psi.psi1, Psi.psi2)
    else:
        g = Psi.grid
        comps = (np.asarray(values_of(Psi), dtype=complex),)
    norm2 = sum(np.abs(c) ** 2 for c in comps)
    if np.min(norm2) <= _MODULUS_FLOOR ** 2:
        raise PositivityError("velocity undefined where the spinor modulus vanishes")
    num = 0.0
    for c in comps:
        gc = g.gradient(c)
        num = num + np.imag(np.conj(c)[None, ...] * gc)
    return hbar * num / norm2[None, ...]


def step_ise(Psi: TwoComponentWave, hbar: float, dt: float, return_diagnostics: bool = False):
    """Incompressible split step for a unit-modulus two-component wave.

    1. free kinetic multiplier exp(-i |k|^2 dt) on each component,
    2. pressure projection: extract v, solve lap q = div v / hbar,
       multiply both components by exp(-i q),
    3. pointwise renormalization to |Psi| = 1.

    The displayed equation corresponds to hbar = 1; the hbar scaling of
    the projection keeps the corrected velocity exactly divergence-free
    at any hbar.
    """
    g = Psi.grid
    if g.dim not in (2, 3):
        raise ValueError("the incompressible solver runs on 2D or 3D grids")
    kinetic = np.exp(-1j * g._k2_c * float(dt))
    p1 = g.ifft(g.fft(Psi.psi1) * kinetic, real=False)
    p2 = g.ifft(g.fft(Psi.psi2) * kinetic, real=False)

    stepped = TwoComponentWave(g, p1, p2)
    mod = np.sqrt(stepped.pointwise_norm2())
    if np.min(mod) <= _MODULUS_FLOOR:
        raise PositivityError(f"spinor modulus collapsed to {np.min(mod):.3e} before renormalization")

    v = velocity_from_psi(stepped, hbar)
    div_v = g.divergence(v)
    q = g.inverse_laplacian((div_v - g.integrate(div_v)) / hbar)
    phase = np.exp(-1j * q)
    p1, p2 = p1 * phase, p2 * phase

    projected = TwoComponentWave(g, p1, p2)
    out = TwoComponentWave(g, p1 / mod, p2 / mod)
    if return_diagnostics:
        div_after = g.divergence(velocity_from_psi(projected, hbar))
        diag = {
            "div_residual": g.l2_norm(div_after),
            "min_modulus": float(np.min(mod)),
            "max_unit_defect": out.max_unit_defect(),
        }
        return out, diag
    return out
