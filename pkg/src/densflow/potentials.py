"""Potential functionals on densities with values and variational derivatives.

Every potential exposes ``value(grid, rho)`` and ``vder(grid, rho)`` on
raw node arrays.  Variational derivatives are defined modulo constants
(cotangent elements are function cosets), so ``vder`` always returns the
zero-mean representative.  Potentials can be scaled and summed with the
usual operators, e.g. ``0.25 * hbar**2 * FisherInformation() + Linear(V)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .spaces import PositivityError, values_of

__all__ = [
    "Potential",
    "Zero",
    "Linear",
    "Quadratic",
    "Barotropic",
    "Gravity",
    "FisherInformation",
    "Entropy",
    "NonlinearityPotential",
    "StateFunction",
    "make_state_function",
    "TwoArgStateFunction",
    "make_two_arg_state",
    "Nonlinearity",
    "make_nonlinearity",
    "work_function",
    "pressure",
]


def _check_positive(rho: np.ndarray, who: str):
    if np.min(rho) <= 0.0:
        raise PositivityError(f"{who} needs a strictly positive density")


class Potential:
    """Base class; concrete potentials implement raw_value and raw_vder."""

    #: coefficient of the Fisher-information part, used by steppers that
    #: integrate its constant-coefficient linearization exactly
    fisher_scale: float = 0.0

    def raw_value(self, grid: Grid, rho: np.ndarray) -> float:
        raise NotImplementedError

    def raw_vder(self, grid: Grid, rho: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, grid: Grid, rho) -> float:
        return float(self.raw_value(grid, np.asarray(values_of(rho), dtype=float)))

    def vder(self, grid: Grid, rho) -> np.ndarray:
        """Zero-mean variational derivative at rho."""
        v = self.raw_vder(grid, np.asarray(values_of(rho), dtype=float))
        return v - grid.integrate(v)

    def __add__(self, other):
        if not isinstance(other, Potential):
            return NotImplemented
        return SumPotential((self, other))

    def __mul__(self, c):
        return ScaledPotential(float(c), self)

    __rmul__ = __mul__

    def __neg__(self):
        return ScaledPotential(-1.0, self)


@dataclass(frozen=True)
class Zero(Potential):
    def raw_value(self, grid, rho):
        return 0.0

    def raw_vder(self, grid, rho):
        return np.zeros(grid.shape)


@dataclass(frozen=True, eq=False)
class Linear(Potential):
    """integrate(V * rho) for a fixed scalar field V."""

    V: np.ndarray

    def raw_value(self, grid, rho):
        return grid.integrate(np.asarray(self.V) * rho)

    def raw_vder(self, grid, rho):
        return np.asarray(self.V, dtype=float) + np.zeros(grid.shape)


@dataclass(frozen=True)
class Quadratic(Potential):
    """integrate(rho^2) / 2; the shallow-water potential."""

    def raw_value(self, grid, rho):
        return 0.5 * grid.integrate(rho * rho)

    def raw_vder(self, grid, rho):
        return rho.copy()


@dataclass(frozen=True, eq=False)
class Barotropic(Potential):
    """integrate(e(rho) * rho) for an internal-energy state function e."""

    state: "StateFunction"

    def raw_value(self, grid, rho):
        _check_positive(rho, "barotropic potential")
        return grid.integrate(self.state.e(rho) * rho)

    def raw_vder(self, grid, rho):
        _check_positive(rho, "barotropic potential")
        return self.state.e(rho) + rho * self.state.de(rho)


@dataclass(frozen=True)
class Gravity(Potential):
    """Self-consistent continuum gravity 2 pi G integrate(rho * invlap(rho)).

    On a closed domain the inverse Laplacian acts on the mean-zero part
    rho - 1; that is the only self-consistent choice and it makes the
    functional well defined.
    """

    G: float = 1.0

    def raw_value(self, grid, rho):
        dev = rho - grid.integrate(rho)
        return 2.0 * np.pi * self.G * grid.integrate(dev * grid.inverse_laplacian(dev))

    def raw_vder(self, grid, rho):
        dev = rho - grid.integrate(rho)
        return 4.0 * np.pi * self.G * grid.inverse_laplacian(dev)


@dataclass(frozen=True)
class FisherInformation(Potential):
    """scale/2 * integrate(|grad rho|^2 / rho); the quantum-pressure functional.

    Its variational derivative has the compact form -2 lap(sqrt rho)/sqrt rho.
    A negative scale gives the entropic/backward-smoothing variant.
    """

    scale: float = 1.0

    @property
    def fisher_scale(self):
        return self.scale

    def raw_value(self, grid, rho):
        _check_positive(rho, "Fisher information")
        g = grid.gradient(rho)
        return 0.5 * self.scale * grid.integrate(np.sum(g * g, axis=0) / rho)

    def raw_vder(self, grid, rho):
        _check_positive(rho, "Fisher information")
        f = np.sqrt(rho)
        return -2.0 * self.scale * grid.laplacian(f) / f


@dataclass(frozen=True)
class Entropy(Potential):
    """Relative entropy integrate(rho log rho); vder = log(rho) mod constants."""

    def raw_value(self, grid, rho):
        _check_positive(rho, "entropy")
        return grid.integrate(rho * np.log(rho))

    def raw_vder(self, grid, rho):
        _check_positive(rho, "entropy")
        return np.log(rho)


@dataclass(frozen=True, eq=False)
class NonlinearityPotential(Potential):
    """integrate(F(rho)) for a catalog nonlinearity with primitive F.

    This is the fluid-side counterpart of an NLS self-interaction term;
    its variational derivative is f(rho).
    """

    nonlinearity: "Nonlinearity"

    def raw_value(self, grid, rho):
        return grid.integrate(self.nonlinearity.F(rho))

    def raw_vder(self, grid, rho):
        return self.nonlinearity.f(rho)


@dataclass(frozen=True, eq=False)
class ScaledPotential(Potential):
    c: float
    base: Potential

    @property
    def fisher_scale(self):
        return self.c * self.base.fisher_scale

    def raw_value(self, grid, rho):
        return self.c * self.base.raw_value(grid, rho)

    def raw_vder(self, grid, rho):
        return self.c * self.base.raw_vder(grid, rho)


@dataclass(frozen=True, eq=False)
class SumPotential(Potential):
    parts: tuple

    @property
    def fisher_scale(self):
        return sum(p.fisher_scale for p in self.parts)

    def raw_value(self, grid, rho):
        return sum(p.raw_value(grid, rho) for p in self.parts)

    def raw_vder(self, grid, rho):
        out = np.zeros(grid.shape)
        for p in self.parts:
            out = out + p.raw_vder(grid, rho)
        return out

    def __add__(self, other):
        if not isinstance(other, Potential):
            return NotImplemented
        return SumPotential(self.parts + (other,))


# ----------------------------------------------------------------------
# barotropic state functions e(rho)


@dataclass(frozen=True)
class StateFunction:
    """Internal energy per unit mass e(rho) with its derivative, by name."""

    name: str
    _e: callable
    _de: callable

    def e(self, rho):
        return self._e(np.asarray(rho, dtype=float))

    def de(self, rho):
        return self._de(np.asarray(rho, dtype=float))


def make_state_function(kind: str, **params) -> StateFunction:
    """Named catalog: ``shallow``, ``polytropic`` (exponent a), ``constant`` (c)."""
    if kind == "shallow":
        return StateFunction("shallow", lambda r: 0.5 * r, lambda r: 0.5 * np.ones_like(r))
    if kind == "polytropic":
        a = float(params.get("a", 2.0))
        return StateFunction(
            f"polytropic(a={a})",
            lambda r: r ** (a - 1.0),
            lambda r: (a - 1.0) * r ** (a - 2.0),
        )
    if kind == "constant":
        c = float(params.get("c", 1.0))
        return StateFunction(f"constant(c={c})", lambda r: c * np.ones_like(r), lambda r: np.zeros_like(r))
    raise ValueError(f"unknown state function kind {kind!r}")


def work_function(state: StateFunction, rho) -> np.ndarray:
    """Thermodynamical work W = e'(rho) rho + e(rho); grad W = grad P / rho."""
    r = np.asarray(values_of(rho), dtype=float)
    return state.de(r) * r + state.e(r)


def pressure(state: StateFunction, rho) -> np.ndarray:
    """Barotropic pressure P = e'(rho) rho^2."""
    r = np.asarray(values_of(rho), dtype=float)
    return state.de(r) * r * r


# ----------------------------------------------------------------------
# two-argument internal energies e(rho, sigma) for non-barotropic flow


@dataclass(frozen=True)
class TwoArgStateFunction:
    name: str
    _e: callable
    _de_drho: callable
    _de_dsigma: callable

    def e(self, rho, sigma):
        return self._e(np.asarray(rho, float), np.asarray(sigma, float))

    def de_drho(self, rho, sigma):
        return self._de_drho(np.asarray(rho, float), np.asarray(sigma, float))

    def de_dsigma(self, rho, sigma):
        return self._de_dsigma(np.asarray(rho, float), np.asarray(sigma, float))

    def pressure(self, rho, sigma):
        r = np.asarray(rho, float)
        s = np.asarray(sigma, float)
        return r * r * self.de_drho(r, s) + s * r * self.de_dsigma(r, s)


def make_two_arg_state(kind: str, **params) -> TwoArgStateFunction:
    """Catalog: ``ideal`` (e = sigma rho^(a-2)) and ``shallow`` (sigma-independent)."""
    if kind == "ideal":
        a = float(params.get("a", 2.0))
        return TwoArgStateFunction(
            f"ideal(a={a})",
            lambda r, s: s * r ** (a - 2.0),
            lambda r, s: (a - 2.0) * s * r ** (a - 3.0),
            lambda r, s: r ** (a - 2.0),
        )
    if kind == "shallow":
        return TwoArgStateFunction(
            "shallow",
            lambda r, s: 0.5 * r,
            lambda r, s: 0.5 * np.ones_like(r),
            lambda r, s: np.zeros_like(r),
        )
    raise ValueError(f"unknown two-argument state kind {kind!r}")


# ----------------------------------------------------------------------
# NLS nonlinearity catalog


@dataclass(frozen=True)
class Nonlinearity:
    """Pointwise self-interaction f(a) with primitive F(a), by name."""

    name: str
    _f: callable
    _F: callable

    def f(self, a):
        return self._f(np.asarray(a, dtype=float))

    def F(self, a):
        return self._F(np.asarray(a, dtype=float))


def make_nonlinearity(kind: str, kappa: float = 1.0) -> Nonlinearity:
    """Catalog: ``none``, ``kerr`` (f = kappa a), ``quartic`` (f = (a-1)^2 / 2)."""
    if kind == "none":
        return Nonlinearity("none", lambda a: np.zeros_like(a), lambda a: np.zeros_like(a))
    if kind == "kerr":
        k = float(kappa)
        return Nonlinearity(f"kerr(kappa={k})", lambda a: k * a, lambda a: 0.5 * k * a * a)
    if kind == "quartic":
        return Nonlinearity("quartic", lambda a: 0.5 * (a - 1.0) ** 2, lambda a: (a - 1.0) ** 3 / 6.0)
    raise ValueError(f"unknown nonlinearity kind {kind!r}")
