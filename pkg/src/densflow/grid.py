"""Periodic grids and spectral calculus on flat tori.

Conventions used throughout the package:

* Domains are periodic boxes [0, L_1) x ... x [0, L_d) sampled on N_i
  equispaced nodes per axis.  N_i must be a power of two, >= 16; the
  default period is 2*pi on every axis.
* The quadrature weight is w = prod(1/N_i), so the volume form carries
  total mass one: ``integrate(1) == 1`` exactly.  This normalization
  removes all 2*pi factors from metric and energy formulas.
* Real fields travel through the real-to-complex FFT (rfftn along the
  last axis); complex fields use the full FFT.
* Nyquist modes carry no sign information on an even grid and are zeroed
  in odd-order derivatives.
* Dealiasing follows the 2/3 rule: modes with any |n_i| > N_i/3 are cut.

Fields are plain numpy arrays whose shape matches the owning grid;
vector fields stack components along a leading axis of length ``dim``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "Grid",
    "SpectralBlowupError",
    "save_field",
    "load_field",
]


class SpectralBlowupError(RuntimeError):
    """Raised when the upper spectrum carries too much energy to trust a run."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class Grid:
    """Periodic rectangular lattice with unit-mass quadrature and FFT calculus."""

    def __init__(self, shape, lengths=None):
        shape = tuple(int(n) for n in np.atleast_1d(shape))
        if not 1 <= len(shape) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(shape)}")
        for n in shape:
            if n < 16 or not _is_power_of_two(n):
                raise ValueError(f"points per axis must be a power of two >= 16, got {n}")
        if lengths is None:
            lengths = (2.0 * np.pi,) * len(shape)
        lengths = tuple(float(L) for L in np.atleast_1d(lengths))
        if len(lengths) != len(shape):
            raise ValueError("lengths must match grid dimension")
        if any(L <= 0 for L in lengths):
            raise ValueError("period lengths must be positive")

        self.shape = shape
        self.dim = len(shape)
        self.lengths = lengths
        self.spacings = tuple(L / n for L, n in zip(lengths, shape))
        self.weight = float(np.prod([1.0 / n for n in shape]))

        # Wavenumbers, broadcastable over each FFT layout.  The `_c` arrays
        # follow the full complex layout, `_r` the rfftn layout (last axis
        # halved).  `*_odd` variants have the Nyquist plane zeroed for use
        # in odd-order derivatives.
        self._k_c, self._k_c_odd = self._wavenumbers(real=False)
        self._k_r, self._k_r_odd = self._wavenumbers(real=True)
        self._k2_c = sum(k * k for k in self._k_c)
        self._k2_r = sum(k * k for k in self._k_r)

        self._dealias_c = self._dealias_mask(real=False)
        self._dealias_r = self._dealias_mask(real=True)
        self._tail_c = self._tail_mask(real=False)
        self._tail_r = self._tail_mask(real=True)

        inv = np.zeros_like(self._k2_r)
        nz = self._k2_r > 0
        inv[nz] = -1.0 / self._k2_r[nz]
        self._inv_neg_k2_r = inv

        self._coords = None

    # ------------------------------------------------------------------
    # layout helpers

    def _axis_modes(self, axis: int, real: bool) -> np.ndarray:
        n = self.shape[axis]
        if real and axis == self.dim - 1:
            return np.fft.rfftfreq(n, d=1.0 / n)
        return np.fft.fftfreq(n, d=1.0 / n)

    def _broadcast(self, arr: np.ndarray, axis: int) -> np.ndarray:
        slc = [None] * self.dim
        slc[axis] = slice(None)
        return arr[tuple(slc)]

    def _wavenumbers(self, real: bool):
        ks, ks_odd = [], []
        for ax in range(self.dim):
            n = self.shape[ax]
            modes = self._axis_modes(ax, real)
            k = 2.0 * np.pi * modes / self.lengths[ax]
            k_odd = k.copy()
            k_odd[np.abs(modes) == n // 2] = 0.0
            ks.append(self._broadcast(k, ax))
            ks_odd.append(self._broadcast(k_odd, ax))
        return ks, ks_odd

    def _dealias_mask(self, real: bool) -> np.ndarray:
        keep = None
        for ax in range(self.dim):
            modes = np.abs(self._axis_modes(ax, real))
            ok = self._broadcast(modes <= self.shape[ax] / 3.0, ax)
            keep = ok if keep is None else keep & ok
        return keep

    def _tail_mask(self, real: bool) -> np.ndarray:
        # top third of the retained (dealiased) band, on any axis
        tail = None
        for ax in range(self.dim):
            modes = np.abs(self._axis_modes(ax, real))
            cut = self.shape[ax] / 3.0
            hot = self._broadcast((modes > 2.0 * cut / 3.0) & (modes <= cut), ax)
            tail = hot if tail is None else tail | hot
        return tail

    # ------------------------------------------------------------------
    # coordinates and quadrature

    def axis_coordinate(self, axis: int) -> np.ndarray:
        if not 0 <= axis < self.dim:
            raise ValueError(f"axis {axis} out of range for dim {self.dim}")
        n, L = self.shape[axis], self.lengths[axis]
        return np.arange(n) * (L / n)

    def coords(self):
        """Meshgrid coordinate arrays (indexing='ij'), one per axis."""
        if self._coords is None:
            axes = [self.axis_coordinate(ax) for ax in range(self.dim)]
            self._coords = np.meshgrid(*axes, indexing="ij")
        return self._coords

    def check_scalar(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("field contains non-finite values")
        return f

    def check_vector(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape != (self.dim,) + self.shape:
            raise ValueError(f"vector field shape {v.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field contains non-finite values")
        return v

    def integrate(self, f) -> float | complex:
        """Quadrature against the unit-mass volume form: w * sum(f)."""
        total = np.sum(np.asarray(f)) * self.weight
        return total if np.iscomplexobj(f) else float(total)

    def inner(self, f, g):
        """L2 pairing integrate(f * conj(g))."""
        return self.integrate(np.asarray(f) * np.conj(np.asarray(g)))

    def l2_norm(self, f) -> float:
        return float(np.sqrt(self.integrate(np.abs(np.asarray(f)) ** 2).real))

    # ------------------------------------------------------------------
    # transforms

    def fft(self, f: np.ndarray) -> np.ndarray:
        if np.iscomplexobj(f):
            return np.fft.fftn(f)
        return np.fft.rfftn(f)

    def ifft(self, fh: np.ndarray, real: bool) -> np.ndarray:
        if real:
            return np.fft.irfftn(fh, s=self.shape, axes=tuple(range(self.dim)))
        return np.fft.ifftn(fh)

    # ------------------------------------------------------------------
    # calculus

    def derivative(self, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        """Exact Fourier derivative along an axis.

        Odd orders zero the Nyquist plane; even orders keep it (the factor
        (ik)^order is then real and well defined).
        """
        if not 0 <= axis < self.dim:
            raise ValueError(f"axis {axis} out of range for dim {self.dim}")
        if order < 1:
            raise ValueError("order must be >= 1")
        cplx = np.iscomplexobj(f)
        k = (self._k_c_odd if cplx else self._k_r_odd)[axis] if order % 2 else \
            (self._k_c if cplx else self._k_r)[axis]
        fh = self.fft(f)
        fh = fh * (1j * k) ** order
        return self.ifft(fh, real=not cplx)

    def gradient(self, f: np.ndarray) -> np.ndarray:
        cplx = np.iscomplexobj(f)
        ks = self._k_c_odd if cplx else self._k_r_odd
        fh = self.fft(f)
        out = np.empty((self.dim,) + self.shape, dtype=complex if cplx else float)
        for ax in range(self.dim):
            out[ax] = self.ifft(1j * ks[ax] * fh, real=not cplx)
        return out

    def divergence(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        cplx = np.iscomplexobj(v)
        ks = self._k_c_odd if cplx else self._k_r_odd
        out = None
        for ax in range(self.dim):
            term = self.ifft(1j * ks[ax] * self.fft(v[ax]), real=not cplx)
            out = term if out is None else out + term
        return out

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        cplx = np.iscomplexobj(f)
        k2 = self._k2_c if cplx else self._k2_r
        return self.ifft(-k2 * self.fft(f), real=not cplx)

    def inverse_laplacian(self, f: np.ndarray) -> np.ndarray:
        """Unique zero-mean u with laplacian(u) = f; requires a zero-mean input."""
        if np.iscomplexobj(f):
            raise ValueError("inverse_laplacian expects a real field")
        mean = self.integrate(f)
        if abs(mean) >= 1e-10:
            raise ValueError(f"inverse_laplacian needs a zero-mean field, got mean {mean:.3e}")
        fh = self.fft(f)
        return self.ifft(fh * self._inv_neg_k2_r, real=True)

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """2/3-rule truncation: zero every mode with any |n_i| > N_i/3."""
        f = np.asarray(f)
        if f.shape == (self.dim,) + self.shape:
            return np.stack([self.dealias(f[ax]) for ax in range(self.dim)])
        cplx = np.iscomplexobj(f)
        mask = self._dealias_c if cplx else self._dealias_r
        return self.ifft(self.fft(f) * mask, real=not cplx)

    def spectral_tail_fraction(self, f: np.ndarray) -> float:
        """Fraction of L2 mass in the top third of the retained spectral band."""
        cplx = np.iscomplexobj(f)
        fh = self.fft(f)
        p = np.abs(fh) ** 2
        if not cplx:
            # account for the folded conjugate half of the rfft layout
            w = np.ones(self.shape[:-1] + (fh.shape[-1],))
            n = self.shape[-1]
            w[..., 1:] = 2.0
            if fh.shape[-1] == n // 2 + 1:
                w[..., -1] = 1.0
            p = p * w
        tail = self._tail_c if cplx else self._tail_r
        total = float(np.sum(p))
        if total == 0.0:
            return 0.0
        return float(np.sum(p[tail]) / total)

    def guard_spectral_tail(self, f: np.ndarray, threshold: float = 1e-4, what: str = "field"):
        frac = self.spectral_tail_fraction(f)
        if frac > threshold:
            raise SpectralBlowupError(
                f"{what}: spectral tail fraction {frac:.3e} exceeds {threshold:.1e} "
                "(resolution lost, refusing to integrate further)"
            )

    # ------------------------------------------------------------------
    # dimension-specific helpers

    def curl(self, v: np.ndarray) -> np.ndarray:
        """Curl of a 3D vector field."""
        if self.dim != 3:
            raise ValueError("curl requires a 3D grid")
        v = self.check_vector(v)
        d = lambda comp, ax: self.derivative(v[comp], ax)
        return np.stack([
            d(2, 1) - d(1, 2),
            d(0, 2) - d(2, 0),
            d(1, 0) - d(0, 1),
        ])

    def vorticity2d(self, v: np.ndarray) -> np.ndarray:
        """Scalar curl d(v_y)/dx - d(v_x)/dy on a 2D grid."""
        if self.dim != 2:
            raise ValueError("vorticity2d requires a 2D grid")
        v = self.check_vector(v)
        return self.derivative(v[1], 0) - self.derivative(v[0], 1)

    def perp_gradient(self, f: np.ndarray) -> np.ndarray:
        """Rotated gradient (-df/dy, df/dx); divergence-free for any f."""
        if self.dim != 2:
            raise ValueError("perp_gradient requires a 2D grid")
        g = self.gradient(f)
        return np.stack([-g[1], g[0]])

    # ------------------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and other.shape == self.shape
            and other.lengths == self.lengths
        )

    def __hash__(self):
        return hash((self.shape, self.lengths))

    def __repr__(self):
        return f"Grid(shape={self.shape}, lengths={tuple(round(L, 12) for L in self.lengths)})"


def same_grid(*fields):
    """Return the common grid of field-carrying objects, or raise."""
    grids = [f.grid for f in fields if hasattr(f, "grid")]
    if not grids:
        raise ValueError("no grid-carrying argument")
    g0 = grids[0]
    for g in grids[1:]:
        if g != g0:
            raise ValueError("fields live on different grids")
    return g0


# ----------------------------------------------------------------------
# snapshot I/O: structured-text sidecar + raw little-endian float64

_MAGIC = "densflow-field"


def save_field(grid: Grid, values: np.ndarray, name: str, base) -> None:
    """Write a field snapshot: ``<base>.json`` header + ``<base>.f64`` payload.

    The payload is raw little-endian 64-bit floats in row-major order; a
    complex field stores the full real plane followed by the imaginary
    plane.  Round trips are bit exact.
    """
    base = Path(base)
    values = np.asarray(values)
    cplx = np.iscomplexobj(values)
    grid.check_scalar(values.real)
    header = {
        "format": _MAGIC,
        "version": 1,
        "dim": grid.dim,
        "shape": list(grid.shape),
        "lengths": list(grid.lengths),
        "name": str(name),
        "kind": "complex" if cplx else "scalar",
    }
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(base.suffix + ".json").write_text(json.dumps(header, indent=1) + "\n")
    if cplx:
        payload = np.concatenate([
            np.ascontiguousarray(values.real, dtype="<f8").ravel(),
            np.ascontiguousarray(values.imag, dtype="<f8").ravel(),
        ])
    else:
        payload = np.ascontiguousarray(values, dtype="<f8").ravel()
    base.with_suffix(base.suffix + ".f64").write_bytes(payload.tobytes())


def load_field(base):
    """Inverse of :func:`save_field`; returns ``(grid, name, values)``."""
    base = Path(base)
    header = json.loads(base.with_suffix(base.suffix + ".json").read_text())
    if header.get("format") != _MAGIC:
        raise ValueError(f"{base}: not a field snapshot")
    grid = Grid(tuple(header["shape"]), tuple(header["lengths"]))
    raw = np.frombuffer(base.with_suffix(base.suffix + ".f64").read_bytes(), dtype="<f8")
    npts = int(np.prod(grid.shape))
    if header["kind"] == "complex":
        if raw.size != 2 * npts:
            raise ValueError(f"{base}: payload size mismatch")
        values = (raw[:npts] + 1j * raw[npts:]).reshape(grid.shape)
    else:
        if raw.size != npts:
            raise ValueError(f"{base}: payload size mismatch")
        values = raw.reshape(grid.shape).copy()
    return grid, header["name"], values
