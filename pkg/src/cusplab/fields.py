"""Circle-invariant fields on the cusp.

A Field stores torus Fourier coefficients over a shared radial grid: one
complex radial profile per integer dual-lattice index k.  The characters are
chi_k(t) = exp(2*pi*i k.t) in fractional lattice coordinates t, so the
mode <-> collocation-value conversion is a plain discrete Fourier transform
on a uniform torus grid of size m per direction.

Real-valuedness corresponds to coefficient conjugate symmetry between k
and -k; constructors enforce it up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grid import RadialGrid

_REAL_TOL = 1e-9


def _centered_index(idx: int, m: int) -> int:
    return (idx + m // 2) % m - m // 2


@dataclass
class Field:
    grid: RadialGrid
    modes: dict
    torus_resolution: int

    def __post_init__(self):
        m = self.torus_resolution
        if m < 4 or (m & (m - 1)) != 0:
            raise ConfigError(f"torus_resolution must be a power of two >= 4, got {m}")
        nn = len(self.grid)
        cleaned = {}
        dims = None
        for k, prof in self.modes.items():
            k = tuple(int(ki) for ki in k)
            if dims is None:
                dims = len(k)
            elif len(k) != dims:
                raise ConfigError("inconsistent mode key lengths")
            if max(abs(ki) for ki in k) >= m // 2 and any(k):
                raise ConfigError(f"mode {k} aliases on a grid of size {m}")
            prof = np.asarray(prof, dtype=complex)
            if prof.shape != (nn,):
                raise ConfigError(f"profile for mode {k} has shape {prof.shape}, want ({nn},)")
            cleaned[k] = prof
        if not cleaned:
            raise ConfigError("field needs at least one mode (use Field.zero)")
        self.modes = cleaned

    # --- constructors ---

    @classmethod
    def zero(cls, grid: RadialGrid, torus_dims: int, torus_resolution: int) -> "Field":
        key = (0,) * torus_dims
        return cls(grid, {key: np.zeros(len(grid), dtype=complex)}, torus_resolution)

    @classmethod
    def from_radial(cls, grid: RadialGrid, profile, torus_dims: int, torus_resolution: int) -> "Field":
        key = (0,) * torus_dims
        prof = np.asarray(profile, dtype=complex)
        return cls(grid, {key: prof}, torus_resolution)

    @classmethod
    def from_values(
        cls,
        grid: RadialGrid,
        values: np.ndarray,
        nyquist_tol: float = 1e-8,
        nyquist_abs: float = 0.0,
    ) -> "Field":
        """Build a Field from collocation values of shape (m,)*dims + (len(grid),).

        Nyquist bins must be negligible, relative to the largest coefficient
        or below the absolute allowance `nyquist_abs` (for values produced by
        arithmetic whose roundoff floor exceeds the field scale); they are
        dropped.
        """
        values = np.asarray(values)
        dims = values.ndim - 1
        m = values.shape[0]
        if values.shape[:-1] != (m,) * dims:
            raise ConfigError(f"values must be (m,)*dims + (N,), got {values.shape}")
        coeffs = np.fft.fftn(values, axes=tuple(range(dims))) / m**dims
        scale = np.max(np.abs(coeffs)) + 1e-300
        modes = {}
        nyq_max = 0.0
        for idx in np.ndindex(*([m] * dims)):
            k = tuple(_centered_index(i, m) for i in idx)
            prof = coeffs[idx]
            if any(abs(ki) == m // 2 for ki in k):
                nyq_max = max(nyq_max, float(np.max(np.abs(prof))))
                continue
            modes[k] = np.ascontiguousarray(prof)
        if nyq_max > nyquist_tol * scale and nyq_max > nyquist_abs:
            raise ConfigError(
                f"torus_resolution {m} too small: Nyquist content {nyq_max:.3e} "
                f"vs scale {scale:.3e}"
            )
        return cls(grid, modes, m)

    # --- structure ---

    @property
    def torus_dims(self) -> int:
        return len(next(iter(self.modes)))

    @property
    def zero_key(self) -> tuple:
        return (0,) * self.torus_dims

    def radial_mean(self) -> np.ndarray:
        """Profile of the torus-constant mode (real part)."""
        prof = self.modes.get(self.zero_key)
        if prof is None:
            return np.zeros(len(self.grid))
        return prof.real.copy()

    def values(self, real_tol: float = _REAL_TOL) -> np.ndarray:
        """Collocation values on the uniform torus grid, last axis radial."""
        m = self.torus_resolution
        dims = self.torus_dims
        hat = np.zeros((m,) * dims + (len(self.grid),), dtype=complex)
        for k, prof in self.modes.items():
            idx = tuple(ki % m for ki in k)
            hat[idx] += prof
        vals = np.fft.ifftn(hat, axes=tuple(range(dims))) * m**dims
        scale = np.max(np.abs(vals.real)) + 1e-300
        imag = np.max(np.abs(vals.imag))
        if imag > real_tol * scale:
            raise ConfigError(
                f"field is not real valued: imaginary part {imag:.3e} vs scale {scale:.3e}"
            )
        return vals.real

    def conjugate_symmetry_defect(self) -> float:
        """Max |c(k) - conj(c(-k))| over stored modes (0 for a real field)."""
        worst = 0.0
        for k, prof in self.modes.items():
            mk = tuple(-ki for ki in k)
            other = self.modes.get(mk)
            if other is None:
                worst = max(worst, float(np.max(np.abs(prof))))
            else:
                worst = max(worst, float(np.max(np.abs(prof - other.conj()))))
        return worst

    def sup_norm(self, interior: slice | None = None) -> float:
        vals = self.values()
        if interior is not None:
            vals = vals[..., interior]
        return float(np.max(np.abs(vals)))

    # --- algebra ---

    def copy(self) -> "Field":
        return Field(self.grid, {k: p.copy() for k, p in self.modes.items()}, self.torus_resolution)

    def _binary(self, other: "Field", op) -> "Field":
        if other.grid is not self.grid and not np.array_equal(other.grid.s, self.grid.s):
            raise ConfigError("fields live on different grids")
        keys = set(self.modes) | set(other.modes)
        nn = len(self.grid)
        out = {}
        for k in keys:
            a = self.modes.get(k)
            b = other.modes.get(k)
            if a is None:
                a = np.zeros(nn, dtype=complex)
            if b is None:
                b = np.zeros(nn, dtype=complex)
            out[k] = op(a, b)
        return Field(self.grid, out, self.torus_resolution)

    def __add__(self, other: "Field") -> "Field":
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other: "Field") -> "Field":
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, scalar: float) -> "Field":
        return Field(
            self.grid,
            {k: p * scalar for k, p in self.modes.items()},
            self.torus_resolution,
        )

    __rmul__ = __mul__


def torus_points(lattice: np.ndarray, m: int) -> np.ndarray:
    """Complex coordinates z' of the collocation grid, shape (m,)*2d + (d,)."""
    twod = lattice.shape[0]
    d = twod // 2
    t_axes = [np.arange(m) / m for _ in range(twod)]
    mesh = np.meshgrid(*t_axes, indexing="ij")
    t = np.stack(mesh, axis=-1)
    v = t @ lattice.T
    return v[..., :d] + 1j * v[..., d:]
