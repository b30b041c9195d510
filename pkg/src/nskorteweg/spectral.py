"""Fourier collocation on the unit torus.

All operators act on the last axis, so a stack of fields of shape
``(n_paths, n_points)`` is handled in one call.  Coefficients use the
normalisation ``f(x) = sum_k c_k exp(2 pi i k x)``, i.e. ``c = rfft(f) / n``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"NSKF"
_HEADER = struct.Struct("<4sqd")


class Grid:
    """Uniform grid of ``n_points`` collocation points on a torus of period ``length``."""

    def __init__(self, n_points: int, length: float = 1.0):
        if n_points < 4 or n_points % 2:
            raise ValueError(f"n_points must be even and >= 4, got {n_points}")
        self.n_points = int(n_points)
        self.length = float(length)
        self.x = self.length * np.arange(self.n_points) / self.n_points
        self.wavenumbers = np.arange(self.n_points // 2 + 1)
        self.kappa = 2 * np.pi * self.wavenumbers / self.length
        self._pad_cache = {}

    @classmethod
    def for_order(cls, galerkin_order: int, factor: int = 4) -> "Grid":
        return cls(factor * galerkin_order)

    def __repr__(self):
        return f"Grid(n_points={self.n_points}, length={self.length})"

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and other.n_points == self.n_points
            and other.length == self.length
        )

    def __hash__(self):
        return hash((self.n_points, self.length))

    @property
    def padded_points(self) -> int:
        """Size of the 3/2-rule grid used for alias-free quadratic products."""
        n = (3 * self.n_points) // 2
        return n + (n % 2)

    # transforms ---------------------------------------------------------
    def coeffs(self, f):
        return np.fft.rfft(f, axis=-1) / self.n_points

    def values(self, c, n_out: int | None = None):
        """Evaluate coefficients ``c`` (length ``n//2 + 1``) on a grid of ``n_out`` points."""
        n_in = 2 * (c.shape[-1] - 1)
        n_out = n_in if n_out is None else n_out
        if n_out == n_in:
            return np.fft.irfft(c * n_out, n_out, axis=-1)
        if n_out < n_in:
            raise ValueError("use truncate() to go to a coarser grid")
        out = np.zeros(c.shape[:-1] + (n_out // 2 + 1,), dtype=complex)
        out[..., : c.shape[-1]] = c
        # the Nyquist mode splits into +/- halves once it is no longer the edge
        out[..., c.shape[-1] - 1] *= 0.5
        return np.fft.irfft(out * n_out, n_out, axis=-1)

    def truncate(self, c_fine):
        """Keep the modes this grid can hold (Nyquist dropped)."""
        out = np.array(c_fine[..., : self.n_points // 2 + 1], dtype=complex)
        out[..., -1] = 0.0
        return out

    def to_padded(self, f):
        return self.values(self.coeffs(f), self.padded_points)

    def from_padded(self, F):
        C = np.fft.rfft(F, axis=-1) / F.shape[-1]
        return self.values(self.truncate(C))

    # calculus -----------------------------------------------------------
    def spectral_derivative(self, c, order: int = 1):
        out = c * (1j * self.kappa) ** order
        if order % 2:
            out[..., -1] = 0.0
        return out

    def derivative(self, f, order: int = 1):
        """``d^order f / dx^order`` by multiplying mode k with ``(2 pi i k / L)**order``."""
        if order < 0:
            raise ValueError("order must be nonnegative")
        if order == 0:
            return np.array(f, dtype=float)
        return self.values(self.spectral_derivative(self.coeffs(f), order))

    def project(self, f, m: int):
        """L2-orthogonal projection onto trigonometric polynomials of degree <= m."""
        if m > self.n_points // 2:
            raise ValueError(f"cannot project to m={m} on {self.n_points} points")
        c = self.coeffs(f)
        c[..., self.wavenumbers > m] = 0.0
        return self.values(c)

    def dealias_product(self, f, g):
        """Pointwise product with 3/2-rule padding; retained modes are alias-free."""
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if f.shape[-1] != self.n_points or g.shape[-1] != self.n_points:
            raise ValueError(
                f"grid mismatch: expected {self.n_points} points, got {f.shape[-1]} and {g.shape[-1]}"
            )
        return self.from_padded(self.to_padded(f) * self.to_padded(g))

    def integrate(self, f):
        return self.length * np.mean(f, axis=-1)

    def inner(self, f, g):
        return self.integrate(np.asarray(f) * np.asarray(g))

    def _mode_weights(self):
        w = np.full(self.wavenumbers.shape, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w

    def norm_hs(self, f, s: float = 0.0):
        """Sobolev H^s norm, Plancherel-normalised so ``norm_hs(f, 0)**2 == integrate(f*f)``."""
        if s < 0:
            raise ValueError("s must be nonnegative")
        c = self.coeffs(f)
        weight = self._mode_weights() * (1.0 + self.kappa**2) ** s
        return np.sqrt(self.length * np.sum(weight * np.abs(c) ** 2, axis=-1))

    def norm_hs_coeffs(self, c, s: float = 0.0):
        weight = self._mode_weights() * (1.0 + self.kappa**2) ** s
        return np.sqrt(self.length * np.sum(weight * np.abs(c) ** 2, axis=-1))

    def norm_w2inf(self, f):
        """Grid sup of |f| + |f'| + |f''|; a collocation proxy for the W^{2,inf} norm."""
        c = self.coeffs(f)
        d1 = self.values(self.spectral_derivative(c, 1))
        d2 = self.values(self.spectral_derivative(c, 2))
        return (
            np.max(np.abs(f), axis=-1)
            + np.max(np.abs(d1), axis=-1)
            + np.max(np.abs(d2), axis=-1)
        )


class Field:
    """A real periodic function with lazily synchronised physical/spectral forms."""

    def __init__(self, grid: Grid, values=None, coeffs=None, time: float = 0.0):
        if (values is None) == (coeffs is None):
            raise ValueError("give exactly one of values or coeffs")
        self.grid = grid
        self.time = float(time)
        self._values = None if values is None else np.asarray(values, dtype=float)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=complex)
        if self._values is not None and self._values.shape[-1] != grid.n_points:
            raise ValueError("values do not match the grid")

    @property
    def values(self):
        if self._values is None:
            self._values = self.grid.values(self._coeffs)
        return self._values

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._coeffs = self.grid.coeffs(self._values)
        return self._coeffs

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.grid.n_points

    def to_csv(self, path):
        write_field_csv(path, self.grid, self.values)

    def to_binary(self, path):
        write_field_binary(path, self.values, self.time)

    @classmethod
    def from_binary(cls, path, length: float = 1.0):
        (n, t, vals), = read_field_binary(path)
        return cls(Grid(n, length), values=vals, time=t)


def write_field_csv(path, grid: Grid, values) -> Path:
    path = Path(path)
    values = np.asarray(values, dtype=float)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("x,value\n")
        for x, v in zip(grid.x, values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")
    return path


def read_field_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def write_field_binary(path, values, time: float = 0.0, append: bool = False) -> Path:
    """Little-endian record: magic, int64 n_points, float64 time, n float64 values."""
    path = Path(path)
    values = np.ascontiguousarray(values, dtype="<f8")
    with path.open("ab" if append else "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, values.shape[-1], float(time)))
        fh.write(values.tobytes())
    return path


def read_field_binary(path):
    """Return all records in the file as ``(n_points, time, values)`` tuples."""
    records = []
    data = Path(path).read_bytes()
    pos = 0
    while pos < len(data):
        magic, n, t = _HEADER.unpack_from(data, pos)
        if magic != _MAGIC:
            raise ValueError(f"bad field record at byte {pos}")
        pos += _HEADER.size
        vals = np.frombuffer(data, dtype="<f8", count=n, offset=pos).copy()
        pos += 8 * n
        records.append((n, t, vals))
    return records
