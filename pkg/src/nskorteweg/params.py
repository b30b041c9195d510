"""Physical parameters and (alpha, beta) regime classification.

The viscosity and capillarity laws are ``mu(rho) = rho**alpha`` and
``k(rho) = rho**beta``; the pressure is ``p(rho) = rho**gamma``.  Two
conditions on the exponents matter for global behaviour:

* strong coercivity (SCC): ``2*alpha - 4 <= beta <= 2*alpha - 1``
* no vacuum (NV): ``alpha <= 1/2`` or ``beta <= -2``

On the line ``alpha + beta + 1 = 0`` the capillary dissipation constants are
undefined and the logarithmic variable takes over; that line is reported,
never evaluated.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .noise import NoiseSpec

DEGENERATE_TOL = 1e-12


class DegenerateExponentError(ValueError):
    """Raised when a closed-form constant is requested on alpha+beta+1 = 0."""


@dataclass(frozen=True)
class Params:
    alpha: float
    beta: float
    gamma: float = 2.0
    trunc_radius: float = 1.0e3
    galerkin_order: int = 32
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if not self.trunc_radius > 0:
            raise ValueError(f"trunc_radius must be > 0, got {self.trunc_radius}")
        if int(self.galerkin_order) != self.galerkin_order or self.galerkin_order < 4:
            raise ValueError(f"galerkin_order must be an integer >= 4, got {self.galerkin_order}")
        if not np.isfinite(self.beta):
            raise ValueError(f"beta must be finite, got {self.beta}")

    @property
    def degenerate_theta(self) -> bool:
        return abs(self.alpha + self.beta + 1) < DEGENERATE_TOL

    @property
    def log_variable(self) -> bool:
        """True when r = log(rho), i.e. beta = -1."""
        return self.beta == -1

    def regime(self) -> "RegimeReport":
        return classify(self.alpha, self.beta)

    def replace(self, **changes) -> "Params":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class RegimeReport:
    alpha: float
    beta: float
    scc: bool
    nv: bool
    c_ab: float
    discriminant: float
    degenerate_theta: bool
    tame: bool = False


def scc_holds(alpha, beta, tol=0.0):
    """Strong coercivity: ``2a - 4 - tol <= b <= 2a - 1 + tol``. Broadcasts."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    out = (2 * alpha - 4 - tol <= beta) & (beta <= 2 * alpha - 1 + tol)
    return bool(out) if out.ndim == 0 else out


def nv_holds(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    out = (alpha <= 0.5) | (beta <= -2)
    return bool(out) if out.ndim == 0 else out


def tame_capillarity_holds(alpha, beta, tol=0.0):
    """The narrower range ``2a - 3 <= b <= 2a - 1`` used in earlier work."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    out = (2 * alpha - 3 - tol <= beta) & (beta <= 2 * alpha - 1 + tol)
    return bool(out) if out.ndim == 0 else out


def _bracket(alpha, beta):
    s = alpha + beta + 1
    return (alpha - beta - 1) * (1 - alpha) / s**2 - beta / (3 * s)


def _check_nondegenerate(alpha, beta):
    if abs(alpha + beta + 1) < DEGENERATE_TOL:
        raise DegenerateExponentError(
            f"alpha + beta + 1 = 0 at (alpha, beta) = ({alpha}, {beta}); "
            "use the logarithmic form"
        )


def capillary_constant(alpha: float, beta: float) -> float:
    """Coefficient of the quartic term in the capillary entropy dissipation."""
    _check_nondegenerate(alpha, beta)
    return 64.0 / (alpha + beta + 1) ** 2 * _bracket(alpha, beta)


def scc_discriminant(alpha: float, beta: float) -> float:
    """Quantity that is nonnegative exactly on the SCC strip."""
    _check_nondegenerate(alpha, beta)
    return _bracket(alpha, beta) + 1.0 / 9.0


def classify(alpha: float, beta: float, tol: float = 0.0) -> RegimeReport:
    degenerate = abs(alpha + beta + 1) < DEGENERATE_TOL
    if degenerate:
        c_ab = disc = float("nan")
    else:
        c_ab = capillary_constant(alpha, beta)
        disc = scc_discriminant(alpha, beta)
    return RegimeReport(
        alpha=float(alpha),
        beta=float(beta),
        scc=scc_holds(alpha, beta, tol),
        nv=nv_holds(alpha, beta),
        c_ab=c_ab,
        discriminant=disc,
        degenerate_theta=degenerate,
        tame=tame_capillarity_holds(alpha, beta, tol),
    )


ATLAS_HEADER = ("alpha", "beta", "scc", "nv", "c_ab", "discriminant", "degenerate")


@dataclass
class RegimeAtlas:
    """Dense (alpha, beta) sweep; arrays are indexed ``[i_alpha, j_beta]``."""

    alpha: np.ndarray
    beta: np.ndarray
    scc: np.ndarray
    nv: np.ndarray
    c_ab: np.ndarray
    discriminant: np.ndarray
    degenerate: np.ndarray

    @property
    def shape(self):
        return self.alpha.shape

    def report_at(self, alpha: float, beta: float) -> RegimeReport:
        i = int(np.argmin(np.abs(self.alpha[:, 0] - alpha)))
        j = int(np.argmin(np.abs(self.beta[0, :] - beta)))
        return self._report(i, j)

    def _report(self, i, j):
        a, b = float(self.alpha[i, j]), float(self.beta[i, j])
        return RegimeReport(
            alpha=a,
            beta=b,
            scc=bool(self.scc[i, j]),
            nv=bool(self.nv[i, j]),
            c_ab=float(self.c_ab[i, j]),
            discriminant=float(self.discriminant[i, j]),
            degenerate_theta=bool(self.degenerate[i, j]),
            tame=tame_capillarity_holds(a, b),
        )

    def rows(self) -> Iterator[RegimeReport]:
        for i in range(self.shape[0]):
            for j in range(self.shape[1]):
                yield self._report(i, j)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(ATLAS_HEADER)
            for rep in self.rows():
                writer.writerow(
                    [
                        repr(rep.alpha),
                        repr(rep.beta),
                        int(rep.scc),
                        int(rep.nv),
                        repr(rep.c_ab),
                        repr(rep.discriminant),
                        int(rep.degenerate_theta),
                    ]
                )
        return path


def _lattice(lo, hi, step):
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    # integer multiples, then snapped to 12 decimals so that e.g. 0.35 is the
    # double nearest 0.35 and not 7*0.05
    return np.round(lo + step * np.arange(count), 12)


def regime_atlas(alpha_range, beta_range, step: float, degenerate_tol: float = 1e-9) -> RegimeAtlas:
    """Sweep the closed rectangle ``alpha_range x beta_range`` on a lattice.

    SCC membership on the lattice is decided with a tolerance of ``1e-9*step``
    so points that sit on a boundary line up to rounding count as inside.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    a = _lattice(*alpha_range, step)
    b = _lattice(*beta_range, step)
    A, B = np.meshgrid(a, b, indexing="ij")
    s = A + B + 1
    degenerate = np.abs(s) < degenerate_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        bracket = np.where(degenerate, np.nan, _bracket(A, B))
        c_ab = np.where(degenerate, np.nan, 64.0 / s**2 * bracket)
    return RegimeAtlas(
        alpha=A,
        beta=B,
        scc=scc_holds(A, B, tol=1e-9 * step),
        nv=nv_holds(A, B),
        c_ab=c_ab,
        discriminant=bracket + 1.0 / 9.0,
        degenerate=degenerate,
    )
