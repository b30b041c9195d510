"""Energy, BD entropy, dissipations, density bounds and balance residuals.

Integrals are taken on the padded grid from the spectral representation of
``r``, with density derivatives obtained by the chain rule (see
:mod:`nskorteweg.dynamics`).  All evaluators accept stacked states and then
return one value per path.
"""
from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .dynamics import PaddedFields, cutoff_theta
from .fields import DensityError, State, r_to_rho
from .spectral import Grid


@dataclass
class DiagnosticsRecord:
    t: float
    H: float
    E: float
    D_ag: float
    D_ab: float
    visc: float
    mass: float
    rho_min: float
    rho_max: float
    inv_rho_max: float
    y: float
    theta: float
    a1: float


DIAG_COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


def _out(w: PaddedFields, values):
    return w.scalar(values)


def _pressure_potential(rho, gamma):
    if gamma == 1:
        return rho * np.log(rho)
    return rho**gamma / (gamma - 1)


def _energy(w):
    p = w.params
    return w.integrate(0.5 * w.rho * w.u**2 + _pressure_potential(w.rho, p.gamma) + 0.5 * w.rho * w.r_x**2)


def _bd_entropy(w):
    p = w.params
    V = w.u + w.rho ** (p.alpha - 2) * w.rho_x
    return w.integrate(0.5 * w.rho * V**2 + _pressure_potential(w.rho, p.gamma) + 0.5 * w.rho * w.r_x**2)


def _d_pressure(w):
    # 4g/(g+a-1)^2 |d_x rho^((g+a-1)/2)|^2 == g rho^(g+a-3) |rho_x|^2, log case included
    p = w.params
    return w.integrate(p.gamma * w.rho ** (p.gamma + p.alpha - 3) * w.rho_x**2)


def _d_capillary(w):
    # 4/(a+b+1)^2 |d_xx rho^th|^2 + c(a,b) |d_x rho^(th/2)|^4 with th = (a+b+1)/2,
    # expanded so that th = 0 gives |d_xx log rho|^2 + a(1-a)/2 |d_x log rho|^4
    a, b = w.params.alpha, w.params.beta
    th = (a + b + 1) / 2
    rho, rx = w.rho, w.rho_x
    second = rho ** (th - 1) * w.rho_xx + (th - 1) * rho ** (th - 2) * rx**2
    quartic = ((a - b - 1) * (1 - a) / 4 - b * th / 6) * rho ** (2 * th - 4) * rx**4
    return w.integrate(second**2 + quartic)


def _visc(w):
    return w.integrate(w.rho**w.params.alpha * w.u_x**2)


def _linf(w, F):
    return np.max(np.abs(F), axis=-1)


def _localization(w, first_norm="Linf"):
    p = w.params
    a, b, g = p.alpha, p.beta, p.gamma
    rho = w.rho
    th = (a + b + 1) / 2
    if abs(th) < 1e-12:
        d2 = w.r_xx if b == -1 else (w.rho_xx / rho - (w.rho_x / rho) ** 2)
    else:
        d2 = th * (rho ** (th - 1) * w.rho_xx + (th - 1) * rho ** (th - 2) * w.rho_x**2)
    if first_norm == "Linf":
        n1 = _linf(w, rho ** ((-b - 2) / 2)) ** 2
    elif first_norm == "L2":
        n1 = w.integrate(rho ** (-b - 2))
    else:
        raise ValueError("first_norm must be 'Linf' or 'L2'")
    n2 = _linf(w, rho ** ((1 - 2 * a) / 2)) ** 2
    term1 = (n1 + n2) * w.integrate(d2**2)
    term2 = _linf(w, rho ** (-(a - 1) / 2)) ** 2 * (w.integrate(w.u_x**2) + w.integrate(w.u**2))
    term3 = _linf(w, rho ** ((2 * g - a - b - 2) / 2)) ** 2
    return term1 + term2 + term3


def energy(state: State):
    """``int rho u^2/2 + F(rho) + k(rho) |rho_x|^2 / 2``."""
    w = PaddedFields(state)
    return _out(w, _energy(w))


def bd_entropy(state: State):
    """Same as :func:`energy` with ``u`` replaced by ``V = u + mu(rho) rho_x / rho^2``."""
    w = PaddedFields(state)
    return _out(w, _bd_entropy(w))


def dissipation_pressure(state: State):
    w = PaddedFields(state)
    return _out(w, _d_pressure(w))


def dissipation_capillary(state: State):
    """Capillary entropy dissipation; the logarithmic form is used on ``alpha+beta+1 = 0``."""
    w = PaddedFields(state)
    return _out(w, _d_capillary(w))


def viscous_dissipation(state: State):
    w = PaddedFields(state)
    return _out(w, _visc(w))


def mass(state: State):
    return state.grid.integrate(r_to_rho(state.r, state.params.beta))


def vacuum_bounds(state: State):
    """Grid ``(min rho, max rho, max 1/rho)``."""
    rho = r_to_rho(state.r, state.params.beta)
    lo = np.min(rho, axis=-1)
    hi = np.max(rho, axis=-1)
    if np.any(~(lo > 0)):
        raise DensityError("density not positive")
    return lo, hi, 1.0 / lo


def localization_coefficient(state: State, first_norm: str = "Linf"):
    """Coefficient ``a(t)`` controlling the first localization time.

    The weight of the second-derivative term is ``|rho^((-b-2)/2)|^2`` in
    ``first_norm`` (``"Linf"`` by default, ``"L2"`` for the alternative
    reading) plus ``|rho^((1-2a)/2)|_inf^2``.  On ``alpha+beta+1 = 0`` the
    second derivative of ``log rho`` is used.
    """
    w = PaddedFields(state)
    return _out(w, _localization(w, first_norm))


def diagnostics_table(state: State) -> np.ndarray:
    """All record columns for a state; shape ``(13,)`` or ``(n_paths, 13)``."""
    w = PaddedFields(state)
    rho_grid = r_to_rho(state.r, state.params.beta)
    lo = np.min(np.atleast_2d(rho_grid), axis=-1)
    hi = np.max(np.atleast_2d(rho_grid), axis=-1)
    P = lo.shape[0]
    cols = [
        np.full(P, state.time),
        _energy(w),
        _bd_entropy(w),
        _d_pressure(w),
        _d_capillary(w),
        _visc(w),
        state.grid.integrate(np.atleast_2d(rho_grid)),
        lo,
        hi,
        1.0 / lo,
        w.y,
        w.theta[:, 0],
        _localization(w),
    ]
    out = np.stack(cols, axis=-1)
    return out if state.batched else out[0]


def diagnostics_record(state: State) -> DiagnosticsRecord:
    if state.batched:
        raise ValueError("use diagnostics_table for stacked states")
    return DiagnosticsRecord(*(float(v) for v in diagnostics_table(state)))


def write_diagnostics_csv(path, rows) -> Path:
    """Write a ``(n_records, 13)`` array or a list of records with the fixed column order."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAG_COLUMNS)
        for row in rows:
            vals = astuple(row) if isinstance(row, DiagnosticsRecord) else row
            writer.writerow([repr(float(v)) for v in vals])
    return path


def read_diagnostics_csv(path) -> np.ndarray:
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if tuple(header) != DIAG_COLUMNS:
        raise ValueError(f"unexpected diagnostics header {header}")
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


# -- functional inequality ----------------------------------------------------

SHARP_CONSTANT = 9.0 / 16.0


def check_functional_inequality(f, grid: Grid | None = None):
    """``int |d_x sqrt f|^4 / int (d_xx f)^2`` for positive periodic ``f``.

    ``f`` is a grid array (or a stack of them, last axis) or a
    :class:`~nskorteweg.spectral.Field`.  Constant ``f`` gives 0.
    """
    if hasattr(f, "grid") and hasattr(f, "values"):
        grid, f = f.grid, f.values
    f = np.asarray(f, dtype=float)
    grid = grid or Grid(f.shape[-1])
    if np.any(~(f > 0)):
        raise ValueError("f must be positive")
    c = grid.coeffs(f)
    f1 = grid.values(grid.spectral_derivative(c, 1))
    f2 = grid.values(grid.spectral_derivative(c, 2))
    num = grid.integrate(f1**4 / (16 * f**2))
    den = grid.integrate(f2**2)
    flat = np.max(np.abs(f - np.mean(f, axis=-1, keepdims=True)), axis=-1) <= 1e-13 * np.max(f, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(flat, 0.0, num / np.where(flat, 1.0, den))
    return float(ratio) if ratio.ndim == 0 else ratio


def random_positive_trig(n_samples: int, degree: int, n_points: int, min_value: float = 0.1, rng=None):
    """Random trigonometric polynomials of the given degree shifted to have minimum ``min_value``.

    Coefficients decay like ``1/k`` with random signs and phases, which keeps
    the family away from the trivial near-constant regime.
    """
    rng = np.random.default_rng(rng)
    x = np.arange(n_points) / n_points
    k = np.arange(1, degree + 1)
    amp = rng.standard_normal((n_samples, degree)) / k
    phase = rng.uniform(0, 2 * np.pi, (n_samples, degree))
    keep = rng.integers(1, degree + 1, n_samples)
    amp = np.where(k[None, :] <= keep[:, None], amp, 0.0)
    f = np.einsum("sk,skn->sn", amp, np.cos(2 * np.pi * k[None, :, None] * x + phase[:, :, None]))
    scale = rng.uniform(0.05, 10.0, n_samples)
    f = (f - f.min(axis=-1, keepdims=True)) * scale[:, None]
    return f + min_value


# -- time series ----------------------------------------------------------------

def _series(traj, name):
    return np.asarray(traj.column(name))


def _trapz(y, t):
    return cumulative_trapezoid(y, t, axis=0, initial=0.0)


def energy_residual(traj):
    """``H(t) + int_0^t int mu |u_x|^2 - H(0)``, trapezoid in time; one column per path."""
    t = _series(traj, "t")
    H = _series(traj, "H")
    visc = _series(traj, "visc")
    return H + _trapz(visc, t) - H[0]


def entropy_residual(traj):
    """``E(t) + int_0^t (D_ag + D_ab) - E(0)``, trapezoid in time."""
    t = _series(traj, "t")
    E = _series(traj, "E")
    D = _series(traj, "D_ag") + _series(traj, "D_ab")
    return E + _trapz(D, t) - E[0]


def localization_integral(traj, level: float | None = None):
    """Running ``int_0^t a`` and, if ``level`` is given, its first crossing time (or None)."""
    t = _series(traj, "t")
    acc = _trapz(_series(traj, "a1"), t)
    if level is None:
        return acc
    crossed = np.nonzero(acc >= level)[0]
    return acc, (float(t[crossed[0]]) if crossed.size else None)
