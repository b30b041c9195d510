"""Constitutive laws and the density <-> r change of variables.

With ``k(rho) = rho**beta`` the transformed density is

    r = 2/(beta+1) * rho**((beta+1)/2)     (beta != -1)
    r = log(rho)                           (beta == -1)

so that ``d_x r = A(rho) = sqrt(k/rho) d_x rho`` and
``(beta+1)/2 * r = mu_k'(rho) = sqrt(rho k(rho))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import Params
from .spectral import Grid

DENSITY_FLOOR = 1e-8


class DensityError(ValueError):
    """Density left the admissible set (nonpositive, below the floor, or not real)."""


def check_density(rho, floor: float = DENSITY_FLOOR):
    rho = np.asarray(rho, dtype=float)
    if not np.all(np.isfinite(rho)):
        raise DensityError("density is not finite")
    lo = float(np.min(rho))
    if lo < floor:
        raise DensityError(f"min density {lo:.3e} below floor {floor:.1e}")
    return rho


def rho_to_r(rho, beta: float, floor: float = DENSITY_FLOOR):
    rho = check_density(rho, floor)
    if beta == -1:
        return np.log(rho)
    e = (beta + 1) / 2
    return rho**e / e


def r_to_rho(r, beta: float):
    r = np.asarray(r, dtype=float)
    if beta == -1:
        return np.exp(r)
    e = (beta + 1) / 2
    base = e * r
    if np.any(~(base > 0)):
        raise DensityError("r outside the range of rho_to_r (would give rho <= 0)")
    return base ** (1 / e)


def capillary_gradient_A(rho, beta: float, grid: Grid):
    """``A = rho**((beta-1)/2) * d_x rho``."""
    rho = check_density(rho)
    return rho ** ((beta - 1) / 2) * grid.derivative(rho)


def mu_k_prime(rho, beta: float):
    rho = check_density(rho)
    return rho ** ((beta + 1) / 2)


def effective_velocity(rho, u, alpha: float, grid: Grid):
    """``V = u + Q`` with ``Q = mu(rho) d_x rho / rho**2``."""
    return np.asarray(u, dtype=float) + drift_velocity_Q(rho, alpha, grid)


def drift_velocity_Q(rho, alpha: float, grid: Grid):
    rho = check_density(rho)
    return rho ** (alpha - 2) * grid.derivative(rho)


def korteweg_divergence(rho, beta: float, grid: Grid):
    """``d_x K = rho d_x( d_x(k d_x rho) - k'/2 |d_x rho|^2 )`` with dealiased products."""
    rho = check_density(rho)
    rho_x = grid.derivative(rho)
    k = rho**beta
    dk = beta * rho ** (beta - 1)
    inner = grid.derivative(grid.dealias_product(k, rho_x)) - 0.5 * grid.dealias_product(
        dk, grid.dealias_product(rho_x, rho_x)
    )
    return grid.dealias_product(rho, grid.derivative(inner))


def pressure(rho, gamma: float):
    return check_density(rho) ** gamma


def pressure_F(rho, gamma: float):
    """Pressure potential: ``rho**gamma/(gamma-1)``, or ``rho log rho`` at gamma = 1."""
    rho = check_density(rho)
    if gamma == 1:
        return rho * np.log(rho)
    return rho**gamma / (gamma - 1)


@dataclass
class State:
    """Augmented unknowns (r, u) on the collocation grid, possibly a stack of paths."""

    r: np.ndarray
    u: np.ndarray
    params: Params
    grid: Grid
    time: float = 0.0
    _rho: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if self.r.shape != self.u.shape or self.r.shape[-1] != self.grid.n_points:
            raise ValueError(
                f"r {self.r.shape} and u {self.u.shape} must match grid {self.grid.n_points}"
            )

    @classmethod
    def from_primitive(cls, rho, u, params: Params, grid: Grid | None = None, time=0.0, project=True):
        grid = grid or Grid.for_order(params.galerkin_order)
        r = rho_to_r(rho, params.beta)
        u = np.asarray(u, dtype=float)
        if project:
            r = grid.project(r, params.galerkin_order)
            u = grid.project(u, params.galerkin_order)
        return cls(r=r, u=u, params=params, grid=grid, time=time)

    @property
    def rho(self):
        if self._rho is None:
            self._rho = r_to_rho(self.r, self.params.beta)
        return self._rho

    @property
    def batched(self) -> bool:
        return self.r.ndim > 1

    def with_fields(self, r, u, time=None) -> "State":
        return State(r=r, u=u, params=self.params, grid=self.grid,
                     time=self.time if time is None else time)

    def path(self, i: int) -> "State":
        return self.with_fields(self.r[i], self.u[i])
