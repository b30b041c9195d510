"""Tendencies of the truncated, Galerkin-projected (r, u) system.

Every nonlinear term is evaluated pointwise on the 3/2-padded grid from the
spectral coefficients of ``r`` and ``u`` and projected once onto ``|k| <= m``
at the end.  Density derivatives come from the chain rule in ``r``:

    rho_x             = r_x * rho**((1-beta)/2)
    d_x mu_k'(rho)    = (beta+1)/2 * r_x
    d_x(mu_k' r_xx)   = mu_k' r_xxx + (beta+1)/2 r_x r_xx

so no derivative of a non-polynomial function is ever taken spectrally.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import DensityError, State
from .noise import noise_field
from .spectral import Grid


def cutoff_argument(state: State):
    """``y = |r|_{W2,inf} + |u|_{W2,inf}`` on the grid; an array for stacked states."""
    g = state.grid
    y = g.norm_w2inf(state.r) + g.norm_w2inf(state.u)
    return float(y) if np.ndim(y) == 0 else y


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (t * (6 * t - 15) + 10)


def cutoff_theta(y, R: float):
    """``1 - S(y - R)``: equal to 1 (exactly) up to R and 0 from R+1 on."""
    out = 1.0 - smoothstep(np.asarray(y, dtype=float) - R)
    return float(out) if out.ndim == 0 else out


@dataclass
class Tendency:
    """Projected tendencies, held as Galerkin coefficients; ``dr``/``du_drift``/``du_noise`` give grid values."""

    dr_hat: np.ndarray
    du_hat: np.ndarray
    noise_hat: np.ndarray | None
    theta: np.ndarray | float
    y: np.ndarray | float
    mu_bar: np.ndarray | float
    nu_bar: np.ndarray | float
    work: "PaddedFields" = field(repr=False)

    def _values(self, c):
        out = self.work.grid.values(c)
        return out if self.work.batched else out[0]

    @property
    def dr(self):
        return self._values(self.dr_hat)

    @property
    def du_drift(self):
        return self._values(self.du_hat)

    @property
    def du_noise(self):
        return None if self.noise_hat is None else self._values(self.noise_hat)

    @property
    def du_noise_pending(self) -> bool:
        return self.noise_hat is None


class PaddedFields:
    """Pointwise fields of one (possibly stacked) state on the padded grid."""

    def __init__(self, state: State, strict: bool = True):
        p = state.params
        g = state.grid
        self.grid, self.params, self.m = g, p, p.galerkin_order
        self.batched = state.batched
        self.n_pad = g.padded_points
        ru = np.stack([np.atleast_2d(state.r), np.atleast_2d(state.u)])
        c = g.coeffs(ru)
        ik = 1j * g.kappa
        # derivative orders 0..3 of r and u in one transform each way
        d = np.stack([c * ik**j for j in range(4)])
        d[1::2, ..., -1] = 0.0
        self.coeffs_r, self.coeffs_u = c[0], c[1]
        pad = np.zeros(d.shape[:-1] + (self.n_pad // 2 + 1,), dtype=complex)
        pad[..., : d.shape[-1]] = d
        pad[..., d.shape[-1] - 1] *= 0.5
        vals = np.fft.irfft(pad * self.n_pad, self.n_pad, axis=-1)
        self.r, self.r_x, self.r_xx, self.r_xxx = vals[:, 0]
        self.u, self.u_x, self.u_xx = vals[:3, 1]
        on_grid = np.fft.irfft(d[:3] * g.n_points, g.n_points, axis=-1)
        sup = np.max(np.abs(on_grid), axis=-1).sum(axis=0)
        self.y = sup[0] + sup[1]
        self.rho = self._density(strict)
        self.mu_k = 1.0 if p.beta == -1 else self.rho ** ((p.beta + 1) / 2)
        self.rho_x = self.r_x * self.rho ** ((1 - p.beta) / 2)
        self.theta = np.atleast_1d(cutoff_theta(self.y, p.trunc_radius))[:, None]

    def _density(self, strict):
        beta = self.params.beta
        with np.errstate(all="ignore"):
            if beta == -1:
                rho = np.exp(self.r)
            else:
                e = (beta + 1) / 2
                base = e * self.r
                rho = np.where(base > 0, base, np.nan) ** (1 / e)
        if strict and not np.all(rho > 0):
            raise DensityError("density not positive on the padded grid")
        return rho

    @property
    def rho_xx(self):
        b = self.params.beta
        return (1 - b) / 2 * self.rho ** (-b) * self.r_x**2 + self.rho ** ((1 - b) / 2) * self.r_xx

    def integrate(self, F):
        """Quadrature on the padded grid, one value per path."""
        return self.grid.length * np.mean(F, axis=-1)

    def project_coeffs(self, F):
        """Galerkin coefficients (on the collocation grid) of a padded-grid field."""
        g = self.grid
        c = np.fft.rfft(F, axis=-1)[..., : g.n_points // 2 + 1] / self.n_pad
        c[..., g.wavenumbers > self.m] = 0.0
        return c

    def project(self, F):
        out = self.grid.values(self.project_coeffs(F))
        return out if self.batched else out[0]

    def padded_values(self, c, order=0):
        g = self.grid
        return g.values(g.spectral_derivative(c, order) if order else c, self.n_pad)

    def scalar(self, a):
        a = np.asarray(a).reshape(-1)
        return a if self.batched else float(a[0])

    # raw (unprojected, untruncated) terms ------------------------------
    def r_terms(self):
        return -(self.u * self.r_x + self.mu_k * self.u_x)

    def u_terms(self):
        a, b, c = self.params.alpha, self.params.beta, self.params.gamma
        rho, rho_x = self.rho, self.rho_x
        convect = -self.u * self.u_x
        press = -c * rho ** (c - 2) * rho_x
        visc = rho ** (a - 1) * self.u_xx + a * rho ** (a - 2) * rho_x * self.u_x
        capil = self.mu_k * self.r_xxx + ((b + 1) / 2 + 1) * self.r_x * self.r_xx
        return convect + press + visc + capil

    def linear_coefficients(self):
        """Grid means of mu_k' and rho**(alpha-1), per path."""
        mu = np.broadcast_to(self.mu_k, self.rho.shape).mean(axis=-1)
        nu = (self.rho ** (self.params.alpha - 1)).mean(axis=-1)
        return mu, nu


def rhs_r(state: State):
    """``-theta_R(y) (u r_x + mu_k'(rho) u_x)``, projected."""
    w = PaddedFields(state)
    return w.project(w.theta * w.r_terms())


def drift_u(state: State, forcing=None):
    """Deterministic velocity tendency, projected.

    ``forcing`` (a constant or an array on the grid) is an optional extra body
    force added inside the cut-off; it is zero in every shipped experiment.
    """
    w = PaddedFields(state)
    F = w.u_terms()
    if forcing is not None:
        F = F + w.grid.values(w.grid.coeffs(np.broadcast_to(forcing, state.u.shape)), w.n_pad)
    return w.project(w.theta * F)


def galerkin_tendency(state: State, inc=None, strict: bool = True, forcing=None) -> Tendency:
    """Projected tendencies of the truncated system, and theta_R * noise when ``inc`` is given.

    ``inc`` is a :class:`~nskorteweg.noise.WienerIncrement` or an array of
    increments with shape ``(..., K)`` (one row per stacked path).
    """
    w = PaddedFields(state, strict=strict)
    F = w.u_terms()
    if forcing is not None:
        F = F + w.grid.values(w.grid.coeffs(np.broadcast_to(forcing, state.u.shape)), w.n_pad)
    mu, nu = w.linear_coefficients()
    noise_hat = None
    spec = state.params.noise
    if inc is not None:
        dW = np.atleast_2d(getattr(inc, "dW", inc))
        if spec.family == "off":
            noise_hat = np.zeros_like(w.coeffs_u)
        else:
            x_pad = np.arange(w.n_pad) * (w.grid.length / w.n_pad)
            noise_hat = w.project_coeffs(w.theta * noise_field(spec, x_pad, w.rho, w.u, dW))
    both = w.project_coeffs(w.theta * np.stack([w.r_terms(), F]))
    return Tendency(
        dr_hat=both[0],
        du_hat=both[1],
        noise_hat=noise_hat,
        theta=w.scalar(w.theta),
        y=w.scalar(w.y),
        mu_bar=w.scalar(mu),
        nu_bar=w.scalar(nu),
        work=w,
    )


# -- implicit linear part ---------------------------------------------------

def linear_symbols(grid: Grid, mu_bar, nu_bar, theta=1.0):
    """Per-mode entries of the frozen-coefficient operator L acting on (r_hat, u_hat).

    ``r_t = -theta mu_bar u_x``; ``u_t = theta (nu_bar u_xx + mu_bar r_xxx)``.
    Returned as ``(L_ru, L_ur, L_uu)`` with ``L_rr = 0``, broadcast to ``(..., n//2+1)``.
    """
    kap = grid.kappa
    theta = np.asarray(theta, dtype=float)
    mu = (np.asarray(mu_bar, dtype=float) * theta)[..., None]
    nu = (np.asarray(nu_bar, dtype=float) * theta)[..., None]
    L_ru = -1j * mu * kap
    L_ur = -1j * mu * kap**3
    L_uu = -nu * kap**2
    return L_ru, L_ur, L_uu


def imex_solve(grid: Grid, rhs_r_hat, rhs_u_hat, dt: float, mu_bar, nu_bar, theta=1.0):
    """Solve ``(I - dt L) (r, u)^ = rhs`` mode by mode.

    The determinant is ``1 + dt theta nu k^2 + (dt theta mu)^2 k^4 >= 1``.
    """
    L_ru, L_ur, L_uu = linear_symbols(grid, mu_bar, nu_bar, theta)
    a = -dt * L_ru
    b = -dt * L_ur
    d = 1.0 - dt * L_uu
    det = d - a * b
    if np.any(~(np.abs(det) >= np.finfo(float).eps)):
        raise FloatingPointError("singular implicit mode solve")
    r_new = (d * rhs_r_hat - a * rhs_u_hat) / det
    u_new = (rhs_u_hat - b * rhs_r_hat) / det
    return r_new, u_new


def apply_linear(grid: Grid, r_hat, u_hat, mu_bar, nu_bar, theta=1.0):
    L_ru, L_ur, L_uu = linear_symbols(grid, mu_bar, nu_bar, theta)
    return L_ru * u_hat, L_ur * r_hat + L_uu * u_hat
