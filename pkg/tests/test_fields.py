import numpy as np
import pytest
from hypothesis import given, strategies as st

from nskorteweg.fields import (
    DensityError,
    State,
    capillary_gradient_A,
    drift_velocity_Q,
    effective_velocity,
    korteweg_divergence,
    mu_k_prime,
    pressure_F,
    r_to_rho,
    rho_to_r,
)
from nskorteweg.params import Params
from nskorteweg.spectral import Grid

TWO_PI = 2 * np.pi
betas = st.sampled_from([-3.0, -1.0, -0.5, 0.0, 1.0, 2.5])


def smooth_positive(grid, seed, amp=0.5):
    rng = np.random.default_rng(seed)
    k = np.arange(1, 5)
    c = rng.standard_normal((2, 4)) / k**3
    f = np.cos(TWO_PI * np.outer(grid.x, k)) @ c[0] + np.sin(TWO_PI * np.outer(grid.x, k)) @ c[1]
    return 1 + amp * f / np.max(np.abs(f))


def test_rho_to_r_examples():
    assert np.allclose(rho_to_r(np.ones(8), 1.0), 1.0)
    assert np.allclose(rho_to_r(np.ones(8), -1.0), 0.0)
    assert np.allclose(r_to_rho(np.full(8, 2.0), 0.0), 1.0)
    assert np.allclose(r_to_rho(np.zeros(8), -1.0), 1.0)


@given(betas, st.integers(0, 10_000))
def test_roundtrip(beta, seed):
    rho = smooth_positive(Grid(32), seed, amp=0.9)
    assert np.allclose(r_to_rho(rho_to_r(rho, beta), beta), rho, rtol=1e-12, atol=0)


@given(st.floats(-0.9, 3), st.integers(0, 10_000))
def test_r_sign_and_monotone(beta, seed):
    rho = smooth_positive(Grid(32), seed)
    r = rho_to_r(rho, beta)
    assert np.all(np.sign(r) == np.sign(2 / (beta + 1)))
    r2 = r * 1.01
    assert np.all(r_to_rho(r2, beta) > r_to_rho(r, beta))


def test_density_errors():
    with pytest.raises(DensityError):
        rho_to_r(np.array([1.0, 0.0]), 0.0)
    with pytest.raises(DensityError):
        r_to_rho(np.array([1.0, -1.0]), 1.0)


def test_capillary_gradient(grid64):
    x = grid64.x
    assert np.allclose(capillary_gradient_A(np.full(64, 2.0), 1.0, grid64), 0)
    A = capillary_gradient_A(1 + 0.1 * np.sin(TWO_PI * x), 1.0, grid64)
    assert np.allclose(A, 0.2 * np.pi * np.cos(TWO_PI * x), atol=1e-12)


@given(betas, st.integers(0, 10_000))
def test_gradient_of_r_is_A(beta, seed):
    g = Grid(128)
    rho = smooth_positive(g, seed)
    diff = capillary_gradient_A(rho, beta, g) - g.derivative(rho_to_r(rho, beta))
    assert g.norm_hs(diff, 0) <= 1e-8


@given(st.sampled_from([-3.0, -0.5, 0.0, 1.0, 2.5]), st.integers(0, 10_000))
def test_mu_k_prime_relation(beta, seed):
    rho = smooth_positive(Grid(32), seed)
    assert np.allclose((beta + 1) / 2 * rho_to_r(rho, beta), mu_k_prime(rho, beta), rtol=1e-12)
    assert np.allclose(mu_k_prime(rho, -1.0), 1.0)
    assert np.allclose(mu_k_prime(np.ones(4), 2.0), 1.0)


def test_effective_velocity(grid64):
    x = grid64.x
    u = np.sin(TWO_PI * x)
    assert np.allclose(effective_velocity(np.full(64, 1.5), u, 1.0, grid64), u)
    V = effective_velocity(1 + 0.1 * np.sin(TWO_PI * x), np.zeros(64), 2.0, grid64)
    assert np.allclose(V, 0.2 * np.pi * np.cos(TWO_PI * x), atol=1e-12)
    rho = 1 + 0.3 * np.cos(TWO_PI * x)
    Q = rho ** (0.7 - 2) * grid64.derivative(rho)
    assert np.allclose(effective_velocity(rho, u, 0.7, grid64) - u, Q)
    assert np.allclose(drift_velocity_Q(rho, 0.7, grid64), Q)


def test_korteweg_constant_and_beta_zero():
    g = Grid(128)
    assert np.allclose(korteweg_divergence(np.full(128, 1.3), 0.5, g), 0, atol=1e-12)
    rho = 1 + 0.2 * np.sin(TWO_PI * g.x)
    direct = rho * g.derivative(rho, 3)
    assert np.allclose(korteweg_divergence(rho, 0.0, g), direct, atol=1e-9)


@pytest.mark.parametrize("beta", [-1.0, 0.0, 1.5])
def test_korteweg_work_identity(beta):
    # <d_x K, u> + d/dt int k |rho_x|^2 / 2 = 0 along rho_t = -(rho u)_x
    g = Grid(256)
    x = g.x
    rho = 1 + 0.3 * np.cos(TWO_PI * x) + 0.1 * np.sin(2 * TWO_PI * x)
    u = 0.5 * np.sin(TWO_PI * x) + 0.2 * np.cos(3 * TWO_PI * x)
    rho_t = -g.derivative(rho * u)

    def cap(r):
        return g.integrate(r**beta * g.derivative(r) ** 2 / 2)

    h = 1e-3
    c = [cap(rho + j * h * rho_t) for j in (-2, -1, 1, 2)]
    ddt = (c[0] - 8 * c[1] + 8 * c[2] - c[3]) / (12 * h)
    work = g.integrate(korteweg_divergence(rho, beta, g) * u)
    assert abs(work + ddt) <= 1e-6 * max(1.0, abs(work))


def test_pressure_potential():
    assert np.allclose(pressure_F(np.ones(4), 2.0), 1.0)
    assert np.allclose(pressure_F(np.ones(4), 1.0), 0.0)
    rho = np.linspace(0.1, 5, 200)
    h = 1e-3
    for gam in (1.0, 1.4, 2.0, 3.0):
        second = (pressure_F(rho + h, gam) - 2 * pressure_F(rho, gam) + pressure_F(rho - h, gam)) / h**2
        assert np.all(second >= 0)


def test_state_from_primitive_and_paths():
    p = Params(1.0, 0.0, galerkin_order=8)
    g = Grid.for_order(8)
    rho = np.stack([1 + 0.1 * np.cos(TWO_PI * g.x), np.ones(g.n_points)])
    s = State.from_primitive(rho, np.zeros_like(rho), p, g)
    assert s.batched
    assert np.allclose(s.path(0).rho, rho[0], atol=1e-12)
    with pytest.raises(ValueError):
        State(np.zeros(4), np.zeros(5), p, g)
