import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nskorteweg.spectral import Field, Grid, read_field_binary, read_field_csv, write_field_binary

TWO_PI = 2 * np.pi


def test_roundtrip_and_symmetry(grid64):
    f = np.random.default_rng(1).standard_normal(64)
    assert np.allclose(grid64.values(grid64.coeffs(f)), f, rtol=0, atol=1e-12 * np.max(np.abs(f)))
    full = np.fft.fft(f)
    assert np.allclose(full[1:], np.conj(full[1:][::-1]))


def test_derivatives(grid64):
    s = np.sin(TWO_PI * grid64.x)
    assert np.allclose(grid64.derivative(s, 1), TWO_PI * np.cos(TWO_PI * grid64.x), atol=1e-11)
    assert np.allclose(grid64.derivative(s, 2), -TWO_PI**2 * s, atol=1e-10)
    assert np.allclose(grid64.derivative(np.full(64, 3.0), 3), 0, atol=1e-12)


def test_project(grid64):
    x = grid64.x
    assert np.allclose(grid64.project(np.sin(TWO_PI * 8 * x), 4), 0, atol=1e-14)
    s = np.sin(TWO_PI * x)
    assert np.allclose(grid64.project(s, 4), s, atol=1e-14)


@given(arrays(float, 64, elements=st.floats(-10, 10)), st.integers(1, 31))
def test_projection_idempotent(f, m):
    g = Grid(64)
    once = g.project(f, m)
    assert np.allclose(g.project(once, m), once, atol=1e-12)


def test_dealias_product(grid64):
    x = grid64.x
    gf = np.cos(TWO_PI * 3 * x) + 0.2
    assert np.allclose(grid64.dealias_product(np.ones(64), gf), gf, atol=1e-13)
    s = np.sin(TWO_PI * x)
    assert np.allclose(grid64.dealias_product(s, s), (1 - np.cos(2 * TWO_PI * x)) / 2, atol=1e-13)


def test_dealias_top_modes_match_padded_oracle():
    g = Grid(32)
    x = g.x
    f = np.cos(TWO_PI * 14 * x)
    h = np.sin(TWO_PI * 13 * x)
    # brute force: product on a fine grid, truncated to the retained band
    xf = np.arange(256) / 256
    prod = np.cos(TWO_PI * 14 * xf) * np.sin(TWO_PI * 13 * xf)
    c = np.fft.rfft(prod)[: 17] / 256
    c[-1] = 0  # Nyquist of the coarse grid is not retained
    out = g.coeffs(g.dealias_product(f, h))
    out[-1] = 0
    assert np.allclose(out, c, atol=1e-13)


def test_integrate(grid64):
    x = grid64.x
    assert grid64.integrate(1 + 0.3 * np.cos(TWO_PI * x)) == pytest.approx(1, abs=1e-14)
    assert grid64.integrate(np.sin(TWO_PI * x) ** 2) == pytest.approx(0.5, abs=1e-14)
    assert grid64.integrate(np.zeros(64)) == 0


def test_norm_hs(grid64):
    s = np.sin(TWO_PI * grid64.x)
    assert grid64.norm_hs(np.zeros(64), 2) == 0
    assert grid64.norm_hs(s, 0) == pytest.approx(np.sqrt(0.5), rel=1e-13)
    f = np.exp(np.cos(TWO_PI * grid64.x))
    assert grid64.norm_hs(f, 0) ** 2 == pytest.approx(grid64.integrate(f * f), rel=1e-13)


def test_norm_w2inf(grid64):
    assert grid64.norm_w2inf(np.full(64, -2.5)) == pytest.approx(2.5)
    assert grid64.norm_w2inf(np.zeros(64)) == 0
    val = grid64.norm_w2inf(np.sin(TWO_PI * grid64.x))
    assert abs(val - (1 + TWO_PI + TWO_PI**2)) < 1e-3


def test_field_io(tmp_path, grid64):
    vals = np.cos(TWO_PI * grid64.x)
    fld = Field(grid64, values=vals, time=0.25)
    fld.to_binary(tmp_path / "f.bin")
    back = Field.from_binary(tmp_path / "f.bin")
    assert back.time == 0.25 and np.array_equal(back.values, vals)
    write_field_binary(tmp_path / "f.bin", 2 * vals, 0.5, append=True)
    recs = read_field_binary(tmp_path / "f.bin")
    assert [r[1] for r in recs] == [0.25, 0.5]
    fld.to_csv(tmp_path / "f.csv")
    x, v = read_field_csv(tmp_path / "f.csv")
    assert np.array_equal(v, vals) and np.array_equal(x, grid64.x)
    assert np.allclose(Field(grid64, coeffs=fld.coeffs).values, vals, atol=1e-14)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(7)
    assert Grid.for_order(16).n_points == 64
