import numpy as np
import pytest
from hypothesis import given, strategies as st

from nskorteweg.params import (
    DegenerateExponentError,
    Params,
    capillary_constant,
    classify,
    nv_holds,
    regime_atlas,
    scc_discriminant,
    scc_holds,
)


@pytest.mark.parametrize("a,b,expected", [(1, -1, True), (0, 0, False), (1, 1, True)])
def test_scc_examples(a, b, expected):
    assert scc_holds(a, b, 0.0) is expected or bool(scc_holds(a, b, 0.0)) == expected


@pytest.mark.parametrize("a,b,expected", [(0.5, -1, True), (1, -1, False), (2, -2, True)])
def test_nv_examples(a, b, expected):
    assert bool(nv_holds(a, b)) == expected


def test_capillary_constant_examples():
    assert capillary_constant(1, -1) == pytest.approx(64 / 3, rel=1e-14)
    assert capillary_constant(0, 0) == pytest.approx(-64, rel=1e-14)
    assert capillary_constant(1, 0) == pytest.approx(0, abs=1e-14)


def test_capillary_constant_degenerate_line():
    with pytest.raises(DegenerateExponentError):
        capillary_constant(1, -2)


def test_discriminant_examples():
    assert scc_discriminant(1, -1) == pytest.approx(4 / 9, rel=1e-14)
    assert abs(scc_discriminant(1, 1)) <= 1e-14
    assert abs(scc_discriminant(2, 0)) <= 1e-14


def test_atlas_shape_and_points():
    # [0,1] x [-2,0] with step 1 has 2 alpha nodes and 3 beta nodes
    atlas = regime_atlas((0, 1), (-2, 0), 1.0)
    assert atlas.shape == (2, 3)
    rep = atlas.report_at(1, -1)
    assert rep.scc and not rep.nv
    assert atlas.report_at(1, -2).degenerate_theta


def test_atlas_csv(tmp_path):
    atlas = regime_atlas((0, 1), (-2, 0), 0.5)
    path = atlas.to_csv(tmp_path / "atlas.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "alpha,beta,scc,nv,c_ab,discriminant,degenerate"
    assert len(lines) == 1 + 3 * 5


def test_params_validation():
    with pytest.raises(ValueError):
        Params(-0.1, 0)
    with pytest.raises(ValueError):
        Params(1, 0, gamma=0.5)
    with pytest.raises(ValueError):
        Params(1, 0, trunc_radius=0)
    with pytest.raises(ValueError):
        Params(1, 0, galerkin_order=3)
    assert Params(1, -2).degenerate_theta
    assert Params(1, -1).log_variable


def test_classify_reports_both_conditions():
    rep = classify(0.5, -1)
    assert rep.scc and rep.nv
    assert rep.c_ab == pytest.approx(capillary_constant(0.5, -1))


@given(st.floats(0, 3), st.floats(-4, 3))
def test_scc_iff_nonnegative_discriminant(a, b):
    if abs(a + b + 1) < 1e-3:
        return
    d = scc_discriminant(a, b)
    if abs(d) > 1e-9:
        assert bool(scc_holds(a, b)) == (d > 0)


@given(st.floats(0, 3))
def test_discriminant_vanishes_on_both_boundaries(a):
    for b in (2 * a - 1, 2 * a - 4):
        if abs(a + b + 1) > 1e-3:
            assert abs(scc_discriminant(a, b)) <= 1e-12 * max(1.0, 1 / (a + b + 1) ** 2)
