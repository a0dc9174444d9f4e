import math

import numpy as np
import pytest
import sympy as sp
from scipy.linalg import expm
from scipy.optimize import brentq

from hypoell.fixtures import heisenberg_example
from hypoell.symbols import PhaseSpaceDims, PolySymbol
from hypoell.weights import (
    CausticError,
    DeformationField,
    default_grid,
    evolve_weight,
    graph_defect,
    graph_window,
    slice_grid,
    tangency_check,
    weight_gap_report,
)

D1 = PhaseSpaceDims(1, 0, 0)
DS = PhaseSpaceDims(1, 0, 1)


def exact_gap(t, d):
    """``phi_t - phi0`` for ``r = |z - z0|^2``: the Riccati solution ``(e^{4t} - 1)/4 |x - x0|^2``."""
    return (math.exp(4 * t) - 1) / 4 * d ** 2


def linear_flow_window(C):
    """Graph window for ``r = C (x^2 + (xi - 1)^2)`` in one dimension, from the linear flow."""
    u, v, pu, pv = sp.symbols("u v pu pv", real=True)
    x, xi = u + sp.I * v, -pv - sp.I * pu
    H = sp.expand(sp.re(sp.expand(C * ((x + sp.I * xi) ** 2 + (xi - 1) ** 2))))
    rhs = [-sp.diff(H, pu), -sp.diff(H, pv), sp.diff(H, u), sp.diff(H, v)]
    A = np.array([[float(sp.diff(f, s)) for s in (u, v, pu, pv)] for f in rhs])
    B = np.zeros((4, 2))
    B[0, 0] = B[1, 1] = B[3, 1] = 1.0   # initial data p = (0, v)

    def excess(t):
        M = (expm(A * t) @ B)[:2]
        return np.linalg.norm(M - np.eye(2), 2) - 0.5

    return brentq(excess, 1e-9, 5.0)


@pytest.mark.parametrize("dims", [DS, PhaseSpaceDims(2, 1, 1)])
@pytest.mark.parametrize("t", [0.05, 0.2])
def test_gap_matches_riccati_solution(dims, t):
    w = evolve_weight(DeformationField.standard(dims), t)
    np.testing.assert_allclose(w.gap, exact_gap(t, w.distance), atol=1e-9)


def test_rk4_converges_at_fourth_order():
    field = DeformationField.standard(DS)
    errs = []
    for n in (5, 10, 20):
        w = evolve_weight(field, 0.2, n_steps=n)
        errs.append(np.abs(w.gap - exact_gap(0.2, w.distance)).max())
    for a, b in zip(errs, errs[1:]):
        assert 12 < a / b < 20


def test_zero_time_is_phi0():
    w = evolve_weight(DeformationField.standard(DS), 0.0)
    np.testing.assert_array_equal(w.samples, w.phi0)
    assert w.steps == 0 and w.graph_defect == 0.0


def test_constant_symbol_shifts_weight():
    field = DeformationField(PolySymbol.constant(D1, 3.0, exact=False), ([0.0], [1.0]), strict=False)
    assert field.flagged
    w = evolve_weight(field, 0.1)
    np.testing.assert_allclose(w.samples, w.phi0 + 0.3, atol=1e-13)


def test_gradient_of_phi0_at_time_zero():
    w = evolve_weight(DeformationField.standard(DS), 0.0)
    # d_x phi0 = (1/2)(d_u - i d_v) phi0 = -i Im(x) / 2
    np.testing.assert_allclose(w.gradient_samples, -0.5j * w.points.imag, atol=1e-15)


@pytest.mark.parametrize("C", [0.5, 1.0, 2.0, 4.0])
def test_graph_window_matches_linear_flow(C):
    field = DeformationField.standard(D1, C=C)
    eps0 = graph_window(field, default_grid(field), t_max=3.0)
    assert eps0 == pytest.approx(linear_flow_window(C), rel=2e-3)


def test_graph_window_shrinks_with_C():
    eps = [graph_window(f, default_grid(f), t_max=2.0)
           for f in (DeformationField.standard(DS, C=c) for c in (1.0, 2.0, 4.0))]
    assert eps[0] > eps[1] > eps[2]


def test_caustic_is_reported():
    field = DeformationField.standard(DS)
    with pytest.raises(CausticError) as info:
        evolve_weight(field, 2.0)
    assert info.value.safe_t == pytest.approx(math.log(2) / 2, rel=2e-3)
    assert graph_defect(field, default_grid(field), 0.1) < 0.5


def test_gap_report_bounds():
    w = evolve_weight(DeformationField.standard(DS), 0.05)
    rep = weight_gap_report(w)
    lo, hi = rep.ratio_range
    expect = (math.exp(0.2) - 1) / 0.2
    assert lo == pytest.approx(expect, rel=1e-6) and hi == pytest.approx(expect, rel=1e-6)
    assert rep.min_gap >= -1e-12
    assert rep.alpha1 == pytest.approx(exact_gap(0.05, 0.1) / 0.05, rel=1e-6)
    doc = rep.to_json()
    assert doc["Omega4"]["sup_gap"] <= doc["Omega4"]["taylor_bound"]


def test_tangency_on_model_manifolds():
    spec = heisenberg_example()
    field = DeformationField.standard(spec.dims)
    rep = tangency_check(field, [spec.sigma1, spec.sigma2])
    assert rep.ok and max(rep.violations) < 1e-12
    # moving the center off sigma1 tilts H_r across it
    off = ([0.0, 0.5, 0.0, 0.0], list(field.center[1]))
    rep = tangency_check(DeformationField.standard(spec.dims, center=off), [spec.sigma1])
    assert not rep.ok and rep.violations[0] == pytest.approx(1.0)
    assert rep.to_json()["ok"] is False


def test_field_validation():
    with pytest.raises(ValueError):
        DeformationField(PolySymbol.from_expr(DS, "s**2", exact=False), ([0.0, 0.0], [0.0, 1.0]))
    flagged = DeformationField(PolySymbol.from_expr(DS, "s**2", exact=False), ([0.0, 0.0], [0.0, 1.0]),
                               strict=False)
    assert flagged.flagged
    with pytest.raises(ValueError):
        DeformationField.standard(DS, C=0.0)
    with pytest.raises(ValueError):
        DeformationField.standard(DS, center=([0.0], [1.0]))
    with pytest.raises(ValueError):
        DeformationField(PolySymbol.from_expr(D1, "I*t**2 + tau**2", exact=False), ([0.0], [0.0]))
    with pytest.raises(ValueError):
        evolve_weight(DeformationField.standard(DS), -0.1)


def test_grids_and_csv():
    field = DeformationField.standard(DS)
    g = slice_grid(field, coord=1, n=5)
    assert g.shape == (25, 2) and np.all(g[:, 0] == field.center_complex[0])
    w = evolve_weight(field, 0.05, grid=g)
    lines = w.to_csv().splitlines()
    assert lines[0] == "re_x1,re_x2,im_x1,im_x2,phi_t,phi_0,gap"
    assert len(lines) == 26
    with pytest.raises(ValueError):
        evolve_weight(field, 0.05, grid=np.zeros((3, 3)))
