"""Acceptance criteria 1-10; the terminal summary prints one PASS/FAIL line per criterion."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from hypoell.cli import EXIT_FAIL, main
from hypoell.fbi_probe import (
    DEFAULT_LAMBDAS,
    STANDARD_POINTS,
    builtin,
    gevrey_example_derivative,
    gevrey_example_values,
    gevrey_growth_ratio,
    wavefront_probe,
)
from hypoell.fixtures import box_b_model, box_b_symbol, heisenberg_example, p_minus
from hypoell.model_parametrix import (
    LocalizedModel,
    apriori_scaling,
    build_parametrix,
    ground_states,
    projection_h,
    quantize,
    residual_scaling,
    wigner_symbol_of_h,
)
from hypoell.spectral_geometry import FiberDirection, check_hypotheses, hamiltonian_matrix, tr_plus
from hypoell.symbols import PolySymbol, moyal_product_gaussian, subprincipal_symbol
from hypoell.weights import DeformationField, evolve_weight, tangency_check, weight_gap_report

from algebra_suite import (
    bracket_identity_failures,
    jacobi_failures,
    leibniz_failures,
    moyal_associativity_failures,
    moyal_unit_failures,
)

PARAMETRIX_LAMBDAS = [1e2, 1e3, 1e4, 1e5]
criterion = pytest.mark.criterion


# -- 1 ---------------------------------------------------------------------------------

@criterion(1)
def test_c1_worked_example_passes_exactly():
    start = time.perf_counter()
    report = check_hypotheses(heisenberg_example(nu=2, n_s=1))
    elapsed = time.perf_counter() - start
    assert report.h1["pass"] and report.h2["pass"] and report.h3["pass"]
    for ray in report.rays:
        dims = ray.q.dims
        assert ray.q.exact and ray.q == PolySymbol.from_expr(dims, "eta + I*y")
        # (1/i){conj q, q} on sigma2 at |sigma| = 1, as an exact symbol
        assert ray.bracket_symbol.exact
        assert ray.bracket_symbol == PolySymbol.constant(dims, 2)
        assert ray.h3["bracket_exact"] == "2"
    assert elapsed < 1.0


# -- 2 ---------------------------------------------------------------------------------

@criterion(2)
@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("tau_abs", [1, 2])
def test_c2_tr_plus_of_box_b(n, tau_abs):
    dims, p2, p1 = box_b_symbol(n)
    for sign in (1, -1):
        rho = [0] * dims.nvars
        rho[dims.s_index() + dims.n] = sign * tau_abs
        trp = tr_plus(hamiltonian_matrix(p2, rho))
        assert abs(trp - n * tau_abs) <= 1e-10
        q = complex(subprincipal_symbol(p2, p1)(rho)) + trp
        assert abs(q - n * (tau_abs - sign * tau_abs)) <= 1e-10


@criterion(2)
@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("weight", [1, 2])
def test_c2_q_of_box_b_on_each_ray(n, weight):
    spec = box_b_model(n)
    var = spec.fiber_directions[0].var
    spec = replace(spec, fiber_directions=(FiberDirection(var, 1, weight), FiberDirection(var, -1, weight)))
    report = check_hypotheses(spec)
    for ray in report.rays:
        tau = ray.ray.sign * weight
        assert ray.tr_plus == n * weight
        assert complex(ray.q(ray.ray.base_point(ray.q.dims))) == n * (abs(tau) - tau)


# -- 3 ---------------------------------------------------------------------------------

@criterion(3)
def test_c3_p_minus_failure_detection():
    report = check_hypotheses(p_minus())
    statuses = {r.ray.sign: r for r in report.rays}
    pos, neg = statuses[1], statuses[-1]
    assert pos.h3_status == "fail" and not pos.h3["pass"]
    assert pos.q(pos.ray.base_point(pos.q.dims)) == 0
    assert neg.h3_status != "fail"
    assert complex(neg.q(neg.ray.base_point(neg.q.dims))) == 2   # 2|tau| at |tau| = 1
    assert main(["check", "--spec", "p_minus"]) == EXIT_FAIL


# -- 4 ---------------------------------------------------------------------------------

@criterion(4)
@pytest.mark.parametrize("nu", [1, 2])
@pytest.mark.parametrize("omega", [0.5, 1, 2])
def test_c4_parametrix_identities(nu, omega):
    model = LocalizedModel.harmonic(nu, omega)
    basis = model.basis()
    p2 = quantize(model.p2, basis)
    gs = ground_states(p2)
    h = projection_h(gs).matrix
    P2 = p2.full()
    keep = basis.keep_mask()
    sub = np.ix_(keep, keep)
    assert np.abs((h @ P2)[sub]).max() <= 1e-8
    assert np.abs((h @ h - gs.c0 * h)[sub]).max() <= 1e-8
    par = build_parametrix(p2, quantize(model.ell1_linear, basis), gs, 1e3)
    assert np.abs((par.F.matrix @ P2 - np.eye(basis.size) + h / gs.c0)[sub]).max() <= 1e-8
    g = wigner_symbol_of_h(gs)
    prod = moyal_product_gaussian(g, model.p2)
    assert g.exact and prod.exact and prod.is_zero()


# -- 5, 6 --------------------------------------------------------------------------------

@criterion(5)
def test_c5_residual_scaling():
    start = time.perf_counter()
    model = LocalizedModel.harmonic(1, 1)
    basis = model.basis(32, 32)
    exp = residual_scaling(model, PARAMETRIX_LAMBDAS, basis)
    elapsed = time.perf_counter() - start
    assert not exp.flagged
    assert abs(exp.fitted_slope + 0.5) <= 0.1
    assert elapsed < 60


@criterion(6)
def test_c6_loss_of_three_halves():
    model = LocalizedModel.harmonic(1, 1)
    exp = apriori_scaling(model, PARAMETRIX_LAMBDAS, model.basis(32, 32))
    assert abs(exp.fitted_slope + 0.5) <= 0.1
    control = apriori_scaling(LocalizedModel.harmonic(1, 1, "1"), PARAMETRIX_LAMBDAS, model.basis(32, 32))
    assert abs(control.fitted_slope) <= 0.1


# -- 7 ---------------------------------------------------------------------------------

@criterion(7)
@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_c7_closed_form_matches_quadrature(s):
    for k in range(21):
        exact = s * math.gamma(s * (k + 1))
        quad = gevrey_example_derivative(s, k, method="quadrature")
        assert abs(quad - exact) <= 1e-6 * exact
        assert gevrey_example_derivative(s, k) == pytest.approx(exact, rel=1e-12)


@criterion(7)
@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_c7_growth_ratio_literal(s):
    """log D_t^k u(0,0) / log(k!^s) at k = 20 (expected red: the geometric factor s^(sk) dominates)."""
    ratio = gevrey_growth_ratio(s, 20)
    assert 0.95 <= ratio <= 1.05, f"ratio {ratio:.4f}"


@criterion(7)
@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_c7_growth_ratio_with_geometric_factor(s):
    ratio = gevrey_growth_ratio(s, 20, geometric=True)
    assert 0.95 <= ratio <= 1.05


@criterion(7)
def test_c7_finite_difference_residual():
    h = 1e-2
    x = np.arange(1 - h, 2 + 1.5 * h, h)
    t = np.arange(-1 - h, 1 + 1.5 * h, h)
    u = gevrey_example_values(2.0, x, t).values
    uxx = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / h ** 2
    utt = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / h ** 2
    ut = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
    # P_- u = D_x^2 u + x^2 D_t^2 u - D_t u with D = -i d
    res = -uxx - x[1:-1, None] ** 2 * utt + 1j * ut
    assert np.abs(res).max() < 1e-3


# -- 8 ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def probe_run():
    start = time.perf_counter()
    gauss, kink = builtin("gaussian"), builtin("abs")
    out = {
        "gaussian": [wavefront_probe(gauss, p, DEFAULT_LAMBDAS) for p in STANDARD_POINTS],
        "abs_singular": [wavefront_probe(kink, (0.0, xi), DEFAULT_LAMBDAS) for xi in (1.0, -1.0)],
        "abs_regular": [wavefront_probe(kink, (x, xi), DEFAULT_LAMBDAS) for x in (1.0, -1.0) for xi in (1.0, -1.0)],
        "gevrey": wavefront_probe(builtin("gevrey:s=2"), ((0.0, 0.0), (0.0, 1.0)), DEFAULT_LAMBDAS),
    }
    out["elapsed"] = time.perf_counter() - start
    return out


@criterion(8)
def test_c8_gaussian_analytic_everywhere(probe_run):
    assert [v.kind for v in probe_run["gaussian"]] == ["analytic"] * 16


@criterion(8)
def test_c8_abs(probe_run):
    assert [v.kind for v in probe_run["abs_singular"]] == ["not_decaying"] * 2
    assert [v.kind for v in probe_run["abs_regular"]] == ["analytic"] * 4


@criterion(8)
def test_c8_gevrey_order(probe_run):
    v = probe_run["gevrey"]
    assert v.kind == "gevrey" and 1.7 <= v.s_est <= 2.3


@criterion(8)
def test_c8_runtime(probe_run):
    assert probe_run["elapsed"] < 120


# -- 9 ---------------------------------------------------------------------------------

@criterion(9)
def test_c9_weight_deformation():
    spec = heisenberg_example()
    field = DeformationField.standard(spec.dims)
    w = evolve_weight(field, 0.05)
    assert w.gap.min() >= -1e-12
    rep = weight_gap_report(w, k1=(0.1, 0.5))
    assert rep.n_k1 > 0
    lo, hi = rep.ratio_range
    assert 0.5 <= lo and hi <= 2.0
    tang = tangency_check(field, [spec.sigma1, spec.sigma2])
    assert max(tang.violations) < 1e-12


# -- 10 --------------------------------------------------------------------------------

@criterion(10)
@pytest.mark.parametrize("suite", [moyal_associativity_failures, moyal_unit_failures, bracket_identity_failures,
                                   jacobi_failures, leibniz_failures], ids=lambda f: f.__name__)
def test_c10_algebra_suite(suite):
    assert suite() == 0
