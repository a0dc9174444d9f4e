from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sympy.polys.domains import QQ_I

from hypoell.symbols import (
    GaussianSymbol,
    PhaseSpaceDims,
    PolySymbol,
    conjugate,
    evaluate,
    moyal_product,
    moyal_product_gaussian,
    poisson_bracket,
    subprincipal_symbol,
)

from algebra_suite import (
    bracket_identity_failures,
    jacobi_failures,
    leibniz_failures,
    moyal_associativity_failures,
    moyal_unit_failures,
)

D1 = PhaseSpaceDims(1, 0, 0)
D2 = PhaseSpaceDims(1, 1, 0)
I = QQ_I(0, 1)


def P(dims, expr):
    return PolySymbol.from_expr(dims, expr)


# -- dims ----------------------------------------------------------------------

def test_dims_names_and_blocks():
    d = PhaseSpaceDims(2, 1, 1)
    assert d.n == 4 and d.nvars == 8
    assert d.names == ["t1", "t2", "y", "s", "tau1", "tau2", "eta", "sigma"]
    assert d.block("tau") == [4, 5]
    assert d.dual(d.index_of("y")) == d.index_of("eta")
    assert PhaseSpaceDims.from_json(d.to_json()) == d


def test_dims_reject_empty():
    with pytest.raises(ValueError):
        PhaseSpaceDims(0, 0, 0)


# -- polynomials ---------------------------------------------------------------

def test_exact_arithmetic_stays_exact():
    a = P(D2, "t**2 + I*y/3")
    b = P(D2, "eta - 1/2")
    c = a * b - b * a + a
    assert c.exact and c == a
    assert (a + 0.5).exact is False


def test_evaluate_is_exact_at_rational_points():
    a = P(D2, "t**2 + I*y/3")
    v = evaluate(a, [Fraction(1, 2), 3, 0, 0])
    assert v == QQ_I(Fraction(1, 4), 1)


def test_diff_and_shift_match_taylor():
    a = P(D1, "t**3*tau + 2*t")
    assert a.diff(0) == P(D1, "3*t**2*tau + 2")
    shifted = a.shift([1, 2])   # a(t + 1, tau + 2)
    assert shifted == P(D1, "(t+1)**3*(tau+2) + 2*(t+1)")


def test_hessian_of_quadratic():
    H = P(D1, "tau**2 + 3*t**2 + t*tau").hessian([0, 0])
    np.testing.assert_allclose(H, [[6, 1], [1, 2]])


def test_real_and_imag_parts():
    a = P(D1, "t + I*tau**2")
    assert a.real_part() == P(D1, "t") and a.imag_part() == P(D1, "tau**2")
    assert conjugate(a) == P(D1, "t - I*tau**2")


def test_subprincipal_symbol():
    # p2 = t*tau contributes (i/2) d_t d_tau p2 = i/2
    assert subprincipal_symbol(P(D1, "t*tau"), P(D1, "1")) == P(D1, "1 + I/2")


@st.composite
def exact_polys(draw, dims=D2, max_deg=3):
    n = draw(st.integers(0, 4))
    terms = {}
    for _ in range(n):
        e = tuple(draw(st.integers(0, max_deg)) for _ in range(dims.nvars))
        terms[e] = QQ_I(Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 5))),
                        Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 5))))
    return PolySymbol(dims, terms)


@settings(max_examples=60, deadline=None)
@given(exact_polys())
def test_json_roundtrip_exact(a):
    b = PolySymbol.from_json(a.to_json(), D2)
    assert b.exact and b == a


@settings(max_examples=60, deadline=None)
@given(exact_polys(), exact_polys())
def test_ring_laws(a, b):
    assert a * b == b * a
    assert (a + b) * b == a * b + b * b
    assert a - a == PolySymbol.zero(D2)


def test_float_json_roundtrip():
    a = P(D2, "0.25*t**2 + 1.5*I*eta")
    b = PolySymbol.from_json(a.to_json(), D2)
    assert not b.exact and b.allclose(a, 0)


# -- Moyal product ---------------------------------------------------------------

def test_x_sharp_xi_convention():
    t, tau = PolySymbol.variable(D1, "t"), PolySymbol.variable(D1, "tau")
    assert moyal_product(t, tau) == t * tau + PolySymbol.constant(D1, I / 2)
    assert moyal_product(tau, t) == t * tau - PolySymbol.constant(D1, I / 2)


def test_convention_against_grid_operators():
    """Op(x) Op(xi) - Op(x xi) on a 64-point grid with spectral D equals i/2."""
    n, L = 64, 16.0
    x = (np.arange(n) - n / 2) * (L / n)
    k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    X = np.diag(x)
    Dm = np.fft.ifft(np.diag(k) @ np.fft.fft(np.eye(n), axis=0), axis=0)   # D = -i d/dx
    f = np.exp(-x ** 2 / 2)
    op_t_tau = (X @ Dm + Dm @ X) / 2                                      # Weyl quantization of t*tau
    lhs = X @ (Dm @ f) - op_t_tau @ f
    sym = moyal_product(PolySymbol.variable(D1, 0), PolySymbol.variable(D1, 1)) - P(D1, "t*tau")
    kappa = complex(sym.constant_term().x, sym.constant_term().y)
    np.testing.assert_allclose(lhs, kappa * f, atol=1e-10)


def test_commutator_with_quadratic():
    tau2, t = P(D1, "tau**2"), P(D1, "t")
    assert moyal_product(tau2, t) - moyal_product(t, tau2) == P(D1, "-2*I*tau")


def test_gaussian_identities_exact():
    for w in (Fraction(1, 2), 1, 2):
        w = Fraction(w)
        h = GaussianSymbol(PolySymbol.constant(D1, 1), [[-w, 0], [0, -1 / w]], 2)
        p2 = P(D1, f"tau**2 + ({w})**2*t**2 - {w}")
        left = moyal_product_gaussian(h, p2)
        right = moyal_product_gaussian(p2, h)
        assert left.exact and left.is_zero()
        assert right.is_zero()


def test_gaussian_product_nonzero_for_other_frequency():
    h = GaussianSymbol(PolySymbol.constant(D1, 1), [[-1, 0], [0, -1]], 2)
    p2 = P(D1, "tau**2 + 4*t**2 - 2")
    assert not moyal_product_gaussian(h, p2).is_zero()


def test_gaussian_symbol_validation():
    with pytest.raises(ValueError):
        GaussianSymbol(PolySymbol.constant(D1, 1), [[1, 0], [0, -1]])


# -- property suite: 200 randomized exact cases each -------------------------------

def test_moyal_associativity():
    assert moyal_associativity_failures() == 0


def test_moyal_unit():
    assert moyal_unit_failures() == 0


def test_bracket_identity():
    assert bracket_identity_failures() == 0


def test_poisson_jacobi():
    assert jacobi_failures() == 0


def test_poisson_leibniz():
    assert leibniz_failures() == 0


def test_bracket_is_leading_commutator_term():
    # for a general pair the commutator differs from (1/i){a,b} only at third order
    a, b = P(D1, "t**3"), P(D1, "tau**3")
    diff = moyal_product(a, b) - moyal_product(b, a) - poisson_bracket(a, b) * (-I)
    assert diff.degree == 0 and not diff.is_zero()
