import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypoell.fbi_probe import (
    DEFAULT_LAMBDAS,
    STANDARD_POINTS,
    SampledFunction,
    builtin,
    classify,
    fbi_sample,
    fbi_transform,
    gevrey_example_derivative,
    gevrey_example_values,
    gevrey_growth_ratio,
    gevrey_nodes,
    wavefront_probe,
)

LAM = np.array(DEFAULT_LAMBDAS)


# -- closed-form oracles ----------------------------------------------------------
# With a = lam/2, b = lam x0 - i lam xi0, c = -lam x0^2/2 + i lam xi0 x0 the
# weighted value is int u(x) exp(-a x^2 + b x + c) dx.

def _half_line(a, b):
    """int_0^inf exp(-a x^2 + b x) dx and int_0^inf x exp(-a x^2 + b x) dx."""
    i0 = mpmath.sqrt(mpmath.pi / a) / 2 * mpmath.exp(b * b / (4 * a)) * mpmath.erfc(-b / (2 * mpmath.sqrt(a)))
    return i0, 1 / (2 * a) + b / (2 * a) * i0


def oracle_log_weighted(name, x0, xi0, lam):
    with mpmath.workdps(80):
        L = mpmath.mpf(lam)
        b = L * x0 - 1j * L * xi0
        c = -L * x0 ** 2 / 2 + 1j * L * xi0 * x0
        if name == "gaussian":
            a = (L + 1) / 2
            val = mpmath.sqrt(mpmath.pi / a) * mpmath.exp(b * b / (4 * a) + c)
        else:
            a = L / 2
            ip, jp = _half_line(a, b)
            im, jm = _half_line(a, -b)
            val = (jp + jm if name == "abs" else ip) * mpmath.exp(c)
        return float(mpmath.log(abs(val))), float(mpmath.arg(val))


@pytest.mark.parametrize("name", ["gaussian", "abs", "heaviside"])
@pytest.mark.parametrize("point", [(0.5, 1.0), (-1.0, -0.5), (0.0, 1.0), (1.0, 1.0)])
def test_weighted_values_match_closed_form(name, point):
    sample = fbi_sample(builtin(name), point, DEFAULT_LAMBDAS)
    for lam, lw, ph, cens in zip(sample.lambdas, sample.log_weighted, sample.phase, sample.censored):
        ref_log, ref_ph = oracle_log_weighted(name, *point, lam)
        assert not cens
        assert lw == pytest.approx(ref_log, abs=1e-8)
        assert math.cos(ph - ref_ph) == pytest.approx(1.0, abs=1e-10)


def test_fbi_transform_at_complex_point():
    u = builtin("gaussian")
    lam, x0, xi0 = 4.0, 0.3, 0.7
    ref_log, ref_ph = oracle_log_weighted("gaussian", x0, xi0, lam)
    ref = math.exp(ref_log + lam * xi0 ** 2 / 2) * complex(math.cos(ref_ph), math.sin(ref_ph))
    assert fbi_transform(u, complex(x0, -xi0), lam) == pytest.approx(ref, rel=1e-10)
    assert fbi_transform(u, complex(0.0, -30.0), 2.0) == complex(math.inf, 0)


def test_raw_samples_agree_with_closed_form():
    x = np.linspace(-8, 8, 8193)
    raw = SampledFunction((x,), np.exp(-x * x / 2))
    sample = fbi_sample(raw, (0.5, 0.5), [25.0, 50.0, 100.0])
    for lam, lw in zip(sample.lambdas, sample.log_weighted):
        assert lw == pytest.approx(oracle_log_weighted("gaussian", 0.5, 0.5, lam)[0], abs=1e-8)


# -- verdicts -----------------------------------------------------------------------

@pytest.mark.parametrize("point", [(0.5, 1.0), (-1.0, 0.5), (0.0, 1.0)])
def test_gaussian_is_analytic(point):
    v = wavefront_probe(builtin("gaussian"), point)
    assert v.kind == "analytic" and v.s_est is None


@pytest.mark.parametrize("point", [(0.0, 1.0), (0.0, -1.0)])
@pytest.mark.parametrize("name", ["abs", "heaviside"])
def test_kinks_and_jumps_do_not_decay(name, point):
    assert wavefront_probe(builtin(name), point).kind == "not_decaying"


def test_abs_is_analytic_away_from_the_kink():
    assert wavefront_probe(builtin("abs"), (1.0, -1.0)).kind == "analytic"


def test_verdict_json_shape():
    doc = wavefront_probe(builtin("gaussian"), (0.5, 0.5)).to_json()
    assert doc["class"] == "analytic"
    assert doc["point"] == {"x0": [0.5], "xi0": [0.5]}
    assert doc["fit"]["best"] == "analytic"


def test_classify_synthetic_families():
    assert classify(LAM, 1.0 - 0.1 * LAM)[0] == "analytic"
    assert classify(LAM, 0.5 - 2 * np.log(LAM))[0] == "not_decaying"
    kind, s, _ = classify(LAM, -1.5 * LAM ** (1 / 3))
    assert kind == "gevrey" and s == pytest.approx(3.0, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(1.6, 5.0), st.floats(0.5, 3.0))
def test_classify_recovers_gevrey_order(s, c):
    kind, s_est, _ = classify(LAM, 2.0 - c * LAM ** (1 / s))
    assert kind == "gevrey" and s_est == pytest.approx(s, rel=1e-3)


def test_classify_rejects_noise():
    rng = np.random.default_rng(0)
    kind, _, fit = classify(LAM, rng.normal(0, 3, LAM.size))
    assert kind == "inconclusive" and "reason" in fit


def test_probe_input_validation():
    u = builtin("gaussian")
    with pytest.raises(ValueError):
        wavefront_probe(u, (0.5, 0.5), [25, 50, 100, 200])
    with pytest.raises(ValueError):
        wavefront_probe(u, (0.5, 0.5), [25, 50, 100, 200, 150])
    with pytest.raises(ValueError):
        wavefront_probe(u, (0.5, 0.5), [25, 50, 100, 200, 1000])
    with pytest.raises(ValueError):
        fbi_sample(u, ((0.5, 0.5), (1.0, 1.0)), [25.0])


def test_under_resolved_samples_are_rejected():
    x = np.linspace(-8, 8, 512)
    coarse = SampledFunction((x,), np.exp(-x * x / 2))
    with pytest.raises(ValueError, match="resolve"):
        fbi_sample(coarse, (0.5, 0.5), [800.0])
    # fine enough for the width but aliasing the probe frequency
    x = np.linspace(-8, 8, 16001)
    fine = SampledFunction((x,), np.exp(-x * x / 2))
    with pytest.raises(ValueError, match="alias"):
        fbi_sample(fine, (0.5, 4.0), [800.0])


def test_non_decaying_integrand_is_rejected():
    x = np.linspace(-2, 2, 4001)
    with pytest.raises(ValueError, match="decay"):
        fbi_sample(SampledFunction((x,), np.abs(x)), (1.9, 0.5), [25.0])


def test_sampled_function_validation():
    with pytest.raises(ValueError):
        SampledFunction((np.array([0.0, 1.0, 3.0]),), np.zeros(3))
    with pytest.raises(ValueError):
        SampledFunction((np.linspace(0, 1, 5),), np.zeros(4))
    with pytest.raises(ValueError):
        builtin("cosine")
    with pytest.raises(ValueError):
        builtin("gevrey:s=abc")


def test_standard_points():
    assert len(STANDARD_POINTS) == 16
    assert {abs(x) for x, _ in STANDARD_POINTS} == {0.5, 1.0}


# -- the Gevrey example --------------------------------------------------------------

@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("k", [0, 1, 7, 20])
def test_gevrey_derivative_matches_quadrature(s, k):
    exact = gevrey_example_derivative(s, k)
    assert exact == pytest.approx(s * math.gamma(s * (k + 1)), rel=1e-12)
    assert gevrey_example_derivative(s, k, method="quadrature") == pytest.approx(exact, rel=1e-6)


def test_gevrey_derivative_validation():
    with pytest.raises(ValueError):
        gevrey_example_derivative(1.0, 3)
    assert gevrey_example_derivative(1.0, 3, strict=False) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        gevrey_example_derivative(2.0, -1)
    with pytest.raises(ValueError):
        gevrey_example_values(1.0, [0, 1], [0, 1])


def test_gevrey_growth_ratios():
    # log(s Gamma(s(k+1))) / log(k!^s) at k = 20, computed independently with mpmath
    for s in (1.5, 2.0, 3.0):
        with mpmath.workdps(30):
            num = mpmath.log(s * mpmath.gamma(s * 21))
            ref = float(num / (s * mpmath.log(mpmath.factorial(20))))
            ref_geo = float(num / (s * mpmath.log(mpmath.factorial(20)) + s * 20 * mpmath.log(s)))
        assert gevrey_growth_ratio(s, 20) == pytest.approx(ref, rel=1e-12)
        assert gevrey_growth_ratio(s, 20, geometric=True) == pytest.approx(ref_geo, rel=1e-12)


@pytest.mark.parametrize("s", [1.5, 2.0, 3.0])
def test_gevrey_nodes_integrate_moments(s):
    rho, c = gevrey_nodes(s, 1.0)
    # the cutoff exp(-V) = 1e-18 bounds the tail of low moments well below 1e-9
    for k in range(3):
        assert np.sum(c * rho ** k) == pytest.approx(s * math.gamma(s * (k + 1)), rel=1e-9)


def test_gevrey_values_at_origin_and_symmetry():
    u = gevrey_example_values(2.0, np.linspace(-1, 1, 5), np.linspace(-1, 1, 5))
    assert u.values[2, 2] == pytest.approx(2.0 * math.gamma(2.0), rel=1e-10)
    # u(-x, t) = u(x, t) and u(x, -t) = conj u(x, t)
    np.testing.assert_allclose(u.values, u.values[::-1], atol=1e-12)
    np.testing.assert_allclose(u.values, u.values[:, ::-1].conj(), atol=1e-12)


def test_gevrey_example_solves_p_minus():
    """Second differences of -u_xx - x^2 u_tt + i u_t on x in [1, 2], t in [-1, 1]."""
    h = 1e-2
    x = np.arange(1 - h, 2 + 1.5 * h, h)
    t = np.arange(-1 - h, 1 + 1.5 * h, h)
    u = gevrey_example_values(2.0, x, t).values
    uxx = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / h ** 2
    utt = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / h ** 2
    ut = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
    res = -uxx - (x[1:-1, None] ** 2) * utt + 1j * ut
    assert np.abs(res).max() < 1e-3


def test_gevrey_builtin_grid():
    u = builtin("gevrey:s=2")
    assert u.ndim == 2 and u.values.shape == (129, 129) and u.sampler is not None
