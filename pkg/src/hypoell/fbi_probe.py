"""FBI transform and analytic wavefront probing.

``Tu(x, lam) = int exp(-(lam/2)(x - x')^2) u(x') dx'`` for complex ``x``.  At
``x = x0 - i xi0`` the weighted quantity

    exp(-lam phi0(x)) Tu(x, lam)
        = int exp(-(lam/2)(x0 - x')^2 + i lam xi0 (x0 - x')) u(x') dx',

with ``phi0(x) = |Im x|^2 / 2``, is what the probe measures; the factor
``exp(lam |xi0|^2 / 2)`` is cancelled analytically, never numerically.

Closed-form built-ins are integrated in mpmath with working precision
chosen from ``lam |xi0|^2`` so that exponentially small values survive the
cancellation in the oscillatory sum; raw sample arrays use float64 and
report values under the rounding floor as censored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import optimize, special

__all__ = [
    "SampledFunction",
    "FBISample",
    "WavefrontVerdict",
    "DEFAULT_LAMBDAS",
    "STANDARD_POINTS",
    "builtin",
    "fbi_transform",
    "fbi_sample",
    "wavefront_probe",
    "classify",
    "gevrey_example_derivative",
    "gevrey_growth_ratio",
    "gevrey_example_values",
    "gevrey_nodes",
]

DEFAULT_LAMBDAS = (25.0, 50.0, 100.0, 200.0, 400.0, 800.0)
STANDARD_POINTS = tuple((x, xi) for x in (-1.0, -0.5, 0.5, 1.0) for xi in (-1.0, -0.5, 0.5, 1.0))
GAUSS_CUTOFF = 1e-18
TAIL_TOL = 1e-14
LN10 = math.log(10.0)


# ---------------------------------------------------------------------------
# sampled functions

@dataclass(frozen=True)
class SampledFunction:
    """Samples of ``u`` on a uniform 1-D or 2-D tensor grid.

    Parameters
    ----------
    grid : tuple of 1-D arrays
        One uniform axis per dimension.
    values : ndarray
        Complex samples with shape ``tuple(len(a) for a in grid)``.
    name : str
    exact : callable, optional
        Scalar evaluator accepting mpmath numbers (1-D only); enables
        high-precision quadrature and grid refinement.
    sampler : callable, optional
        ``sampler(*axes) -> ndarray`` evaluating ``u`` on arbitrary tensor
        grids in float64; enables local grids for 2-D probes.
    breaks : tuple, optional
        ``(x_b, left, right)`` triples for 1-D closed forms that are
        polynomial on each side of ``x_b``; ``left``/``right`` are coefficient
        tuples in powers of ``x - x_b``.  The value at ``x_b`` must be the
        mean of the one-sided limits.  Used for jump corrections.
    """

    grid: tuple
    values: np.ndarray
    name: str = "samples"
    exact: Callable | None = None
    sampler: Callable | None = None
    breaks: tuple = ()

    def __post_init__(self):
        grid = tuple(np.asarray(a, dtype=float) for a in self.grid)
        object.__setattr__(self, "grid", grid)
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if len(grid) not in (1, 2):
            raise ValueError("only 1-D and 2-D grids are supported")
        if vals.shape != tuple(len(a) for a in grid):
            raise ValueError(f"values shape {vals.shape} does not match the grid")
        for a in grid:
            if len(a) < 2:
                raise ValueError("each axis needs at least two points")
            d = np.diff(a)
            if np.any(d <= 0) or np.ptp(d) > 1e-9 * abs(d[0]):
                raise ValueError("grid spacing must be uniform and increasing")

    @property
    def ndim(self) -> int:
        return len(self.grid)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float((a[-1] - a[0]) / (len(a) - 1)) for a in self.grid)

    def tail_ratio(self) -> float:
        """Largest boundary sample relative to the largest sample."""
        v = np.abs(self.values)
        m = float(v.max()) or 1.0
        if self.ndim == 1:
            edge = max(v[0], v[-1])
        else:
            edge = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max())
        return float(edge) / m


def _uniform(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def builtin(name: str, n_points: int = 4096, half_width: float = 8.0) -> SampledFunction:
    """Built-in test functions.

    ``gaussian`` is ``exp(-x^2/2)``, ``abs`` is ``|x|``, ``heaviside`` is the
    unit step with value 1/2 at 0, and ``gevrey:s=<val>`` is the 2-D
    solution of ``D_x^2 + x^2 D_t^2 - D_t`` returned by
    :func:`gevrey_example_values`.
    """
    key = name.strip().lower()
    if key.startswith("gevrey"):
        try:
            s = float(key.split("=", 1)[1])
        except (IndexError, ValueError):
            raise ValueError(f"bad gevrey spec {name!r}; use 'gevrey:s=<val>'") from None
        ax = _uniform(-2.0, 2.0, 129)
        return gevrey_example_values(s, ax, ax)
    table: dict[str, tuple[Callable, Callable, tuple]] = {
        "gaussian": (lambda x: mpmath.exp(-x * x / 2), lambda x: np.exp(-x * x / 2), ()),
        "abs": (lambda x: abs(x), lambda x: np.abs(x), ((0.0, (0, -1), (0, 1)),)),
        "heaviside": (lambda x: mpmath.mpf(1) if x > 0 else (mpmath.mpf(0.5) if x == 0 else mpmath.mpf(0)),
                      lambda x: np.heaviside(x, 0.5), ((0.0, (0,), (1,)),)),
    }
    if key not in table:
        raise ValueError(f"unknown built-in {name!r}; choose gaussian, abs, heaviside or gevrey:s=<val>")
    exact, vec, breaks = table[key]
    x = _uniform(-half_width, half_width, n_points)
    return SampledFunction((x,), vec(x).astype(complex), key, exact=exact,
                           sampler=lambda ax: vec(ax).astype(complex), breaks=breaks)


# ---------------------------------------------------------------------------
# the transform

def _check_resolution(h: float, lam: float, xi0: float) -> None:
    need = lam ** -0.5 / 6
    if h > need * (1 + 1e-12):
        raise ValueError(f"grid spacing {h:.3g} does not resolve the Gaussian width; need <= {need:.3g}")
    if h * lam * abs(xi0) >= math.pi:
        raise ValueError(f"grid spacing {h:.3g} aliases the probe frequency; need < {math.pi / (lam * abs(xi0)):.3g}")


def _window_radius(lam: float, digits: float) -> float:
    """Radius beyond which the Gaussian factor is below ``10^-digits``."""
    return math.sqrt(2 * digits * LN10 / lam)


def _refinement(h: float, lam: float, xi0: float) -> int:
    """Integer refinement factor for closed-form inputs."""
    target = min(lam ** -0.5 / 6, math.pi / (2 * lam * max(abs(xi0), 1e-300)))
    return max(1, math.ceil(h / target - 1e-12))


def _dps_for(lam: float, xi0: float) -> int:
    return int(30 + math.ceil(1.2 * lam * xi0 * xi0 / (2 * LN10)))


@dataclass(frozen=True)
class _Weighted:
    value: complex          # weighted value as float complex (may underflow to 0)
    log_abs: float          # log |value|, exact even when value underflows
    phase: float
    floor: float            # log of the noise floor
    censored: bool


def _break_multiplier(u: SampledFunction) -> int:
    """Refinement multiple putting every breakpoint on a grid node."""
    ax = u.grid[0]
    h = u.spacing[0]
    m = 1
    for xb, _, _ in u.breaks:
        frac = Fraction((float(xb) - float(ax[0])) / h).limit_denominator(64)
        if abs(float(frac) - (float(xb) - float(ax[0])) / h) > 1e-9:
            raise ValueError(f"breakpoint {xb} is not commensurate with the grid")
        m = m * frac.denominator // math.gcd(m, frac.denominator)
    return m


def _jump_correction(x0, xi0, lam, H, xb, left, right, tiny):
    """Euler-Maclaurin correction ``-sum B_2k H^2k/(2k) [c^l - c^r]_{2k-1}`` at a breakpoint.

    ``c`` are Taylor coefficients at ``xb`` of window times the one-sided
    polynomial; the window ``exp(alpha + beta s + gamma s^2)`` has the exact
    recurrence ``(n+1) a_{n+1} = beta a_n + 2 gamma a_{n-1}``.
    """
    D = mpmath.mpf(x0) - xb
    L, XI = mpmath.mpf(lam), mpmath.mpf(xi0)
    alpha = -L / 2 * D * D + 1j * L * XI * D
    beta = L * D - 1j * L * XI
    gamma = -L / 2
    a = [mpmath.exp(alpha)]
    a.append(beta * a[0])
    total = mpmath.mpc(0)
    k = 1
    while True:
        n_need = 2 * k
        while len(a) <= n_need:
            n = len(a) - 1
            a.append((beta * a[n] + 2 * gamma * a[n - 1]) / (n + 1))
        j = 2 * k - 1
        cl = sum(mpmath.mpf(p) * a[j - m] for m, p in enumerate(left) if m <= j)
        cr = sum(mpmath.mpf(p) * a[j - m] for m, p in enumerate(right) if m <= j)
        term = mpmath.bernoulli(2 * k) * H ** (2 * k) / (2 * k) * (cl - cr)
        total -= term
        if (abs(term) <= tiny and k > 2) or k > 2000:
            return total
        k += 1


def _weighted_mp(u: SampledFunction, x0: float, xi0: float, lam: float, refine: int) -> _Weighted:
    """High-precision trapezoid sum over an adaptive window.

    The window starts where the Gaussian drops below ``10^-dps`` and widens
    until the truncated tail, bounded by ``max|u| * int_{|d|>R} exp(-lam d^2/2)``,
    is under the rounding floor; otherwise that bound becomes the floor.
    """
    ax = u.grid[0]
    lo, hi, n = float(ax[0]), float(ax[-1]), len(ax)
    dps = _dps_for(lam, xi0)
    u_max = float(np.max(np.abs(u.values))) or 1.0
    with mpmath.workdps(dps):
        H = (mpmath.mpf(hi) - mpmath.mpf(lo)) / ((n - 1) * refine)
        m = (n - 1) * refine + 1
        h = float(H)
        X0, XI, L = mpmath.mpf(x0), mpmath.mpf(xi0), mpmath.mpf(lam)
        digits = dps
        while True:
            R = _window_radius(lam, digits)
            k0 = max(0, math.ceil((x0 - R - lo) / h))
            k1 = min(m - 1, math.floor((x0 + R - lo) / h))
            acc = mpmath.mpc(0)
            mass = mpmath.mpf(0)
            peak = mpmath.mpf(0)
            edge = mpmath.mpf(0)
            for k in range(k0, k1 + 1):
                x = mpmath.mpf(lo) + k * H
                d = X0 - x
                g = mpmath.exp(-L * d * d / 2)
                f = u.exact(x)
                term = g * mpmath.expj(L * XI * d) * f
                acc += term
                a = abs(g * f)
                mass += a
                peak = max(peak, a)
                if k in (0, m - 1):
                    edge = max(edge, a)
            if peak and edge > TAIL_TOL * peak:
                raise ValueError("windowed integrand does not decay inside the grid; widen the grid")
            acc *= H
            mass *= H
            floor = mass * mpmath.mpf(10) ** (-(dps - 10))
            trunc = u_max * mpmath.sqrt(2 * mpmath.pi / L) * mpmath.erfc(R * mpmath.sqrt(L / 2))
            if (k0 == 0 and k1 == m - 1) or trunc <= floor or digits >= 16 * dps:
                break
            digits *= 2
        floor = max(floor, trunc) if not (k0 == 0 and k1 == m - 1) else floor
        tiny = mass * mpmath.mpf(10) ** (-(dps + 5))
        for xb, left, right in u.breaks:
            XB = mpmath.mpf(xb)
            if abs(XB - X0) <= R:
                acc += _jump_correction(x0, xi0, lam, H, XB, left, right, tiny)
        absval = abs(acc)
        log_abs = float(mpmath.log(absval)) if absval else -math.inf
        phase = float(mpmath.arg(acc)) if absval else 0.0
        return _Weighted(complex(acc), log_abs, phase, float(mpmath.log(floor)) if floor else -math.inf,
                         bool(absval <= floor))


def _axis_weights(axis: np.ndarray, x0: float, xi0: float, lam: float):
    """Window weights on one axis, restricted to the truncation window."""
    h = float((axis[-1] - axis[0]) / (len(axis) - 1))
    R = _window_radius(lam, -math.log10(GAUSS_CUTOFF))
    sel = np.nonzero(np.abs(axis - x0) <= R)[0]
    d = x0 - axis[sel]
    w = np.exp(-lam * d * d / 2 + 1j * lam * xi0 * d)
    return sel, w, h


def _weighted_np(u: SampledFunction, x0: Sequence[float], xi0: Sequence[float], lam: float) -> _Weighted:
    if u.ndim == 1:
        sel, w, h = _axis_weights(u.grid[0], x0[0], xi0[0], lam)
        _check_resolution(h, lam, xi0[0])
        if not sel.size:
            raise ValueError("probe window misses the grid")
        vals = u.values[sel]
        integrand = w * vals
        acc = h * integrand.sum()
        mass = h * np.abs(integrand).sum()
        edges = [np.abs(integrand[[0, -1]]).max()] if (sel[0] == 0 or sel[-1] == len(u.grid[0]) - 1) else []
        peak = np.abs(integrand).max()
    else:
        sx, wx, hx = _axis_weights(u.grid[0], x0[0], xi0[0], lam)
        st, wt, ht = _axis_weights(u.grid[1], x0[1], xi0[1], lam)
        _check_resolution(hx, lam, xi0[0])
        _check_resolution(ht, lam, xi0[1])
        if not sx.size or not st.size:
            raise ValueError("probe window misses the grid")
        V = u.values[np.ix_(sx, st)]
        integrand = wx[:, None] * V * wt[None, :]
        acc = hx * ht * integrand.sum()
        mass = hx * ht * np.abs(integrand).sum()
        A = np.abs(integrand)
        peak = A.max()
        edges = []
        if sx[0] == 0 or sx[-1] == len(u.grid[0]) - 1:
            edges.append(max(A[0].max(), A[-1].max()))
        if st[0] == 0 or st[-1] == len(u.grid[1]) - 1:
            edges.append(max(A[:, 0].max(), A[:, -1].max()))
    if peak and edges and max(edges) > TAIL_TOL * peak:
        raise ValueError("windowed integrand does not decay inside the grid; widen the grid")
    floor = 64 * np.finfo(float).eps * mass
    a = abs(acc)
    return _Weighted(complex(acc), math.log(a) if a else -math.inf, float(np.angle(acc)),
                     math.log(floor) if floor else -math.inf, bool(a <= floor))


def _local_grid_2d(u: SampledFunction, x0, xi0, lam) -> SampledFunction:
    axes = []
    R = _window_radius(lam, -math.log10(GAUSS_CUTOFF))
    for c, f in zip(x0, xi0):
        h = lam ** -0.5 / 6
        if f:
            h = min(h, 2 * math.pi / (3 * lam * abs(f)))
        n = 2 * math.ceil(R / h) + 1
        axes.append(c + h * (np.arange(n) - (n - 1) / 2))
    return SampledFunction(tuple(axes), u.sampler(*axes), u.name)


def _weighted(u: SampledFunction, x0, xi0, lam: float, refine: int = 1) -> _Weighted:
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    xi0 = tuple(float(v) for v in np.atleast_1d(xi0))
    if len(x0) != u.ndim or len(xi0) != u.ndim:
        raise ValueError(f"probe point must have {u.ndim} components")
    if lam < 1:
        raise ValueError("lambda must be at least 1")
    if u.ndim == 1 and u.exact is not None:
        r = refine * _refinement(u.spacing[0], lam, xi0[0])
        r *= _break_multiplier(u)
        return _weighted_mp(u, x0[0], xi0[0], lam, r)
    if u.ndim == 2 and u.sampler is not None:
        return _weighted_np(_local_grid_2d(u, x0, xi0, lam), x0, xi0, lam)
    return _weighted_np(u, x0, xi0, lam)


def fbi_transform(u: SampledFunction, x, lam: float) -> complex:
    """``Tu(x, lam)`` at a complex point by trapezoid quadrature.

    The result is ``exp(lam phi0(x))`` times the weighted value; it overflows
    to ``inf`` when ``lam |Im x|^2 / 2`` exceeds the float range.

    Raises
    ------
    ValueError
        If the grid does not resolve the Gaussian width ``lam^{-1/2}`` (spacing
        at most ``lam^{-1/2}/6``) or the integrand does not decay inside the grid.
    """
    z = np.atleast_1d(np.asarray(x, dtype=complex))
    w = _weighted(u, z.real, -z.imag, lam)
    phi0 = float(np.sum(z.imag ** 2)) / 2
    log_mag = w.log_abs + lam * phi0
    if log_mag > 709:
        return complex(math.inf, 0)
    return complex(math.exp(log_mag) * np.exp(1j * w.phase)) if w.log_abs > -math.inf else 0j


# ---------------------------------------------------------------------------
# probing

@dataclass
class FBISample:
    """Weighted FBI values ``|exp(-lam phi0) Tu(x0 - i xi0, lam)|`` over a sweep."""

    probe_point: tuple
    lambdas: list[float]
    weighted: list[float]
    log_weighted: list[float]
    phase: list[float]
    censored: list[bool]
    log_floor: list[float]

    @property
    def values(self) -> list[complex]:
        """``Tu(x0 - i xi0, lam)``; may overflow to ``inf``."""
        xi = np.atleast_1d(self.probe_point[1])
        out = []
        for lam, lw, ph in zip(self.lambdas, self.log_weighted, self.phase):
            lm = lw + lam * float(np.sum(xi ** 2)) / 2
            out.append(complex(math.inf) if lm > 709 else complex(math.exp(lm) * np.exp(1j * ph)))
        return out

    def csv_rows(self) -> list[tuple]:
        x0, xi0 = self.probe_point
        fmt = lambda v: ";".join(f"{c:g}" for c in np.atleast_1d(v))  # noqa: E731
        return [(fmt(x0), fmt(xi0), lam, w, ph) for lam, w, ph in zip(self.lambdas, self.weighted, self.phase)]


def fbi_sample(u: SampledFunction, point, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
               refine: int = 1) -> FBISample:
    x0, xi0 = point
    rows = [_weighted(u, x0, xi0, float(lam), refine) for lam in lambdas]
    return FBISample(
        (x0, xi0), [float(v) for v in lambdas],
        [math.exp(r.log_abs) if r.log_abs > -745 else 0.0 for r in rows],
        [r.log_abs for r in rows], [r.phase for r in rows],
        [r.censored for r in rows], [r.floor for r in rows],
    )


@dataclass
class WavefrontVerdict:
    """Decay classification of a probe.

    ``kind`` is ``analytic``, ``gevrey``, ``not_decaying`` or ``inconclusive``;
    ``s_est`` is set for Gevrey verdicts.
    """

    kind: str
    s_est: float | None
    fit: dict
    sample: FBISample | None = None

    def to_json(self) -> dict:
        x0, xi0 = self.sample.probe_point if self.sample else (None, None)
        return {
            "class": self.kind,
            "s_est": self.s_est,
            "fit": self.fit,
            "point": {"x0": np.atleast_1d(x0).tolist() if x0 is not None else None,
                      "xi0": np.atleast_1d(xi0).tolist() if xi0 is not None else None},
        }


def _lstsq(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return coef, float(r @ r)


def classify(lambdas: Sequence[float], log_values: Sequence[float], margin: float = 4.0,
             eps_floor: float = 1e-3, s_max: float = 8.0, s_merge: float = 1.25,
             rms_poor: float = 0.25) -> tuple[str, float | None, dict]:
    """Pick the decay model with the smallest residual, subject to the margin rule.

    Models: ``a - eps lam`` (analytic, requires ``eps >= eps_floor``),
    ``a - c lam^(1/s)`` (Gevrey, ``c > 0``) and ``a - b log lam``.  A Gevrey
    fit with ``s <= s_merge`` is folded into the analytic model, and one
    pinned at ``s_max`` into the polynomial model, since a sweep over one
    or two decades cannot separate those cases.  The best
    fit is poor when its RMS residual exceeds ``rms_poor`` and 1% of the
    range of ``log_values``.
    """
    lam = np.asarray(lambdas, dtype=float)
    y = np.asarray(log_values, dtype=float)
    one = np.ones_like(lam)
    models: dict[str, dict] = {}

    (a, e), rss = _lstsq(np.column_stack([one, -lam]), y)
    models["analytic"] = {"a": a, "eps": e, "rss": rss if e >= eps_floor else math.inf}

    (a, b), rss = _lstsq(np.column_stack([one, -np.log(lam)]), y)
    models["not_decaying"] = {"a": a, "b": b, "rss": rss}

    def gev(inv_s):
        (a, c), rss = _lstsq(np.column_stack([one, -lam ** inv_s]), y)
        return rss if c > 0 else math.inf

    grid = np.linspace(1 / s_max, 1.0, 200)
    vals = [gev(g) for g in grid]
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    if lo < hi and math.isfinite(vals[k]):
        res = optimize.minimize_scalar(gev, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
        inv = float(res.x) if res.fun <= vals[k] else float(grid[k])
    else:
        inv = float(grid[k])
    (a, c), rss = _lstsq(np.column_stack([one, -lam ** inv]), y)
    s_fit = 1 / inv
    models["gevrey"] = {"a": a, "c": c, "s": s_fit, "rss": rss if c > 0 else math.inf}

    # a Gevrey fit at either end of the s range joins the neighbouring family
    competing = {m: dict(d) for m, d in models.items()}
    if s_fit <= s_merge:
        folded = "analytic"
    elif s_fit >= s_max * (1 - 1e-6):
        folded = "not_decaying"
    else:
        folded = None
    if folded:
        competing[folded]["rss"] = min(competing[folded]["rss"], competing.pop("gevrey")["rss"])
        models[folded]["rss_family"] = competing[folded]["rss"]
    ranked = sorted(competing, key=lambda m: competing[m]["rss"])
    best, runner = ranked[0], ranked[1]
    rb, rr = competing[best]["rss"], competing[runner]["rss"]
    fit = {"models": _clean(models), "best": best, "runner_up": runner, "margin": margin,
           "n_points": int(len(lam))}
    if not math.isfinite(rb) or math.sqrt(rb / len(lam)) > max(rms_poor, 0.01 * float(np.ptp(y))):
        return "inconclusive", None, dict(fit, reason="all fits poor")
    if not rr >= margin * rb:
        return "inconclusive", None, dict(fit, reason="margin rule not met")
    return best, (s_fit if best == "gevrey" else None), fit


def _clean(models: dict) -> dict:
    out = {}
    for k, d in models.items():
        out[k] = {p: (float(v) if math.isfinite(v) else None) for p, v in d.items()}
    return out


def _check_sweep(lambdas: Sequence[float]) -> list[float]:
    lam = [float(v) for v in lambdas]
    if len(lam) < 5:
        raise ValueError("need at least 5 lambda values")
    if any(b <= a for a, b in zip(lam, lam[1:])):
        raise ValueError("lambdas must be strictly increasing")
    ratios = np.diff(np.log(lam))
    if np.ptp(ratios) > 0.1 * np.mean(ratios):
        raise ValueError("lambdas must be geometrically spaced")
    return lam


def wavefront_probe(u: SampledFunction, point, lambdas: Sequence[float] = DEFAULT_LAMBDAS,
                    margin: float = 4.0, refine: int = 1) -> WavefrontVerdict:
    """Classify the decay of the weighted FBI transform at ``point = (x0, xi0)``.

    Censored values (under the rounding floor) are dropped from the fit; if
    fewer than four remain the verdict is inconclusive.
    """
    lam = _check_sweep(lambdas)
    sample = fbi_sample(u, point, lam, refine)
    keep = [i for i, c in enumerate(sample.censored) if not c]
    if len(keep) < 4:
        return WavefrontVerdict("inconclusive", None,
                                {"reason": "too many values under the noise floor", "kept": len(keep)}, sample)
    kind, s_est, fit = classify([lam[i] for i in keep], [sample.log_weighted[i] for i in keep], margin)
    fit["censored"] = [lam[i] for i in range(len(lam)) if sample.censored[i]]
    return WavefrontVerdict(kind, s_est, fit, sample)


# ---------------------------------------------------------------------------
# the Gevrey example u(x, t) = int_0^inf exp(-rho x^2/2 + i rho t - rho^(1/s)) d rho

def gevrey_example_derivative(s: float, k: int, method: str = "exact", strict: bool = True) -> float:
    """``D_t^k u(0, 0) = int_0^inf rho^k exp(-rho^(1/s)) d rho = s Gamma(s (k + 1))``.

    ``method="quadrature"`` integrates the defining integral numerically.
    ``strict=False`` admits the boundary case ``s = 1``.
    """
    if k < 0 or int(k) != k:
        raise ValueError("k must be a nonnegative integer")
    if s < 1 or (strict and s <= 1):
        raise ValueError("s must exceed 1")
    if method == "exact":
        return float(s * mpmath.gamma(s * (k + 1)))
    if method != "quadrature":
        raise ValueError("method is 'exact' or 'quadrature'")
    with mpmath.workdps(30):
        S = mpmath.mpf(s)
        peak = max((S * k) ** S, mpmath.mpf(1))
        pts = [0, peak / 16, peak / 4, peak, 4 * peak, 16 * peak, 64 * peak, mpmath.inf]
        val = mpmath.quad(lambda r: r ** k * mpmath.exp(-r ** (1 / S)), pts)
        return float(val)


def gevrey_growth_ratio(s: float, k: int, geometric: bool = False) -> float:
    """``log D_t^k u(0,0) / log(k!^s)``; with ``geometric`` the denominator is ``log(s^(s k) k!^s)``."""
    num = math.log(s) + math.lgamma(s * (k + 1))
    den = s * math.lgamma(k + 1)
    if geometric:
        den += s * k * math.log(s)
    return num / den


def gevrey_nodes(s: float, t_max: float, x_max: float = 0.0, tail: float = GAUSS_CUTOFF,
                 panel_phase: float = 2.0, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes ``rho_k`` and weights ``c_k`` for the Gevrey example.

    Substituting ``rho = v^s`` gives ``int_0^V s v^(s-1) exp(-v) (...) dv`` with
    ``V = -log(tail)``; composite Gauss-Legendre panels are sized so the phase
    ``v^s t`` and the damping ``v^s x^2/2`` change by at most ``panel_phase``
    per panel.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    V = -math.log(tail)
    gx, gw = np.polynomial.legendre.leggauss(order)
    edges = [0.0]
    while edges[-1] < V:
        v = edges[-1]
        rate = s * max(v, 1.0) ** (s - 1) * (abs(t_max) + x_max * x_max / 2) + 1.0
        edges.append(min(V, v + min(0.5, panel_phase / rate)))
    edges = np.asarray(edges)
    a, b = edges[1:-1, None], edges[2:, None]
    v = (0.5 * (b - a) * gx[None, :] + 0.5 * (a + b)).ravel()
    w = (0.5 * (b - a) * gw[None, :]).ravel()
    c = w * s * v ** (s - 1) * np.exp(-v)
    # first panel: Gauss-Jacobi absorbs the endpoint factor v^(s-1)
    jx, jw = special.roots_jacobi(order, 0.0, s - 1)
    half = 0.5 * edges[1]
    v0 = half * (jx + 1)
    c0 = jw * s * half ** s * np.exp(-v0)
    v = np.concatenate([v0, v])
    c = np.concatenate([c0, c])
    return v ** s, c


def _gevrey_sampler(s: float):
    def sample(x_axis, t_axis):
        x_axis = np.asarray(x_axis, dtype=float)
        t_axis = np.asarray(t_axis, dtype=float)
        rho, c = gevrey_nodes(s, float(np.max(np.abs(t_axis))), float(np.max(np.abs(x_axis))))
        A = np.exp(-np.outer(x_axis * x_axis, rho) / 2) * c[None, :]
        B = np.exp(1j * np.outer(rho, t_axis))
        return A @ B
    return sample


def gevrey_example_values(s: float, x_grid, t_grid) -> SampledFunction:
    """Sample ``u(x, t) = int_0^inf exp(-rho x^2/2 + i rho t - rho^(1/s)) d rho``.

    ``u`` solves ``D_x^2 u + x^2 D_t^2 u - D_t u = 0``; it is Gevrey of order
    ``s`` and no better at the origin in the direction ``tau > 0``.
    """
    if s <= 1:
        raise ValueError("s must exceed 1")
    sampler = _gevrey_sampler(s)
    x = np.asarray(x_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    return SampledFunction((x, t), sampler(x, t), f"gevrey:s={s:g}", sampler=sampler)
