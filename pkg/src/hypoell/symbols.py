"""Polynomial symbols on phase space and their Weyl calculus.

A symbol lives on ``R^n_x x R^n_xi`` with the position block split as
``x = (t, y, s)``.  Coefficients are either exact Gaussian rationals
(``sympy.QQ_I``) or Python complex floats; the two modes never mix silently,
any operation involving a float operand produces a float result.

The Weyl composition uses

    a # b = sum_{m, m'} (i/2)^{|m|+|m'|} (-1)^{|m'|} / (m! m'!)
            (d_x^m d_xi^m' a) (d_xi^m d_x^m' b)

so that ``x # xi = x xi + i/2`` and ``a # b - b # a = (1/i) {a, b}`` for
symbols of degree at most two.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy
from sympy import QQ, QQ_I
from sympy.polys.domains.gaussiandomains import GaussianRational
from sympy.polys.polyerrors import CoercionFailed

__all__ = [
    "PhaseSpaceDims",
    "PolySymbol",
    "GaussianSymbol",
    "moyal_product",
    "moyal_product_gaussian",
    "poisson_bracket",
    "conjugate",
    "subprincipal_symbol",
    "evaluate",
]

Exponent = tuple[int, ...]


# ---------------------------------------------------------------------------
# coefficients

def _to_exact(value) -> GaussianRational:
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        return QQ_I(value, 0)
    if isinstance(value, Fraction):
        return QQ_I(QQ(value.numerator, value.denominator), 0)
    if isinstance(value, str):
        return _to_exact(Fraction(value))
    if isinstance(value, (float, np.floating)):
        return _to_exact(Fraction(float(value)))
    if isinstance(value, (complex, np.complexfloating)):
        re, im = Fraction(value.real), Fraction(value.imag)
        return QQ_I(QQ(re.numerator, re.denominator), QQ(im.numerator, im.denominator))
    if isinstance(value, np.integer):
        return QQ_I(int(value), 0)
    if isinstance(value, sympy.Basic):
        return QQ_I.from_sympy(value)
    raise TypeError(f"cannot use {type(value).__name__} as an exact coefficient")


def _to_float(value) -> complex:
    if isinstance(value, GaussianRational):
        return complex(float(value.x), float(value.y))
    if isinstance(value, Fraction):
        return complex(float(value))
    if isinstance(value, str):
        return complex(float(Fraction(value)))
    if isinstance(value, sympy.Basic):
        return complex(value)
    return complex(value)


def _is_exact_scalar(value) -> bool:
    if isinstance(value, (GaussianRational, int, np.integer, Fraction, str)):
        return True
    if isinstance(value, sympy.Basic) and value.is_number:
        return bool(sympy.re(value).is_Rational and sympy.im(value).is_Rational)
    return False


def _conj_coeff(c):
    if isinstance(c, GaussianRational):
        return QQ_I(c.x, -c.y)
    return c.conjugate()


def _rational(num: int, den: int, ipow: int, exact: bool):
    """Return ``i**ipow * num / den`` in the requested coefficient mode."""
    unit = ((1, 0), (0, 1), (-1, 0), (0, -1))[ipow % 4]
    if exact:
        q = QQ(num, den)
        return QQ_I(q * unit[0], q * unit[1])
    return complex(unit[0], unit[1]) * (num / den)


def _falling(n: int, k: int) -> int:
    """n (n-1) ... (n-k+1)."""
    out = 1
    for j in range(k):
        out *= n - j
    return out


# ---------------------------------------------------------------------------
# dimensions

@dataclass(frozen=True)
class PhaseSpaceDims:
    """Sizes of the ``(t, y, s)`` position blocks.

    Variables are ordered ``(t..., y, s...; tau..., eta, sigma...)``.
    """

    n_t: int
    n_y: int = 1
    n_s: int = 0

    def __post_init__(self):
        for name in ("n_t", "n_y", "n_s"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
        if self.n < 1:
            raise ValueError("phase space needs at least one position variable")

    @property
    def n(self) -> int:
        return self.n_t + self.n_y + self.n_s

    @property
    def nvars(self) -> int:
        return 2 * self.n

    def t_index(self, k: int = 0) -> int:
        return k

    def y_index(self, k: int = 0) -> int:
        return self.n_t + k

    def s_index(self, k: int = 0) -> int:
        return self.n_t + self.n_y + k

    def dual(self, index: int) -> int:
        """Index of the conjugate variable (position <-> momentum)."""
        return index + self.n if index < self.n else index - self.n

    def block(self, name: str) -> list[int]:
        """Phase-space indices of a named block: t, y, s, tau, eta, sigma."""
        pos = {
            "t": range(0, self.n_t),
            "y": range(self.n_t, self.n_t + self.n_y),
            "s": range(self.n_t + self.n_y, self.n),
        }
        if name in pos:
            return list(pos[name])
        mom = {"tau": "t", "eta": "y", "sigma": "s"}
        if name in mom:
            return [i + self.n for i in pos[mom[name]]]
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        def block(stem, count):
            if count == 1:
                return [stem]
            return [f"{stem}{k + 1}" for k in range(count)]

        return (
            block("t", self.n_t) + block("y", self.n_y) + block("s", self.n_s)
            + block("tau", self.n_t) + block("eta", self.n_y) + block("sigma", self.n_s)
        )

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> dict:
        return {"n_t": self.n_t, "n_y": self.n_y, "n_s": self.n_s}

    @classmethod
    def from_json(cls, doc: Mapping) -> "PhaseSpaceDims":
        return cls(int(doc["n_t"]), int(doc.get("n_y", 1)), int(doc.get("n_s", 0)))


# ---------------------------------------------------------------------------
# polynomial symbols

def _gaussian_from_sympy(c):
    # nsimplify would turn large rationals into surd products, so only floats go through it
    try:
        return QQ_I.from_sympy(c)
    except CoercionFailed:
        return QQ_I.from_sympy(sympy.nsimplify(c, rational=True))


class PolySymbol:
    """Polynomial in the ``2n`` phase-space variables with complex coefficients.

    Parameters
    ----------
    dims : PhaseSpaceDims
    terms : mapping
        Exponent tuple of length ``2n`` to coefficient.  Zero coefficients are
        dropped.
    exact : bool, optional
        Coefficient mode.  Inferred from the coefficients when omitted: any
        Python float or complex switches to floating point.
    """

    __slots__ = ("dims", "_terms", "exact")

    def __init__(self, dims: PhaseSpaceDims, terms: Mapping[Sequence[int], object] | None = None,
                 exact: bool | None = None):
        terms = dict(terms or {})
        if exact is None:
            exact = all(_is_exact_scalar(c) for c in terms.values())
        conv = _to_exact if exact else _to_float
        clean: dict[Exponent, object] = {}
        nv = dims.nvars
        for e, c in terms.items():
            e = tuple(int(v) for v in e)
            if len(e) != nv or any(v < 0 for v in e):
                raise ValueError(f"exponent {e} invalid for {nv} variables")
            c = conv(c)
            if c:
                clean[e] = clean[e] + c if e in clean else c
        self.dims = dims
        self._terms = {e: c for e, c in clean.items() if c}
        self.exact = bool(exact)

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, dims, exact=True):
        return cls(dims, {}, exact=exact)

    @classmethod
    def constant(cls, dims, value, exact: bool | None = None):
        if exact is None:
            exact = _is_exact_scalar(value)
        return cls(dims, {(0,) * dims.nvars: value}, exact=exact)

    @classmethod
    def variable(cls, dims, index: int | str, exact=True):
        if isinstance(index, str):
            index = dims.index_of(index)
        e = [0] * dims.nvars
        e[index] = 1
        return cls(dims, {tuple(e): 1}, exact=exact)

    @classmethod
    def from_expr(cls, dims, expr, exact: bool | None = None):
        """Build from a sympy expression or string using ``dims.names``.

        ``I`` is the imaginary unit.  Floats in the expression select float
        mode unless ``exact`` says otherwise.
        """
        syms = sympy.symbols(dims.names)
        local = dict(zip(dims.names, syms))
        if isinstance(expr, str):
            expr = sympy.sympify(expr, locals=local)
        expr = sympy.expand(sympy.sympify(expr))
        if exact is None:
            exact = not expr.has(sympy.Float)
        poly = sympy.Poly(expr, *syms)
        return cls(dims, {m: (_gaussian_from_sympy(c) if exact else complex(c))
                          for m, c in poly.as_dict().items()}, exact=exact)

    # -- basic access ------------------------------------------------------
    @property
    def terms(self) -> dict[Exponent, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, exponent: Sequence[int]):
        c = self._terms.get(tuple(exponent))
        if c is None:
            return QQ_I(0, 0) if self.exact else 0j
        return c

    def constant_term(self):
        return self.coefficient((0,) * self.dims.nvars)

    @property
    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, indices: Iterable[int]) -> int:
        idx = list(indices)
        return max((sum(e[i] for i in idx) for e in self._terms), default=-1)

    def homogeneous_part(self, d: int) -> "PolySymbol":
        return PolySymbol(self.dims, {e: c for e, c in self._terms.items() if sum(e) == d},
                          exact=self.exact)

    def part_of_degree_in(self, indices: Iterable[int], d: int) -> "PolySymbol":
        """Terms whose degree in the listed variables equals ``d``."""
        idx = list(indices)
        return PolySymbol(self.dims, {e: c for e, c in self._terms.items()
                                      if sum(e[i] for i in idx) == d}, exact=self.exact)

    def is_real(self) -> bool:
        return all(not (c.y if self.exact else c.imag) for c in self._terms.values())

    # -- conversions --------------------------------------------------------
    def to_float(self) -> "PolySymbol":
        if not self.exact:
            return self
        return PolySymbol(self.dims, {e: _to_float(c) for e, c in self._terms.items()}, exact=False)

    def to_exact(self) -> "PolySymbol":
        if self.exact:
            return self
        return PolySymbol(self.dims, self._terms, exact=True)

    def with_dims(self, dims: PhaseSpaceDims, index_map: Sequence[int]) -> "PolySymbol":
        """Re-embed into ``dims``; ``index_map[i]`` is the new index of old variable ``i``.

        Old variables mapped to ``-1`` must not occur.
        """
        out = {}
        for e, c in self._terms.items():
            ne = [0] * dims.nvars
            for i, p in enumerate(e):
                if p:
                    j = index_map[i]
                    if j < 0:
                        raise ValueError(f"variable {self.dims.names[i]} has no image")
                    ne[j] += p
            out[tuple(ne)] = c
        return PolySymbol(dims, out, exact=self.exact)

    def to_sympy(self):
        syms = sympy.symbols(self.dims.names)
        expr = sympy.Integer(0)
        for e, c in self._terms.items():
            coeff = QQ_I.to_sympy(c) if self.exact else sympy.sympify(c)
            expr += coeff * sympy.Mul(*[s ** p for s, p in zip(syms, e)])
        return expr

    def __str__(self):
        return str(self.to_sympy()) if self._terms else "0"

    def __repr__(self):
        mode = "exact" if self.exact else "float"
        return f"PolySymbol({self}, {mode})"

    # -- arithmetic ----------------------------------------------------------
    def _check(self, other: "PolySymbol"):
        if not isinstance(other, PolySymbol):
            raise TypeError("expected a PolySymbol")
        if other.dims != self.dims:
            raise ValueError(f"dimension mismatch: {self.dims} vs {other.dims}")

    def _coerce(self, other) -> "PolySymbol":
        if isinstance(other, PolySymbol):
            self._check(other)
            return other
        return PolySymbol.constant(self.dims, other, exact=self.exact and _is_exact_scalar(other))

    @staticmethod
    def _mode(a: "PolySymbol", b: "PolySymbol"):
        if a.exact and b.exact:
            return a, b, True
        return a.to_float(), b.to_float(), False

    def __add__(self, other):
        a, b, exact = self._mode(self, self._coerce(other))
        out = dict(a._terms)
        for e, c in b._terms.items():
            out[e] = out[e] + c if e in out else c
        return PolySymbol(self.dims, out, exact=exact)

    __radd__ = __add__

    def __neg__(self):
        return PolySymbol(self.dims, {e: -c for e, c in self._terms.items()}, exact=self.exact)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        a, b, exact = self._mode(self, self._coerce(other))
        out: dict[Exponent, object] = {}
        for ea, ca in a._terms.items():
            for eb, cb in b._terms.items():
                e = tuple(i + j for i, j in zip(ea, eb))
                v = ca * cb
                out[e] = out[e] + v if e in out else v
        return PolySymbol(self.dims, out, exact=exact)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        one = PolySymbol.constant(self.dims, 1, exact=self.exact)
        return reduce(lambda acc, _: acc * self, range(k), one)

    def __eq__(self, other):
        if isinstance(other, PolySymbol):
            if other.dims != self.dims:
                return False
            return (self - other).is_zero()
        try:
            return (self - other).is_zero()
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash((self.dims, frozenset((e, _to_float(c)) for e, c in self._terms.items())))

    def allclose(self, other: "PolySymbol", atol: float = 1e-12) -> bool:
        diff = (self.to_float() - self._coerce(other).to_float())
        return all(abs(c) <= atol for _, c in diff.items())

    def max_abs_coefficient(self) -> float:
        return max((abs(_to_float(c)) for c in self._terms.values()), default=0.0)

    # -- calculus ----------------------------------------------------------------
    def diff(self, index: int, order: int = 1) -> "PolySymbol":
        out = {}
        for e, c in self._terms.items():
            p = e[index]
            if p >= order:
                ne = list(e)
                ne[index] = p - order
                out[tuple(ne)] = c * _falling(p, order)
        return PolySymbol(self.dims, out, exact=self.exact)

    def diff_multi(self, orders: Sequence[int]) -> "PolySymbol":
        out = {}
        for e, c in self._terms.items():
            if all(p >= k for p, k in zip(e, orders)):
                f = 1
                for p, k in zip(e, orders):
                    f *= _falling(p, k)
                out[tuple(p - k for p, k in zip(e, orders))] = c * f
        return PolySymbol(self.dims, out, exact=self.exact)

    def gradient(self) -> list["PolySymbol"]:
        return [self.diff(i) for i in range(self.dims.nvars)]

    def substitute(self, values: Mapping[int, object]) -> "PolySymbol":
        """Fix variables to scalar values; the variables disappear."""
        exact = self.exact and all(_is_exact_scalar(v) for v in values.values())
        src = self if exact else self.to_float()
        conv = _to_exact if exact else _to_float
        vals = {i: conv(v) for i, v in values.items()}
        out: dict[Exponent, object] = {}
        for e, c in src._terms.items():
            ne = list(e)
            for i, v in vals.items():
                if e[i]:
                    c = c * v ** e[i]
                    ne[i] = 0
            ne = tuple(ne)
            out[ne] = out[ne] + c if ne in out else c
        return PolySymbol(self.dims, out, exact=exact)

    def compose(self, images: Sequence["PolySymbol"]) -> "PolySymbol":
        """Substitute variable ``i`` by the polynomial ``images[i]``."""
        if len(images) != self.dims.nvars:
            raise ValueError("need one image per variable")
        dims = images[0].dims
        exact = self.exact and all(p.exact for p in images)
        acc = PolySymbol.zero(dims, exact=exact)
        cache: dict[tuple[int, int], PolySymbol] = {}

        def power(i, k):
            key = (i, k)
            if key not in cache:
                cache[key] = images[i] ** k
            return cache[key]

        for e, c in self._terms.items():
            term = PolySymbol.constant(dims, c, exact=exact)
            for i, p in enumerate(e):
                if p:
                    term = term * power(i, p)
            acc = acc + term
        return acc

    def shift(self, point: Sequence) -> "PolySymbol":
        """Taylor re-expansion: the polynomial ``z -> self(point + z)``."""
        exact = self.exact and all(_is_exact_scalar(v) for v in point)
        images = [PolySymbol.variable(self.dims, i, exact=exact) + PolySymbol.constant(self.dims, v, exact=exact)
                  for i, v in enumerate(point)]
        return self.compose(images)

    def conjugate(self) -> "PolySymbol":
        return PolySymbol(self.dims, {e: _conj_coeff(c) for e, c in self._terms.items()},
                          exact=self.exact)

    def real_part(self) -> "PolySymbol":
        return (self + self.conjugate()) * _rational(1, 2, 0, self.exact)

    def imag_part(self) -> "PolySymbol":
        return (self - self.conjugate()) * _rational(-1, 2, 1, self.exact)

    def hessian(self, point: Sequence) -> np.ndarray:
        """Complex Hessian matrix at a point (float)."""
        nv = self.dims.nvars
        pt = np.asarray(point, dtype=complex)
        H = np.zeros((nv, nv), dtype=complex)
        for i in range(nv):
            di = self.diff(i)
            for j in range(i, nv):
                H[i, j] = H[j, i] = di.diff(j)(pt)
        return H

    # -- evaluation ----------------------------------------------------------
    def __call__(self, point) -> complex:
        """Evaluate as a complex float; see :func:`evaluate` for exact evaluation."""
        return _to_float(evaluate(self, point))

    def compiled(self):
        """Return ``(exponents, coefficients)`` arrays for vectorized evaluation."""
        if not self._terms:
            return np.zeros((0, self.dims.nvars), dtype=int), np.zeros(0, dtype=complex)
        exps = np.array(list(self._terms.keys()), dtype=int)
        coefs = np.array([_to_float(c) for c in self._terms.values()], dtype=complex)
        return exps, coefs

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at the rows of ``points`` (shape ``(M, 2n)``)."""
        pts = np.asarray(points)
        if pts.ndim != 2 or pts.shape[1] != self.dims.nvars:
            raise ValueError(f"points must have shape (M, {self.dims.nvars})")
        exps, coefs = self.compiled()
        out = np.zeros(pts.shape[0], dtype=complex)
        for e, c in zip(exps, coefs):
            mono = np.ones(pts.shape[0], dtype=complex)
            for i in np.nonzero(e)[0]:
                mono = mono * pts[:, i] ** e[i]
            out += c * mono
        return out

    # -- serialization ------------------------------------------------------------
    def to_json(self) -> dict:
        terms = []
        for e in sorted(self._terms):
            c = self._terms[e]
            if self.exact:
                re, im = str(c.x), str(c.y)
            else:
                re, im = float(c.real), float(c.imag)
            terms.append({"exp": list(e), "re": re, "im": im})
        return {"dims": self.dims.to_json(), "terms": terms}

    @classmethod
    def from_json(cls, doc: Mapping, dims: PhaseSpaceDims | None = None) -> "PolySymbol":
        if dims is None:
            dims = PhaseSpaceDims.from_json(doc["dims"])
        raw = [(tuple(t["exp"]), t.get("re", 0), t.get("im", 0)) for t in doc.get("terms", [])]
        exact = all(not isinstance(v, float) for _, re, im in raw for v in (re, im))
        terms: dict[Exponent, object] = {}
        for e, re, im in raw:
            if exact:
                c = _to_exact(re) + _to_exact(im) * QQ_I(0, 1)
            else:
                c = complex(_to_float(re).real, _to_float(im).real)
            terms[e] = terms[e] + c if e in terms else c
        return cls(dims, terms, exact=exact)


def evaluate(a: PolySymbol, point) -> complex:
    """Evaluate ``a`` at a real or complex point of length ``2n``.

    Exact symbols evaluated at exact points (ints, Fractions, Gaussian
    rationals) return an exact Gaussian rational; otherwise a complex float.
    """
    if len(point) != a.dims.nvars:
        raise ValueError(f"point must have length {a.dims.nvars}")
    if a.exact and all(_is_exact_scalar(v) for v in point):
        vals = [_to_exact(v) for v in point]
        acc = QQ_I(0, 0)
        for e, c in a.items():
            for v, p in zip(vals, e):
                if p:
                    c = c * v ** p
            acc = acc + c
        return acc
    vals = [complex(_to_float(v)) for v in point]
    acc = 0j
    for e, c in a.items():
        c = _to_float(c)
        for v, p in zip(vals, e):
            if p:
                c *= v ** p
        acc += c
    return acc


def conjugate(a: PolySymbol) -> PolySymbol:
    """Coefficient-wise complex conjugate (variables are real)."""
    return a.conjugate()


def poisson_bracket(a: PolySymbol, b: PolySymbol) -> PolySymbol:
    """``{a, b} = sum_j d_xi_j a d_x_j b - d_x_j a d_xi_j b``."""
    a._check(b)
    n = a.dims.n
    out = PolySymbol.zero(a.dims, exact=a.exact and b.exact)
    for j in range(n):
        out = out + a.diff(n + j) * b.diff(j) - a.diff(j) * b.diff(n + j)
    return out


def subprincipal_symbol(p2: PolySymbol, p1: PolySymbol) -> PolySymbol:
    """``p1 + (i/2) sum_j d^2 p2 / dx_j dxi_j``."""
    p2._check(p1)
    n = p2.dims.n
    mixed = PolySymbol.zero(p2.dims, exact=p2.exact)
    for j in range(n):
        mixed = mixed + p2.diff(j).diff(n + j)
    return p1 + mixed * _rational(1, 2, 1, p2.exact)


def _moyal_terms(ea: Exponent, eb: Exponent, n: int):
    """Yield ``(exponent, num, den, ipow)`` contributions of two monomials."""
    ranges = []
    for j in range(n):
        m_max = min(ea[j], eb[n + j])
        mp_max = min(ea[n + j], eb[j])
        ranges.append([(m, mp) for m in range(m_max + 1) for mp in range(mp_max + 1)])
    for choice in itertools.product(*ranges):
        num = 1
        den = 1
        k = 0
        sign = 0
        e = list(a + b for a, b in zip(ea, eb))
        for j, (m, mp) in enumerate(choice):
            if m or mp:
                num *= (_falling(ea[j], m) * _falling(eb[n + j], m)
                        * _falling(ea[n + j], mp) * _falling(eb[j], mp))
                den *= math.factorial(m) * math.factorial(mp)
                k += m + mp
                sign += mp
                e[j] -= m + mp
                e[n + j] -= m + mp
        if sign % 2:
            num = -num
        yield tuple(e), num, den * 2 ** k, k


def moyal_product(a: PolySymbol, b: PolySymbol) -> PolySymbol:
    """Weyl composition ``a # b`` of two polynomial symbols.

    Exact when both inputs are exact.

    Raises
    ------
    ValueError
        If the symbols live on different phase spaces.
    """
    a._check(b)
    a, b, exact = PolySymbol._mode(a, b)
    n = a.dims.n
    out: dict[Exponent, object] = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            cab = ca * cb
            for e, num, den, k in _moyal_terms(ea, eb, n):
                v = cab * _rational(num, den, k, exact)
                out[e] = out[e] + v if e in out else v
    return PolySymbol(a.dims, out, exact=exact)


# ---------------------------------------------------------------------------
# Gaussian symbols

class GaussianSymbol:
    """``scale * P(z) * exp(z^T Q z)`` with ``z = (x, xi)``.

    Parameters
    ----------
    prefactor : PolySymbol
    quad : (2n, 2n) symmetric matrix
        Entries may be exact (ints, Fractions, Gaussian rationals) or floats.
        The real part must be negative definite.
    scale : complex constant, default 1
    """

    __slots__ = ("prefactor", "quad", "scale", "_linear")

    def __init__(self, prefactor: PolySymbol, quad, scale=1):
        nv = prefactor.dims.nvars
        exact = prefactor.exact and all(_is_exact_scalar(v) for row in quad for v in row) \
            and _is_exact_scalar(scale)
        conv = _to_exact if exact else _to_float
        q = [[conv(quad[i][j]) for j in range(nv)] for i in range(nv)]
        if len(q) != nv or any(len(r) != nv for r in q):
            raise ValueError(f"quad must be {nv}x{nv}")
        qf = np.array([[_to_float(v) for v in row] for row in q])
        if not np.allclose(qf, qf.T, atol=0):
            raise ValueError("quad must be symmetric")
        if np.max(np.linalg.eigvalsh(qf.real)) >= 0:
            raise ValueError("real part of the exponent must be negative definite")
        self.prefactor = prefactor if exact else prefactor.to_float()
        self.quad = tuple(tuple(r) for r in q)
        self.scale = conv(scale)
        dims = prefactor.dims
        # d_k (z^T Q z) = 2 (Q z)_k as linear PolySymbols
        self._linear = []
        for k in range(nv):
            terms = {}
            for l in range(nv):
                if q[k][l]:
                    e = [0] * nv
                    e[l] = 1
                    terms[tuple(e)] = q[k][l] * 2
            self._linear.append(PolySymbol(dims, terms, exact=exact))

    @property
    def dims(self):
        return self.prefactor.dims

    @property
    def exact(self):
        return self.prefactor.exact

    @property
    def quad_matrix(self) -> np.ndarray:
        return np.array([[_to_float(v) for v in row] for row in self.quad])

    def with_prefactor(self, prefactor: PolySymbol, scale=None) -> "GaussianSymbol":
        return GaussianSymbol(prefactor, self.quad, self.scale if scale is None else scale)

    def derive_prefactor(self, P: PolySymbol, orders: Sequence[int]) -> PolySymbol:
        """Prefactor of ``d^orders (P e^E)`` divided by ``e^E``."""
        for k, m in enumerate(orders):
            for _ in range(m):
                P = P.diff(k) + P * self._linear[k]
        return P

    def is_zero(self) -> bool:
        return self.prefactor.is_zero() or not self.scale

    def __call__(self, point) -> complex:
        z = np.asarray(point, dtype=complex)
        return _to_float(self.scale) * complex(self.prefactor(list(z))) * np.exp(z @ self.quad_matrix @ z)

    def __repr__(self):
        return f"GaussianSymbol(scale={self.scale}, prefactor={self.prefactor}, quad={self.quad_matrix.tolist()})"


def moyal_product_gaussian(g, b):
    """Weyl composition of a Gaussian symbol with a polynomial.

    Either order is accepted: ``moyal_product_gaussian(g, b)`` returns
    ``g # b`` and ``moyal_product_gaussian(b, g)`` returns ``b # g``.  The
    series is finite because every term carries a derivative of ``b``.
    """
    if isinstance(g, GaussianSymbol) and isinstance(b, PolySymbol):
        gauss, poly, gauss_left = g, b, True
    elif isinstance(g, PolySymbol) and isinstance(b, GaussianSymbol):
        gauss, poly, gauss_left = b, g, False
    else:
        raise TypeError("need one GaussianSymbol and one PolySymbol")
    gauss.prefactor._check(poly)
    exact = gauss.exact and poly.exact
    if not exact:
        poly = poly.to_float()
        if gauss.exact:
            gauss = GaussianSymbol(gauss.prefactor.to_float(),
                                   [[_to_float(v) for v in r] for r in gauss.quad], _to_float(gauss.scale))
    n = poly.dims.n
    # derivative budget is set by the polynomial side
    bx = [poly.degree_in([j]) for j in range(n)]
    bxi = [poly.degree_in([n + j]) for j in range(n)]
    out = PolySymbol.zero(poly.dims, exact=exact)
    cache: dict[tuple, PolySymbol] = {}
    if gauss_left:
        m_cap, mp_cap = bxi, bx
    else:
        m_cap, mp_cap = bx, bxi
    for choice in itertools.product(*[[(m, mp) for m in range(max(m_cap[j], 0) + 1)
                                       for mp in range(max(mp_cap[j], 0) + 1)] for j in range(n)]):
        m = [c[0] for c in choice]
        mp = [c[1] for c in choice]
        if gauss_left:
            # (d_x^m d_xi^m' g)(d_xi^m d_x^m' b)
            pb = poly.diff_multi(mp + m)
            g_orders = tuple(m + mp)
        else:
            # (d_x^m d_xi^m' b)(d_xi^m d_x^m' g)
            pb = poly.diff_multi(m + mp)
            g_orders = tuple(mp + m)
        if pb.is_zero():
            continue
        if g_orders not in cache:
            cache[g_orders] = gauss.derive_prefactor(gauss.prefactor, g_orders)
        k = sum(m) + sum(mp)
        den = 2 ** k
        for v in m + mp:
            den *= math.factorial(v)
        sign = -1 if sum(mp) % 2 else 1
        out = out + cache[g_orders] * pb * _rational(sign, den, k, exact)
    return GaussianSymbol(out, gauss.quad, gauss.scale)
