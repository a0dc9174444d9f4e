"""Hermite-basis realization of the localized model operator and its parametrix.

The model operator on ``R^nu_t x R_y`` is

    P(lam) = p2(t, D_t) + c + lam^{-1/2} l(y, D_y)

where ``p2`` is a quadratic form with the ground energy subtracted, ``c`` is
the constant part of the lower-order symbol and ``l`` its linear part.  The
constant stays unscaled because it is homogeneous of degree zero under
``(y, eta) -> lam^{-1/2} (y, eta)``.

Operators are dense matrices on the tensor basis ``t_1 x ... x t_nu x y``
(y fastest).  Weyl quantization of a monomial uses the symmetric-ordering
formula ``Op(x^a xi^b) = 2^-a sum_k C(a,k) X^k D^b X^(a-k)`` evaluated in a
basis enlarged by the degree, then truncated; this is exact on the kept
block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import linalg, stats
from scipy.sparse.linalg import svds

from .symbols import GaussianSymbol, PhaseSpaceDims, PolySymbol, _to_float

__all__ = [
    "HermiteBasisConfig",
    "GridOperator",
    "GroundStatePair",
    "Parametrix",
    "LocalizedModel",
    "ScalingExperiment",
    "ParametrixError",
    "quantize",
    "ground_states",
    "projection_h",
    "wigner_symbol_of_h",
    "build_parametrix",
    "residual_scaling",
    "apriori_scaling",
    "fit_power_law",
]

TOP_MARGIN = 2  # truncation-edge modes dropped per dimension


class ParametrixError(ValueError):
    """The lower-order quantization is not injective on the kept space."""


# ---------------------------------------------------------------------------
# basis and operators

@dataclass(frozen=True)
class HermiteBasisConfig:
    """Truncated oscillator basis: ``n_modes_t`` per t-dimension and ``n_modes_y`` in y."""

    n_modes_t: int = 32
    n_modes_y: int = 32
    omega: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(self.omega))
        if self.n_modes_t < 8 or self.n_modes_y < 8:
            raise ValueError("need at least 8 modes per dimension")
        if not self.omega or any(float(w) <= 0 for w in self.omega):
            raise ValueError("omega must be positive, one per t-dimension")

    @property
    def nu(self) -> int:
        return len(self.omega)

    @property
    def t_size(self) -> int:
        return self.n_modes_t ** self.nu

    @property
    def size(self) -> int:
        return self.t_size * self.n_modes_y

    def shape(self, space: str = "full") -> tuple[int, ...]:
        t = (self.n_modes_t,) * self.nu
        return {"t": t, "y": (self.n_modes_y,), "full": t + (self.n_modes_y,)}[space]

    def keep_mask(self, space: str = "full") -> np.ndarray:
        """Boolean mask of basis states whose modes avoid the top ``TOP_MARGIN`` per dimension."""
        shape = self.shape(space)
        grids = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
        ok = np.ones(shape, dtype=bool)
        for g, n in zip(grids, shape):
            ok &= g < n - TOP_MARGIN
        return ok.ravel()

    def number_operator_t(self) -> np.ndarray:
        """Diagonal of ``N_t`` (sum of t-mode numbers) on the full space."""
        shape = self.shape("full")
        grids = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
        return sum(grids[: self.nu]).ravel().astype(float)


@dataclass(frozen=True)
class GridOperator:
    """Matrix of a quantized operator on ``space`` in {"t", "y", "full"}."""

    matrix: np.ndarray
    basis: HermiteBasisConfig
    label: str
    space: str = "full"

    def __post_init__(self):
        n = int(np.prod(self.basis.shape(self.space)))
        if self.matrix.shape != (n, n):
            raise ValueError(f"{self.label}: matrix {self.matrix.shape} does not match space size {n}")

    def full(self) -> np.ndarray:
        """Lift to the full tensor space."""
        if self.space == "full":
            return self.matrix
        if self.space == "t":
            return np.kron(self.matrix, np.eye(self.basis.n_modes_y))
        return np.kron(np.eye(self.basis.t_size), self.matrix)

    def __matmul__(self, other: "GridOperator") -> "GridOperator":
        if self.space == other.space:
            return GridOperator(self.matrix @ other.matrix, self.basis, f"{self.label}*{other.label}", self.space)
        return GridOperator(self.full() @ other.full(), self.basis, f"{self.label}*{other.label}")


@lru_cache(maxsize=256)
def _ladder_pair(n: int, omega: float, a: int, b: int) -> np.ndarray:
    """``n x n`` truncation of ``Op_w(x^a xi^b)`` for oscillator weight ``omega``."""
    m = n + a + b
    lower = np.diag(np.sqrt(np.arange(1, m)), 1)  # annihilation
    X = (lower + lower.T) / math.sqrt(2 * omega)
    D = 1j * math.sqrt(omega / 2) * (lower.T - lower)
    Db = np.linalg.matrix_power(D, b)
    acc = np.zeros((m, m), dtype=complex)
    for k in range(a + 1):
        acc += math.comb(a, k) * np.linalg.matrix_power(X, k) @ Db @ np.linalg.matrix_power(X, a - k)
    return (acc / 2 ** a)[:n, :n]


def quantize(sym: PolySymbol, basis: HermiteBasisConfig) -> GridOperator:
    """Weyl quantization in the Hermite basis.

    The space is read off ``sym.dims``: ``(nu, 0, 0)`` gives a t-space
    operator, ``(0, 1, 0)`` a y-space operator and ``(nu, 1, 0)`` a full one.

    Raises
    ------
    ValueError
        For s-variables, a t-dimension count different from the basis, or a
        degree too high for the truncation.
    """
    d = sym.dims
    if d.n_s:
        raise ValueError("model operators carry no s-variables")
    if d.n_y > 1 or (d.n_t and d.n_t != basis.nu):
        raise ValueError(f"symbol dims {d} do not match a basis with nu={basis.nu}")
    deg = sym.degree
    if deg > 4 or 2 * deg >= min(basis.n_modes_t, basis.n_modes_y):
        raise ValueError(f"degree {deg} too high for the configured truncation")
    space = "full" if (d.n_t and d.n_y) else ("t" if d.n_t else "y")
    pairs = []  # (n_modes, omega) per position variable, in dims order
    for j in range(d.n_t):
        pairs.append((basis.n_modes_t, float(basis.omega[j])))
    if d.n_y:
        pairs.append((basis.n_modes_y, 1.0))
    n = d.n
    size = int(np.prod([p[0] for p in pairs]))
    out = np.zeros((size, size), dtype=complex)
    for e, c in sym.items():
        mat = np.ones((1, 1), dtype=complex)
        for j, (nm, w) in enumerate(pairs):
            mat = np.kron(mat, _ladder_pair(nm, w, e[j], e[n + j]))
        out += _to_float(c) * mat
    return GridOperator(out, basis, f"Op({sym})", space)


# ---------------------------------------------------------------------------
# ground states and the projection

@dataclass(frozen=True)
class GroundStatePair:
    """Normalized kernel vectors of ``p2`` and its adjoint, with ``c0 = <e0*, e0>``."""

    e0: np.ndarray
    e0_star: np.ndarray
    c0: complex
    basis: HermiteBasisConfig

    def __post_init__(self):
        if abs(self.c0) < 1e-12:
            raise ValueError("c0 vanishes")


def ground_states(p2_op: GridOperator, tol: float = 1e-8) -> GroundStatePair:
    """Kernels of ``p2_op`` and its adjoint via the singular value decomposition.

    Raises
    ------
    ValueError
        If the operator is not a t-space operator or the kernel is not one-dimensional.
    """
    if p2_op.space != "t":
        raise ValueError("ground_states expects a t-space operator")
    A = p2_op.matrix
    U, s, Vh = linalg.svd(A)
    scale = max(float(s[0]), 1.0)
    dim = int(np.count_nonzero(s <= tol * scale))
    if dim != 1:
        raise ValueError(f"kernel dimension {dim} != 1 (smallest singular values {s[-3:]})")
    e0 = Vh[-1].conj()
    e0_star = U[:, -1]
    k = int(np.argmax(np.abs(e0)))
    e0 = e0 * (abs(e0[k]) / e0[k])
    c0 = np.vdot(e0_star, e0)
    e0_star = e0_star * (c0 / abs(c0))
    c0 = complex(np.vdot(e0_star, e0))
    return GroundStatePair(e0, e0_star, c0, p2_op.basis)


def projection_h(gs: GroundStatePair) -> GridOperator:
    """``e0 <e0*, .>`` on t, tensored with the identity in y."""
    h_t = np.outer(gs.e0, gs.e0_star.conj())
    return GridOperator(np.kron(h_t, np.eye(gs.basis.n_modes_y)), gs.basis, "h")


def wigner_symbol_of_h(gs: GroundStatePair, tol: float = 1e-10) -> GaussianSymbol:
    """Weyl symbol of ``h`` for tensor-Gaussian ground states.

    Returns ``2^nu e0_0 conj(e0*_0) exp(-sum(omega_j t_j^2 + tau_j^2 / omega_j))``
    on the t-phase space.

    Raises
    ------
    ValueError
        If either ground state is not the oscillator ground state of the basis.
    """
    for v in (gs.e0, gs.e0_star):
        if abs(abs(v[0]) - 1) > tol:
            raise ValueError("ground state is not Gaussian in this basis; unsupported")
    nu = gs.basis.nu
    dims = PhaseSpaceDims(nu, 0, 0)
    Q = [[0] * (2 * nu) for _ in range(2 * nu)]
    for j, w in enumerate(gs.basis.omega):
        w = Fraction(w) if isinstance(w, (int, Fraction)) else Fraction(float(w))
        Q[j][j] = -w
        Q[nu + j][nu + j] = -1 / w
    amp = complex(gs.e0[0] * np.conj(gs.e0_star[0]))
    snapped = round(amp.real)
    scale: object = 2 ** nu * snapped if abs(amp - snapped) <= tol else 2 ** nu * amp
    return GaussianSymbol(PolySymbol.constant(dims, 1), Q, scale)


# ---------------------------------------------------------------------------
# parametrix

@dataclass(frozen=True)
class Parametrix:
    """``E = F + lam^{1/2} Q h - h F / c0`` and its pieces."""

    E: GridOperator
    F: GridOperator
    Q: GridOperator
    h: GridOperator
    lam: float


def build_parametrix(p2_op: GridOperator, p1_op: GridOperator, gs: GroundStatePair,
                     lam: float, check_injective: bool = True) -> Parametrix:
    """Assemble the model parametrix.

    ``F = (p2 + h/c0)^{-1} (I - h/c0)`` satisfies ``F p2 = I - h/c0`` and
    ``h F = 0`` exactly; ``Q`` is the SVD pseudoinverse of ``c0 l`` with
    cutoff 1e-12.

    Raises
    ------
    ParametrixError
        If ``p1_op`` is not injective on the kept modes.
    """
    if lam < 10:
        raise ValueError("lambda must be at least 10")
    basis = p2_op.basis
    P2 = p2_op.full()
    h = projection_h(gs)
    Pi = h.matrix / gs.c0
    I = np.eye(basis.size)
    F = linalg.solve(P2 + Pi, I - Pi)
    L = p1_op.matrix if p1_op.space == "y" else None
    if L is None:
        raise ValueError("p1_op must be a y-space operator")
    if check_injective:
        keep_y = basis.keep_mask("y")
        smin = linalg.svdvals(L[:, keep_y])[-1] if L.any() else 0.0
        if smin <= 1e-10 * max(1.0, np.abs(L).max()):
            raise ParametrixError(
                f"lower-order operator is not injective on the kept modes (sigma_min={smin:.2e})")
    Qy = linalg.pinv(gs.c0 * L, rtol=1e-12) if L.any() else np.zeros_like(L)
    Q = np.kron(np.eye(basis.t_size), Qy)
    E = F + math.sqrt(lam) * Q @ h.matrix - h.matrix @ F / gs.c0
    return Parametrix(
        GridOperator(E, basis, f"E({lam:g})"),
        GridOperator(F, basis, "F"),
        GridOperator(Q, basis, "Q"),
        h,
        float(lam),
    )


# ---------------------------------------------------------------------------
# models

@dataclass(frozen=True)
class LocalizedModel:
    """Localized model data.

    Attributes
    ----------
    p2 : PolySymbol on dims ``(nu, 0, 0)``, ground energy already subtracted.
    ell1 : PolySymbol on dims ``(0, 1, 0)``, affine in ``(y, eta)``.
    omega : oscillator weights used for the basis.
    """

    p2: PolySymbol
    ell1: PolySymbol
    omega: tuple
    label: str = "model"

    @property
    def nu(self) -> int:
        return self.p2.dims.n_t

    @property
    def ell1_constant(self) -> complex:
        return complex(_to_float(self.ell1.constant_term()))

    @property
    def ell1_linear(self) -> PolySymbol:
        return self.ell1 - self.ell1.homogeneous_part(0)

    def basis(self, n_modes_t: int | None = None, n_modes_y: int | None = None) -> HermiteBasisConfig:
        if n_modes_t is None:
            n_modes_t = {1: 32, 2: 12}.get(self.nu, 8)
        if n_modes_y is None:
            n_modes_y = {1: 32, 2: 10}.get(self.nu, 8)
        return HermiteBasisConfig(n_modes_t, n_modes_y, self.omega)

    @classmethod
    def harmonic(cls, nu: int = 1, omega=1, ell1: str = "eta + I*y") -> "LocalizedModel":
        """``sum(tau_j^2 + omega^2 t_j^2) - nu omega`` with the given lower-order symbol."""
        w = Fraction(omega) if not isinstance(omega, float) else Fraction(omega)
        dt = PhaseSpaceDims(nu, 0, 0)
        names = dt.names
        expr = " + ".join(f"{names[nu + j]}**2 + ({w})**2*{names[j]}**2" for j in range(nu))
        p2 = PolySymbol.from_expr(dt, f"{expr} - {nu}*({w})")
        l1 = PolySymbol.from_expr(PhaseSpaceDims(0, 1, 0), ell1)
        return cls(p2, l1, (w,) * nu, f"harmonic(nu={nu}, omega={w}, l1={ell1})")

    @classmethod
    def from_spec(cls, spec, ray_index: int = 0) -> "LocalizedModel":
        """Localize an operator spec at the base point of one fiber ray on sigma2."""
        from .spectral_geometry import localize

        dims = spec.dims
        ray = spec.rays()[ray_index]
        loc = localize(spec, ray.base_point(dims), on_sigma2=True)
        t_idx = dims.block("t") + dims.block("tau")
        y_idx = dims.block("y") + dims.block("eta")
        nu = dims.n_t
        dt, dy = PhaseSpaceDims(nu, 0, 0), PhaseSpaceDims(0, 1, 0)
        tmap = [-1] * dims.nvars
        for k, i in enumerate(t_idx):
            tmap[i] = k
        ymap = [-1] * dims.nvars
        for k, i in enumerate(y_idx):
            ymap[i] = k
        trp = loc.tr_plus
        p2 = loc.principal.with_dims(dt, tmap) - _exactish(trp)
        ell1 = loc.lower.with_dims(dy, ymap) + _exactish(trp)
        omega = []
        for j in range(nu):
            a = complex(_to_float(p2.coefficient([2 if k == j else 0 for k in range(2 * nu)])))
            b = complex(_to_float(p2.coefficient([2 if k == nu + j else 0 for k in range(2 * nu)])))
            omega.append(math.sqrt(a.real / b.real) if a.real > 0 and b.real > 0 else 1.0)
        omega = tuple(Fraction(w).limit_denominator(10 ** 6) if abs(
            float(Fraction(w).limit_denominator(10 ** 6)) - w) < 1e-12 else w for w in omega)
        return cls(p2, ell1, omega, f"{spec.name or 'spec'}@{ray.label(dims)}")


def _exactish(x):
    fr = Fraction(complex(x).real).limit_denominator(10 ** 6)
    if complex(x).imag == 0 and abs(float(fr) - complex(x).real) < 1e-12:
        return fr
    return complex(x)


# ---------------------------------------------------------------------------
# scaling experiments

@dataclass
class ScalingExperiment:
    """Power-law fit of a measured quantity against ``lambda``."""

    lambdas: list[float]
    quantities: dict[str, list[float]]
    quantity: str
    fitted_slope: float
    slope_ci: float
    intercept: float
    r2: float
    expected_slope: float
    tolerance: float = 0.1
    flagged: bool = False
    reasons: list[str] = field(default_factory=list)
    extra_slopes: dict[str, float] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if np.any(lam < 10) or np.any(np.diff(lam) <= 0):
            raise ValueError("lambdas must be strictly increasing and >= 10")

    @property
    def verdict(self) -> str:
        if self.flagged:
            return "flagged"
        return "pass" if abs(self.fitted_slope - self.expected_slope) <= self.tolerance else "fail"

    def csv_rows(self) -> list[tuple]:
        rows = []
        for name in sorted(self.quantities):
            for lam, v in zip(self.lambdas, self.quantities[name]):
                rows.append((lam, name, v))
        return rows

    def summary(self) -> dict:
        return {
            "label": self.label,
            "quantity": self.quantity,
            "slope": self.fitted_slope,
            "intercept": self.intercept,
            "ci": self.slope_ci,
            "r2": self.r2,
            "expected_slope": self.expected_slope,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "flagged": self.flagged,
            "reasons": list(self.reasons),
            "extra_slopes": dict(sorted(self.extra_slopes.items())),
        }


def fit_power_law(lambdas: Sequence[float], values: Sequence[float]) -> tuple[float, float, float, float]:
    """Least-squares fit of ``log v = a + b log lam``; returns ``(b, a, ci95, r2)``."""
    x = np.log(np.asarray(lambdas, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if np.ptp(y) < 1e-12:
        return 0.0, float(y[0]), 0.0, 1.0
    res = stats.linregress(x, y)
    ci = float(stats.t.ppf(0.975, len(x) - 2) * res.stderr) if len(x) > 2 else float("inf")
    return float(res.slope), float(res.intercept), ci, float(res.rvalue ** 2)


def _spectral_norm(M: np.ndarray) -> float:
    """Largest singular value (ARPACK; dense fallback for tiny matrices)."""
    if min(M.shape) < 32:
        return float(np.linalg.norm(M, 2))
    v0 = np.ones(min(M.shape), dtype=M.dtype)
    return float(svds(M, k=1, return_singular_vectors=False, v0=v0, tol=1e-14)[0])


def _check_sweep(lambdas: Sequence[float]) -> list[float]:
    lam = [float(v) for v in lambdas]
    if len(lam) < 4:
        raise ValueError("need at least 4 lambda values to fit a slope")
    if any(b <= a for a, b in zip(lam, lam[1:])) or lam[0] < 10:
        raise ValueError("lambdas must be strictly increasing and >= 10")
    if lam[-1] / lam[0] < 100:
        raise ValueError("lambda sweep must span at least two decades")
    return lam


@dataclass
class _ModelOps:
    basis: HermiteBasisConfig
    p2: GridOperator
    lin: GridOperator
    const: complex
    gs: GroundStatePair | None

    def p_tilde(self, lam: float) -> np.ndarray:
        return (self.p2.full() + self.const * np.eye(self.basis.size)
                + lam ** -0.5 * GridOperator(self.lin.matrix, self.basis, "l", "y").full())


def _model_ops(model: LocalizedModel, basis: HermiteBasisConfig | None) -> _ModelOps:
    basis = basis or model.basis()
    p2 = quantize(model.p2, basis)
    lin_sym = model.ell1_linear
    lin = quantize(lin_sym, basis) if not lin_sym.is_zero() else GridOperator(
        np.zeros((basis.n_modes_y,) * 2, dtype=complex), basis, "0", "y")
    gs = ground_states(p2)
    return _ModelOps(basis, p2, lin, model.ell1_constant, gs)


def _finish(lam, quantities, key, expected, label, reasons, extra=None, collapse_floor=1e-10) -> ScalingExperiment:
    vals = np.asarray(quantities[key], dtype=float)
    flagged = bool(reasons)
    if np.any(vals <= collapse_floor * max(1.0, float(np.max(vals)))):
        reasons.append("values collapse below the power-law floor (kernel present)")
        flagged = True
        slope = intercept = r2 = float("nan")
        ci = float("inf")
    else:
        slope, intercept, ci, r2 = fit_power_law(lam, vals)
        if r2 < 0.99:
            reasons.append(f"poor power-law fit (r2={r2:.3f})")
            flagged = True
    return ScalingExperiment(lam, quantities, key, slope, ci, intercept, r2, expected,
                             flagged=flagged, reasons=reasons, extra_slopes=extra or {}, label=label)


def residual_scaling(model: LocalizedModel, lambdas: Sequence[float],
                     basis: HermiteBasisConfig | None = None) -> ScalingExperiment:
    """Fit ``||E(lam) P(lam) - I||`` on the kept modes against ``lam``; expected slope -1/2.

    Also records ``identity_defect = ||E P - I - lam^{-1/2} (F - h F / c0) l||``
    and ``norm_E``.
    """
    lam = _check_sweep(lambdas)
    ops = _model_ops(model, basis)
    b = ops.basis
    keep = b.keep_mask()
    I = np.eye(b.size)
    reasons: list[str] = []
    if abs(ops.const) > 1e-12:
        reasons.append("lower-order symbol has a constant part; the ground-state parametrix does not apply")
    q: dict[str, list[float]] = {"residual": [], "identity_defect": [], "norm_E": []}
    Lfull = GridOperator(ops.lin.matrix, b, "l", "y").full()
    for lm in lam:
        try:
            par = build_parametrix(ops.p2, ops.lin, ops.gs, lm)
        except ParametrixError as exc:
            reasons.append(str(exc))
            par = build_parametrix(ops.p2, ops.lin, ops.gs, lm, check_injective=False)
        P = ops.p_tilde(lm)
        R = par.E.matrix @ P - I
        err = lm ** -0.5 * (par.F.matrix - par.h.matrix @ par.F.matrix / ops.gs.c0) @ Lfull
        sub = np.ix_(keep, keep)
        q["residual"].append(_spectral_norm(R[sub]))
        q["identity_defect"].append(_spectral_norm((R - err)[sub]))
        q["norm_E"].append(_spectral_norm(par.E.matrix[sub]))
    reasons = list(dict.fromkeys(reasons))
    extra = {"norm_E": fit_power_law(lam, q["norm_E"])[0]}
    return _finish(lam, q, "residual", -0.5, model.label, reasons, extra)


def apriori_scaling(model: LocalizedModel, lambdas: Sequence[float],
                    basis: HermiteBasisConfig | None = None) -> ScalingExperiment:
    """Fit the smallest singular value of ``P(lam)`` on the kept modes; expected slope -1/2.

    Weighted variants use ``W = N_t + 1`` and ``W = lam^{-1} (N_t + 1)``;
    their slopes are reported in ``extra_slopes``.
    """
    lam = _check_sweep(lambdas)
    ops = _model_ops(model, basis)
    b = ops.basis
    keep = b.keep_mask()
    w = b.number_operator_t() + 1
    q: dict[str, list[float]] = {"sigma_min": [], "sigma_min_weighted": [], "sigma_min_weighted_lambda": []}
    for lm in lam:
        P = ops.p_tilde(lm)
        q["sigma_min"].append(float(linalg.svdvals(P[:, keep])[-1]))
        Pw = P / w[None, :]
        q["sigma_min_weighted"].append(float(linalg.svdvals(Pw[:, keep])[-1]))
        q["sigma_min_weighted_lambda"].append(q["sigma_min_weighted"][-1] * lm)
    expected = -0.5 if np.linalg.norm(ops.lin.matrix) and abs(ops.const) <= 1e-12 else 0.0
    extra = {}
    for k in ("sigma_min_weighted", "sigma_min_weighted_lambda"):
        vals = np.asarray(q[k])
        if np.all(vals > 1e-10 * vals.max()):
            extra[k] = fit_power_law(lam, vals)[0]
    return _finish(lam, q, "sigma_min", expected, model.label, [], extra)
