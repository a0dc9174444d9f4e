"""Characteristic manifolds, Hamiltonian matrices and the hypothesis checker.

Manifolds are linear coordinate subspaces through the origin of phase
space, described by the set of coordinates that vanish on them.  Symbols
with factors ``|sigma|^k`` (``sigma`` the dual block of ``s``) are stored as
:class:`FiberSymbol` and turned into polynomials one fiber ray at a time by
substituting ``|sigma| := w``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .symbols import (
    PhaseSpaceDims,
    PolySymbol,
    _to_exact,
    _to_float,
    conjugate,
    poisson_bracket,
    subprincipal_symbol,
)

__all__ = [
    "LinearConicManifold",
    "Cone",
    "HamiltonianMatrix",
    "FiberDirection",
    "FiberSymbol",
    "OperatorSpec",
    "RayReport",
    "HypothesisReport",
    "Localization",
    "VanishingInfo",
    "StructuralError",
    "DegenerateSpectrumError",
    "is_symplectic",
    "vanishing_order",
    "hamiltonian_matrix",
    "tr_plus",
    "check_hypotheses",
    "localize",
    "distance_to_manifold",
    "sphere_points",
    "symplectic_matrix",
]

N_SPHERE = 2 ** 12


class StructuralError(ValueError):
    """The manifolds of a spec do not have the required shape."""


class DegenerateSpectrumError(ValueError):
    """An eigenvalue pair of F has no representative in the cone."""


# ---------------------------------------------------------------------------
# manifolds and cones

@dataclass(frozen=True)
class LinearConicManifold:
    """Coordinate subspace ``{z_i = 0 for i in vanishing}``."""

    dims: PhaseSpaceDims
    vanishing: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "vanishing", frozenset(int(i) for i in self.vanishing))
        bad = [i for i in self.vanishing if not 0 <= i < self.dims.nvars]
        if bad:
            raise ValueError(f"indices {bad} out of range for {self.dims.nvars} variables")

    @property
    def codim(self) -> int:
        return len(self.vanishing)

    @property
    def tangent(self) -> list[int]:
        return [i for i in range(self.dims.nvars) if i not in self.vanishing]

    @property
    def transversal(self) -> list[int]:
        return sorted(self.vanishing)

    def contains(self, point, tol: float = 1e-12) -> bool:
        return distance_to_manifold(point, self) <= tol

    def issubset(self, other: "LinearConicManifold") -> bool:
        """True if ``self`` lies inside ``other``."""
        return other.vanishing <= self.vanishing


def distance_to_manifold(point, m: LinearConicManifold) -> float:
    """Euclidean distance from ``point`` to the subspace ``m``."""
    z = np.asarray([_to_float(v) for v in point])
    if z.shape != (m.dims.nvars,):
        raise ValueError(f"point must have length {m.dims.nvars}")
    idx = m.transversal
    return float(np.linalg.norm(z[idx])) if idx else 0.0


def symplectic_matrix(n: int) -> np.ndarray:
    """``J`` with ``sigma(v, w) = v^T J w`` for ``sigma = d xi ^ d x``."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def is_symplectic(m: LinearConicManifold) -> bool:
    """Whether the canonical symplectic form is nondegenerate on ``m``."""
    tan = m.tangent
    if not tan:
        return True
    J = symplectic_matrix(m.dims.n)[np.ix_(tan, tan)]
    # integer matrix with entries in {-1, 0, 1}; rank is exact
    return int(np.linalg.matrix_rank(J)) == len(tan)


@dataclass(frozen=True)
class Cone:
    """Closed sector ``{z : |arg z - bisector| <= half_aperture}``."""

    bisector_angle: float = 0.0
    half_aperture: float = math.pi / 4

    def __post_init__(self):
        if not 0 <= self.half_aperture < math.pi / 2:
            raise ValueError("a proper cone needs 0 <= half_aperture < pi/2")

    def angle_offset(self, z) -> np.ndarray:
        """Signed angle of ``z`` from the bisector, in ``(-pi, pi]``."""
        a = np.angle(np.asarray(z, dtype=complex)) - self.bisector_angle
        return (a + np.pi) % (2 * np.pi) - np.pi

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        return np.abs(self.angle_offset(z)) <= self.half_aperture - margin

    def to_json(self) -> dict:
        return {"bisector": self.bisector_angle, "half_aperture": self.half_aperture}

    @classmethod
    def from_json(cls, doc: Mapping) -> "Cone":
        return cls(float(doc.get("bisector", 0.0)), float(doc.get("half_aperture", math.pi / 4)))


# ---------------------------------------------------------------------------
# Hamiltonian matrix

@dataclass(frozen=True)
class HamiltonianMatrix:
    """Fundamental matrix ``F`` of ``p2`` at ``base_point``.

    ``sigma(v, F w) = 1/2 <Hess p2 v, w>`` for all ``v, w``.
    """

    F: np.ndarray
    source_form: PolySymbol
    base_point: tuple
    hessian: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.F)

    def identity_defect(self) -> float:
        """Max over basis pairs of ``|sigma(e_i, F e_j) - 1/2 H_ij|``."""
        J = symplectic_matrix(self.source_form.dims.n)
        return float(np.max(np.abs(J @ self.F - 0.5 * self.hessian))) if self.F.size else 0.0


def hamiltonian_matrix(p2: PolySymbol, rho) -> HamiltonianMatrix:
    """Build ``F = J^{-1} Hess p2(rho) / 2``."""
    n = p2.dims.n
    H = p2.hessian(rho)
    J = symplectic_matrix(n)
    F = np.linalg.solve(J, 0.5 * H)
    return HamiltonianMatrix(F, p2, tuple(rho), H)


def tr_plus(F: HamiltonianMatrix, cone: Cone = Cone(), tol: float = 1e-9):
    """Positive trace: sum of ``-i mu`` over pair representatives in ``cone``.

    For ``spec F = {+-i omega_j}`` with ``omega_j`` in the cone this is
    ``sum omega_j``.  Returns a float when the result is real to ``tol``.

    Raises
    ------
    DegenerateSpectrumError
        If some pair ``{mu, -mu}`` has zero or two representatives in the cone.
    """
    mu = F.eigenvalues
    scale = max(1.0, float(np.max(np.abs(mu))) if mu.size else 1.0)
    nonzero = mu[np.abs(mu) > tol * scale]
    rep = -1j * nonzero
    inside = np.abs(cone.angle_offset(rep)) <= cone.half_aperture + tol
    if 2 * int(np.count_nonzero(inside)) != nonzero.size:
        raise DegenerateSpectrumError(
            f"eigenvalues {np.round(mu, 12).tolist()} do not pair into the cone")
    total = complex(np.sum(rep[inside]))
    if abs(total.imag) <= tol * scale:
        return float(total.real)
    return total


def _snap(value, tol: float = 1e-12):
    """Rationalize a float when it is within ``tol`` of a small-denominator rational."""
    def one(x: float):
        fr = Fraction(x).limit_denominator(10 ** 6)
        return fr if abs(float(fr) - x) <= tol * max(1.0, abs(x)) else None

    z = complex(value)
    re, im = one(z.real), one(z.imag)
    if re is None or im is None:
        return None
    return _to_exact(re) + _to_exact(im) * _to_exact(1j)


# ---------------------------------------------------------------------------
# operator specs

@dataclass(frozen=True)
class FiberDirection:
    """Ray in the fiber: ``z[var] = sign * weight``, all other coordinates 0."""

    var: int
    sign: int = 1
    weight: object = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not _to_float(self.weight).real > 0 or _to_float(self.weight).imag:
            raise ValueError("weight must be positive")

    def base_point(self, dims: PhaseSpaceDims) -> list:
        pt: list = [0] * dims.nvars
        pt[self.var] = self.weight * self.sign
        return pt

    def label(self, dims: PhaseSpaceDims) -> str:
        return f"{dims.names[self.var]}{'>' if self.sign > 0 else '<'}0"

    def to_json(self) -> dict:
        w = self.weight
        return {"var": self.var, "sign": self.sign,
                "weight": str(w) if isinstance(w, Fraction) else w}

    @classmethod
    def from_json(cls, doc: Mapping) -> "FiberDirection":
        w = doc.get("weight", 1)
        if isinstance(w, str):
            w = Fraction(w)
        return cls(int(doc["var"]), int(doc.get("sign", 1)), w)


@dataclass(frozen=True)
class FiberSymbol:
    """``sum_k |sigma|^k P_k`` with polynomial ``P_k``."""

    dims: PhaseSpaceDims
    parts: Mapping[int, PolySymbol]

    @classmethod
    def polynomial(cls, p: PolySymbol) -> "FiberSymbol":
        return cls(p.dims, {0: p})

    def on_ray(self, weight) -> PolySymbol:
        exact = all(p.exact for p in self.parts.values()) and not isinstance(weight, float)
        acc = PolySymbol.zero(self.dims, exact=exact)
        for k, p in sorted(self.parts.items()):
            w = _to_exact(weight) if exact else _to_float(weight)
            acc = acc + p * (w ** k)
        return acc

    def to_json(self) -> dict:
        terms = []
        for k, p in sorted(self.parts.items()):
            for t in p.to_json()["terms"]:
                if k:
                    t = dict(t, abs=k)
                terms.append(t)
        return {"terms": terms}

    @classmethod
    def from_json(cls, doc: Mapping, dims: PhaseSpaceDims) -> "FiberSymbol":
        groups: dict[int, list] = {}
        for t in doc.get("terms", []):
            groups.setdefault(int(t.get("abs", 0)), []).append(t)
        parts = {k: PolySymbol.from_json({"terms": ts}, dims=dims) for k, ts in groups.items()}
        if not parts:
            parts = {0: PolySymbol.zero(dims)}
        return cls(dims, parts)


@dataclass(frozen=True)
class OperatorSpec:
    """Second-order operator in model coordinates with its characteristic data."""

    dims: PhaseSpaceDims
    p2: FiberSymbol
    p1: FiberSymbol
    sigma1: LinearConicManifold
    sigma2: LinearConicManifold
    cone: Cone = Cone()
    fiber_directions: tuple[FiberDirection, ...] = ()
    name: str = ""

    def on_ray(self, ray: FiberDirection) -> tuple[PolySymbol, PolySymbol]:
        """``(p2, p1)`` as polynomials valid on the given fiber ray."""
        return self.p2.on_ray(ray.weight), self.p1.on_ray(ray.weight)

    def rays(self) -> tuple[FiberDirection, ...]:
        if self.fiber_directions:
            return self.fiber_directions
        # any dual coordinate tangent to sigma2 serves as a probe direction
        for i in range(self.dims.n, self.dims.nvars):
            if i not in self.sigma2.vanishing:
                return (FiberDirection(i, 1, 1),)
        raise StructuralError("no fiber direction is tangent to sigma2")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "dims": self.dims.to_json(),
            "p2": self.p2.to_json(),
            "p1": self.p1.to_json(),
            "sigma1": sorted(self.sigma1.vanishing),
            "sigma2": sorted(self.sigma2.vanishing),
            "cone": self.cone.to_json(),
            "fiber_directions": [r.to_json() for r in self.fiber_directions],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "OperatorSpec":
        try:
            dims = PhaseSpaceDims.from_json(doc["dims"])
            return cls(
                dims=dims,
                p2=FiberSymbol.from_json(doc["p2"], dims),
                p1=FiberSymbol.from_json(doc.get("p1", {"terms": []}), dims),
                sigma1=LinearConicManifold(dims, frozenset(doc["sigma1"])),
                sigma2=LinearConicManifold(dims, frozenset(doc["sigma2"])),
                cone=Cone.from_json(doc.get("cone", {})),
                fiber_directions=tuple(FiberDirection.from_json(r) for r in doc.get("fiber_directions", [])),
                name=str(doc.get("name", "")),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed operator spec: {exc!r}") from exc

    @classmethod
    def load(cls, path) -> "OperatorSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# vanishing order and numerical range

class VanishingInfo(NamedTuple):
    order: float  # int, or inf when p2 vanishes identically transversally
    kernel_is_tangent: bool


def _transversal_taylor(p: PolySymbol, m: LinearConicManifold, point) -> PolySymbol:
    """Taylor polynomial of ``p`` at ``point`` in the transversal variables only."""
    shifted = p.shift(point)
    return shifted.substitute({i: 0 for i in m.tangent})


def vanishing_order(p2: PolySymbol, m: LinearConicManifold, probe_point,
                    tol: float = 1e-9) -> VanishingInfo:
    """Order of vanishing of ``p2`` across ``m`` at ``probe_point``.

    Also reports whether the kernel of the Hessian at the probe point is
    exactly the tangent space of ``m``.
    """
    if not m.contains(probe_point):
        raise ValueError("probe point is not on the manifold")
    local = _transversal_taylor(p2, m, probe_point)
    terms = [(sum(e), c) for e, c in local.items() if abs(_to_float(c)) > tol]
    order = min((d for d, _ in terms), default=math.inf)
    H = p2.hessian(probe_point)
    tan = m.tangent
    scale = max(1.0, float(np.max(np.abs(H))))
    tangent_in_kernel = not tan or float(np.max(np.abs(H[:, tan]))) <= tol * scale
    rank = int(np.linalg.matrix_rank(H, tol=tol * scale)) if H.size else 0
    return VanishingInfo(order, bool(tangent_in_kernel and rank == m.codim))


def sphere_points(d: int, count: int = N_SPHERE) -> np.ndarray:
    """Deterministic, roughly uniform points on the unit sphere in ``R^d``."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(a), np.sin(a)])
    if d == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(1 - z ** 2)
        phi = np.pi * (3 - np.sqrt(5)) * k
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    u = qmc.Halton(d, scramble=False).random(count + 1)[1:]
    g = ndtri(u)
    return g / np.linalg.norm(g, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# reports

@dataclass
class RayReport:
    """Hypothesis data on one fiber ray."""

    ray: FiberDirection
    label: str
    h1: dict
    h2: dict
    h3: dict
    q: PolySymbol
    tr_plus: object
    mu0: complex
    bracket_symbol: PolySymbol | None = None

    @property
    def h3_status(self) -> str:
        return self.h3["status"]

    def to_json(self) -> dict:
        return {
            "ray": self.ray.to_json(),
            "label": self.label,
            "h1": self.h1,
            "h2": self.h2,
            "h3": self.h3,
            "q": str(self.q),
            "q_terms": self.q.to_json()["terms"],
            "tr_plus": _json_number(self.tr_plus),
            "mu0": _json_number(self.mu0),
        }


def _json_number(v):
    if isinstance(v, Fraction):
        return str(v)
    z = complex(_to_float(v))
    if z.imag == 0:
        return z.real
    return {"re": z.real, "im": z.imag}


@dataclass
class HypothesisReport:
    """Outcome of :func:`check_hypotheses`; one :class:`RayReport` per fiber ray."""

    spec_name: str
    tol: float
    rays: list[RayReport] = field(default_factory=list)

    def _all(self, key, ok=lambda d: d["pass"]) -> bool:
        return all(ok(getattr(r, key)) for r in self.rays)

    @property
    def h1(self) -> dict:
        return {"pass": self._all("h1")}

    @property
    def h2(self) -> dict:
        return {"pass": self._all("h2")}

    @property
    def h3(self) -> dict:
        # a nonvanishing q on a ray is the elliptic case, not a failure
        return {"pass": self._all("h3", lambda d: d["status"] in ("pass", "elliptic")),
                "statuses": [r.h3["status"] for r in self.rays]}

    @property
    def all_pass(self) -> bool:
        return self.h1["pass"] and self.h2["pass"] and self.h3["pass"]

    @property
    def q(self) -> list[PolySymbol]:
        return [r.q for r in self.rays]

    @property
    def tr_plus(self) -> list:
        return [r.tr_plus for r in self.rays]

    def to_json(self) -> dict:
        return {
            "spec": self.spec_name,
            "tol": self.tol,
            "h1": self.h1,
            "h2": self.h2,
            "h3": self.h3,
            "all_pass": self.all_pass,
            "rays": [r.to_json() for r in self.rays],
        }

    def format_table(self) -> str:
        head = f"{'ray':<12}{'H1':<6}{'H2':<6}{'H3':<10}{'tr+':>10}  {'bracket':>10}  q"
        lines = [f"operator: {self.spec_name or '(unnamed)'}", head, "-" * len(head)]
        for r in self.rays:
            br = r.h3.get("bracket")
            br_s = f"{br:10.4g}" if isinstance(br, (int, float)) else f"{'-':>10}"
            tp = complex(_to_float(r.tr_plus))
            tp_s = f"{tp.real:10.4g}" if tp.imag == 0 else f"{tp:.4g}"
            lines.append(f"{r.label:<12}{_pf(r.h1['pass']):<6}{_pf(r.h2['pass']):<6}"
                         f"{r.h3['status']:<10}{tp_s}  {br_s}  {r.q}")
        lines.append(f"overall: {'PASS' if self.all_pass else 'FAIL'}")
        return "\n".join(lines)


def _pf(b: bool) -> str:
    return "pass" if b else "FAIL"


# ---------------------------------------------------------------------------
# the checker

def _validate_manifolds(spec: OperatorSpec) -> None:
    s1, s2 = spec.sigma1, spec.sigma2
    if s1.dims != spec.dims or s2.dims != spec.dims:
        raise StructuralError("manifolds and symbols live on different phase spaces")
    if not s2.issubset(s1):
        raise StructuralError("sigma2 is not contained in sigma1")
    if s2.codim - s1.codim != 2:
        raise StructuralError(f"codim of sigma2 in sigma1 is {s2.codim - s1.codim}, expected 2")


def _h2(p2: PolySymbol, m: LinearConicManifold, rho, cone: Cone, tol: float) -> dict:
    idx = m.transversal
    H = p2.hessian(rho)[np.ix_(idx, idx)]
    pts = sphere_points(len(idx))
    vals = 0.5 * np.einsum("ki,ij,kj->k", pts, H, pts)
    offs = cone.angle_offset(vals)
    min_abs = float(np.min(np.abs(vals)))
    ok = bool(min_abs > tol and np.all(np.abs(offs) <= cone.half_aperture - tol))
    return {"pass": ok, "arg_min": float(np.min(offs) + cone.bisector_angle),
            "arg_max": float(np.max(offs) + cone.bisector_angle),
            "min_abs": min_abs, "samples": int(len(pts)), "cone": cone.to_json()}


def _char_q(q: PolySymbol, spec: OperatorSpec, rho, tol: float) -> tuple[str, str]:
    """Compare the zero set of ``q`` on the sigma1 slice through ``rho`` with sigma2.

    Returns ``(relation, method)`` with relation one of ``equal``, ``empty``,
    ``contains``, ``other``.
    """
    dims = spec.dims
    fiber = set(dims.block("sigma"))
    fixed = {i: rho[i] for i in fiber}
    fixed.update({i: 0 for i in spec.sigma1.vanishing})
    sliced = q.substitute(fixed)
    free = [i for i in range(dims.nvars) if i not in fixed]
    v2 = [i for i in free if i in spec.sigma2.vanishing]
    if sliced.degree <= 1:
        const = complex(_to_float(sliced.constant_term()))
        cols = []
        for i in free:
            e = [0] * dims.nvars
            e[i] = 1
            c = complex(_to_float(sliced.coefficient(e)))
            cols.append([c.real, c.imag])
        M = np.array(cols).T if cols else np.zeros((2, 0))
        c0 = np.array([const.real, const.imag])
        rank = int(np.linalg.matrix_rank(M, tol=tol)) if M.size else 0
        if rank == 0:
            return ("contains" if np.linalg.norm(c0) <= tol else "empty"), "symbolic"
        # is -c0 in range(M)?
        sol, *_ = np.linalg.lstsq(M, -c0, rcond=None)
        if np.linalg.norm(M @ sol + c0) > tol:
            return "empty", "symbolic"
        others = [k for k, i in enumerate(free) if i not in spec.sigma2.vanishing]
        inside = [k for k, i in enumerate(free) if i in spec.sigma2.vanishing]
        equal = (np.linalg.norm(c0) <= tol
                 and (not others or np.max(np.abs(M[:, others])) <= tol)
                 and int(np.linalg.matrix_rank(M[:, inside], tol=tol)) == len(v2))
        return ("equal" if equal else "other"), "symbolic"
    # sampled comparison on a deterministic grid of slice directions
    k = len(free)
    pts = 2 * qmc.Halton(k, scramble=False).random(513)[1:] - 1
    on2 = pts.copy()
    for j, i in enumerate(free):
        if i in spec.sigma2.vanishing:
            on2[:, j] = 0
    full = np.zeros((len(pts), dims.nvars), dtype=complex)
    full2 = np.zeros_like(full)
    fl = sliced.to_float()
    for j, i in enumerate(free):
        full[:, i] = pts[:, j]
        full2[:, i] = on2[:, j]
    off = fl.evaluate_many(full)
    on = fl.evaluate_many(full2)
    dist = np.linalg.norm(pts - on2, axis=1)
    zeros_on2 = np.all(np.abs(on) <= tol)
    away = dist > 1e-3
    nonzero_off = np.all(np.abs(off[away]) > tol)
    if not np.any(np.abs(off) <= tol) and not np.any(np.abs(on) <= tol):
        return "empty", "sampled"
    if zeros_on2 and nonzero_off:
        return "equal", "sampled"
    if zeros_on2:
        return "contains", "sampled"
    return "other", "sampled"


def _analyze_ray(spec: OperatorSpec, ray: FiberDirection, tol: float) -> RayReport:
    dims = spec.dims
    p2, p1 = spec.on_ray(ray)
    rho = ray.base_point(dims)
    s1 = spec.sigma1

    vo = vanishing_order(p2, s1, rho, tol=tol)
    symp = is_symplectic(s1)
    h1 = {"pass": bool(symp and vo.order == 2 and vo.kernel_is_tangent),
          "symplectic": symp,
          "vanishing_order": vo.order if vo.order != math.inf else "inf",
          "hessian_kernel_is_tangent": vo.kernel_is_tangent,
          "sigma2_symplectic": is_symplectic(spec.sigma2)}

    h2 = _h2(p2, s1, rho, spec.cone, tol)

    F = hamiltonian_matrix(p2, rho)
    trp = tr_plus(F, spec.cone, tol=tol)
    ps = subprincipal_symbol(p2, p1)
    snapped = _snap(trp) if ps.exact else None
    q = ps + (snapped if snapped is not None else complex(trp))

    mixed = 0j
    n = dims.n
    for i in s1.transversal:
        if i < n:
            mixed += complex(p2.diff(i).diff(i + n)(rho))
    mu0 = complex(trp) + 0.5j * mixed

    relation, method = _char_q(q, spec, rho, tol)
    bracket_poly = poisson_bracket(conjugate(q), q)
    bval = complex(_to_float(bracket_poly(rho))) / 1j
    bracket = float(bval.real) if abs(bval.imag) <= tol else bval
    if relation == "empty":
        status = "elliptic"
    elif relation == "equal" and isinstance(bracket, float) and bracket > tol:
        status = "pass"
    else:
        status = "fail"
    h3 = {"pass": status == "pass", "status": status, "char_q": relation, "method": method,
          "bracket": bracket if isinstance(bracket, float) else _json_number(bracket),
          "sigma2_symplectic": is_symplectic(spec.sigma2)}
    # (1/i){conj q, q} as a symbol; exact whenever q is
    bsym = bracket_poly * (-1j if not bracket_poly.exact else _to_exact(-1j))
    if bsym.exact:
        h3["bracket_exact"] = str(bsym.substitute({i: rho[i] for i in range(dims.nvars)}).constant_term())
    return RayReport(ray, ray.label(dims), h1, h2, h3, q, snapped_to_number(snapped, trp), mu0, bsym)


def snapped_to_number(snapped, fallback):
    if snapped is None:
        return fallback
    if snapped.y == 0:
        return Fraction(int(snapped.x.numerator), int(snapped.x.denominator))
    return complex(_to_float(snapped))


def check_hypotheses(spec: OperatorSpec, tol: float = 1e-9) -> HypothesisReport:
    """Evaluate (H1), (H2), (H3) on every fiber ray of ``spec``.

    Raises
    ------
    StructuralError
        If sigma2 is not a codimension-2 subspace of sigma1.
    """
    _validate_manifolds(spec)
    report = HypothesisReport(spec.name, tol)
    for ray in spec.rays():
        report.rays.append(_analyze_ray(spec, ray, tol))
    return report


# ---------------------------------------------------------------------------
# localization

class Localization(NamedTuple):
    """Weyl-localized symbol at a point of sigma1.

    ``principal`` is the transversal quadratic part of ``p2``; ``lower`` is
    the constant ``p^s(rho)`` off sigma2, and on sigma2 the affine Taylor
    part of ``p^s`` in the sigma1-tangent directions normal to sigma2, which
    equals ``-tr+ + l1`` with ``l1`` the linearization of ``q``.
    """

    principal: PolySymbol
    lower: PolySymbol
    tr_plus: object
    mu0: complex


def _ray_through(spec: OperatorSpec, point) -> FiberDirection:
    dims = spec.dims
    sig = dims.block("sigma")
    vals = [point[i] for i in sig]
    mag = math.sqrt(sum(abs(_to_float(v)) ** 2 for v in vals))
    if mag == 0:
        raise ValueError("point has no fiber component")
    for r in spec.rays():
        v = _to_float(point[r.var]).real
        if v and (v > 0) == (r.sign > 0):
            w = abs(point[r.var]) if len([x for x in vals if x]) == 1 else mag
            return FiberDirection(r.var, r.sign, w)
    k = max(range(len(sig)), key=lambda j: abs(_to_float(vals[j])))
    return FiberDirection(sig[k], 1 if _to_float(vals[k]).real > 0 else -1, mag)


def localize(spec: OperatorSpec, z_zeta, on_sigma2: bool) -> Localization:
    """Taylor-localize the operator at a point of sigma1.

    Raises
    ------
    ValueError
        If the point is not on the designated manifold or the transversal
        Hessian of ``p2`` vanishes there.
    """
    point = list(z_zeta)
    s1, s2 = spec.sigma1, spec.sigma2
    if not s1.contains(point):
        raise ValueError("point is not on sigma1")
    if on_sigma2 and not s2.contains(point):
        raise ValueError("point is not on sigma2")
    if not on_sigma2 and s2.contains(point):
        raise ValueError("point lies on sigma2; use on_sigma2=True")
    ray = _ray_through(spec, point)
    p2, p1 = spec.on_ray(ray)
    quad = _transversal_taylor(p2, s1, point).homogeneous_part(2)
    if quad.max_abs_coefficient() == 0:
        raise ValueError("transversal Hessian of p2 vanishes at the point")
    ps = subprincipal_symbol(p2, p1)
    F = hamiltonian_matrix(p2, point)
    trp = tr_plus(F, spec.cone)
    n = spec.dims.n
    mixed = sum(complex(p2.diff(i).diff(i + n)(point)) for i in s1.transversal if i < n)
    mu0 = complex(trp) + 0.5j * mixed
    if on_sigma2:
        normal = [i for i in s2.vanishing if i not in s1.vanishing]
        shifted = ps.shift(point).substitute({i: 0 for i in range(spec.dims.nvars) if i not in normal})
        lower = shifted.homogeneous_part(0) + shifted.homogeneous_part(1)
    else:
        lower = PolySymbol.constant(spec.dims, ps(point))
    return Localization(quad, lower, trp, mu0)
