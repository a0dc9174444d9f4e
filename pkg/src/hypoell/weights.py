"""Hamilton-Jacobi deformation of the weight ``phi0(x) = |Im x|^2 / 2``.

Points of the real phase space ``(x', xi')`` sit on the FBI side at
``x = x' - i xi'``; on ``Lambda_phi0`` the fiber variable is
``xi = (2/i) d_x phi0 = -Im x``.  A real symbol ``r`` is carried over as the
holomorphic polynomial ``r~(x, xi) = r(x + i xi, xi)``, and the weight solves

    d_t phi = Re r~(x, (2/i) d_x phi),    phi(0, .) = phi0.

With ``x = u + i v`` and real gradient ``p = (p_u, p_v)`` the fiber argument
is ``-p_v - i p_u``, so the equation is the real Hamilton-Jacobi equation
``d_t phi = H(u, v, p)`` with ``H = Re r~``.  It is solved by characteristics:
``dz/dt = -H_p``, ``dp/dt = H_z``, ``d phi/dt = H - p.H_p``, with RK4 steps.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral_geometry import LinearConicManifold, sphere_points
from .symbols import PhaseSpaceDims, PolySymbol

__all__ = [
    "DeformationField",
    "WeightFunction",
    "CausticError",
    "TangencyReport",
    "GapReport",
    "GRAPH_DEFECT_MAX",
    "default_grid",
    "slice_grid",
    "evolve_weight",
    "graph_defect",
    "graph_window",
    "tangency_check",
    "weight_gap_report",
]

GRAPH_DEFECT_MAX = 0.5   # sup ||dZ_t/dz0 - I||_2 allowed for the graph condition
STEP = 0.01              # RK4 step ceiling


class CausticError(ValueError):
    """The flowed Lagrangian is no longer a graph; ``safe_t`` is the largest safe time."""

    def __init__(self, message: str, safe_t: float):
        super().__init__(message)
        self.safe_t = safe_t


# ---------------------------------------------------------------------------
# the deformation field

@dataclass(frozen=True)
class DeformationField:
    """Real symbol ``r`` comparable to the squared distance from ``center``.

    Parameters
    ----------
    r : PolySymbol
        Real coefficients.
    center : (x0, xi0)
        Real phase-space point, one length-``n`` sequence each.
    C : float
        Transversal weight used by :meth:`standard`; informational otherwise.
    strict : bool
        Raise unless ``r`` vanishes to exactly second order at the center
        (positive definite Hessian) and sampled ``r / dist^2`` stays positive.
        With ``strict=False`` the field is kept and ``flagged`` set.
    """

    r: PolySymbol
    center: tuple
    C: float = 1.0
    strict: bool = True
    comparability: tuple = field(init=False)

    def __post_init__(self):
        n = self.r.dims.n
        x0, xi0 = (tuple(float(v) for v in c) for c in self.center)
        if len(x0) != n or len(xi0) != n:
            raise ValueError(f"center needs two length-{n} vectors")
        object.__setattr__(self, "center", (x0, xi0))
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.r.is_real():
            raise ValueError("r must have real coefficients")
        object.__setattr__(self, "comparability", self._sample_ratio())
        if self.strict and self.flagged:
            lo, hi = self.comparability
            raise ValueError(f"r is not comparable to the squared distance (ratio range [{lo:.3g}, {hi:.3g}])")

    @property
    def dims(self) -> PhaseSpaceDims:
        return self.r.dims

    @property
    def center_point(self) -> np.ndarray:
        return np.array(self.center[0] + self.center[1])

    @property
    def center_complex(self) -> np.ndarray:
        """``x0 - i xi0`` on the FBI side."""
        return np.array(self.center[0]) - 1j * np.array(self.center[1])

    @property
    def flagged(self) -> bool:
        return not (self.comparability[0] > 0 and self._quadratic_at_center())

    def _quadratic_at_center(self, tol: float = 1e-9) -> bool:
        """``r(c) = 0``, ``grad r(c) = 0`` and a positive definite Hessian at ``c``."""
        c = self.center_point
        if abs(complex(self.r(list(c)))) > tol:
            return False
        if any(abs(complex(self.r.diff(i)(list(c)))) > tol for i in range(self.dims.nvars)):
            return False
        lam = np.linalg.eigvalsh(np.real(self.r.hessian(list(c))))
        return bool(lam.min() > tol * max(1.0, lam.max()))

    def _sample_ratio(self) -> tuple[float, float]:
        d = 2 * self.dims.n
        dirs = sphere_points(d, 512)
        c = self.center_point
        ratios = []
        for rad in (0.05, 0.2, 0.5, 1.0):
            vals = self.r.evaluate_many(c + rad * dirs).real
            ratios.append(vals / rad ** 2)
        ratios = np.concatenate(ratios)
        return float(ratios.min()), float(ratios.max())

    @classmethod
    def standard(cls, dims: PhaseSpaceDims, center=None, C: float = 1.0) -> "DeformationField":
        """``(s - s0)^2 + (sigma - sigma0)^2 + C (|t|^2 + |tau|^2 + |y|^2 + |eta|^2)``.

        The default center is ``s = 0`` with ``sigma_1 = 1`` and all other
        coordinates zero (``eta_1 = 1`` when there is no ``s`` block).
        """
        n = dims.n
        if center is None:
            xi0 = [0.0] * n
            xi0[dims.s_index(0) if dims.n_s else (dims.y_index(0) if dims.n_y else 0)] = 1.0
            center = ([0.0] * n, xi0)
        x0, xi0 = center
        if len(x0) != n or len(xi0) != n:
            raise ValueError(f"center needs two length-{n} vectors")
        pt = list(x0) + list(xi0)
        tangential = set(dims.block("s")) | set(dims.block("sigma"))
        r = PolySymbol.zero(dims, exact=False)
        for i in range(dims.nvars):
            zi = PolySymbol.variable(dims, i, exact=False) - float(pt[i])
            r = r + (1.0 if i in tangential else float(C)) * zi * zi
        return cls(r, (x0, xi0), C)


# ---------------------------------------------------------------------------
# characteristics

class _Flow:
    """Vectorized right-hand side of the characteristic system."""

    def __init__(self, r: PolySymbol):
        dims = r.dims
        n = dims.n
        X = [PolySymbol.variable(dims, j, exact=False) for j in range(2 * n)]
        images = [X[j] + 1j * X[n + j] for j in range(n)] + X[n:]
        rt = r.to_float().compose(images)
        self.n = n
        polys = [rt] + [rt.diff(j) for j in range(2 * n)]
        monos = sorted({e for q in polys for e in q.terms})
        index = {e: k for k, e in enumerate(monos)}
        self._exps = np.array(monos, dtype=int).reshape(len(monos), 2 * n)
        self._coef = np.zeros((len(monos), len(polys)), dtype=complex)
        for c, q in enumerate(polys):
            for e, v in q.terms.items():
                self._coef[index[e], c] = complex(v)
        self._maxdeg = int(self._exps.max()) if len(monos) else 0

    def _eval(self, pts: np.ndarray) -> np.ndarray:
        """Columns ``r~, d_x1 r~, ..., d_xi_n r~`` at ``pts``, sharing the monomials."""
        powers = [[np.ones(pts.shape[0], dtype=complex)] for _ in range(pts.shape[1])]
        for i, col in enumerate(pts.T):
            for _ in range(self._maxdeg):
                powers[i].append(powers[i][-1] * col)
        mono = np.empty((pts.shape[0], len(self._exps)), dtype=complex)
        for k, e in enumerate(self._exps):
            m = np.ones(pts.shape[0], dtype=complex)
            for i in np.nonzero(e)[0]:
                m = m * powers[i][e[i]]
            mono[:, k] = m
        return mono @ self._coef

    def rhs(self, y):
        n = self.n
        u, v, pu, pv = y[:, :n], y[:, n:2 * n], y[:, 2 * n:3 * n], y[:, 3 * n:4 * n]
        vals = self._eval(np.concatenate([u + 1j * v, -pv - 1j * pu], axis=1))
        f, fx, fxi = vals[:, 0], vals[:, 1:n + 1], vals[:, n + 1:]
        Hu, Hv, Hpu, Hpv = fx.real, -fx.imag, fxi.imag, -fxi.real
        dphi = f.real - np.sum(pu * Hpu + pv * Hpv, axis=1)
        return np.concatenate([-Hpu, -Hpv, Hu, Hv, dphi[:, None]], axis=1)

    def run(self, z0: np.ndarray, t: float, n_steps: int | None = None) -> np.ndarray:
        """Flow the initial points ``z0`` (complex, shape ``(M, n)``) to time ``t``.

        Returns the state ``(u, v, p_u, p_v, phi)`` with shape ``(M, 4n + 1)``.
        """
        u0, v0 = z0.real, z0.imag
        y = np.concatenate([u0, v0, np.zeros_like(u0), v0, 0.5 * np.sum(v0 * v0, axis=1)[:, None]], axis=1)
        if t == 0:
            return y
        steps = n_steps or max(8, math.ceil(abs(t) / STEP))
        h = t / steps
        for _ in range(steps):
            y = _rk4(self, y, h)
        return y


def _endpoint(flow: _Flow, y: np.ndarray) -> np.ndarray:
    n = flow.n
    return y[:, :n] + 1j * y[:, n:2 * n]


def _rk4(flow: _Flow, y: np.ndarray, h: float) -> np.ndarray:
    k1 = flow.rhs(y)
    k2 = flow.rhs(y + h / 2 * k1)
    k3 = flow.rhs(y + h / 2 * k2)
    k4 = flow.rhs(y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


_DELTA = 1e-6


def _perturbed(z0: np.ndarray) -> np.ndarray:
    """Stack ``z0`` with its central-difference perturbations (``4n + 1`` blocks)."""
    n = z0.shape[1]
    blocks = [z0]
    for k in range(2 * n):
        e = np.zeros(n, dtype=complex)
        e[k % n] = 1.0 if k < n else 1j
        blocks += [z0 + _DELTA * e, z0 - _DELTA * e]
    return np.concatenate(blocks, axis=0)


def _defect_of_state(flow: _Flow, y: np.ndarray, M: int) -> np.ndarray:
    n = flow.n
    Z = _endpoint(flow, y)
    cols = []
    for k in range(2 * n):
        d = (Z[(2 * k + 1) * M:(2 * k + 2) * M] - Z[(2 * k + 2) * M:(2 * k + 3) * M]) / (2 * _DELTA)
        cols.append(np.concatenate([d.real, d.imag], axis=1))
    J = np.stack(cols, axis=2) - np.eye(2 * n)[None]
    return np.linalg.norm(J, 2, axis=(1, 2))


def _defects(flow: _Flow, z0: np.ndarray, t: float, n_steps=None) -> np.ndarray:
    """``||dZ_t/dz0 - I||_2`` per point, by central differences."""
    M = z0.shape[0]
    if t == 0:
        return np.zeros(M)
    return _defect_of_state(flow, flow.run(_perturbed(z0), t, n_steps), M)


def graph_defect(field: DeformationField, grid: np.ndarray, t: float) -> float:
    """``sup ||dZ_t/dz0 - I||_2`` over initial points ``grid``.

    At most 1/2 means ``z0 -> Z_t(z0)`` is a perturbation of the identity by
    a contraction, hence injective: the flowed Lagrangian stays a graph.
    """
    return float(_defects(_Flow(field.r), np.asarray(grid, dtype=complex), t).max())


def graph_window(field: DeformationField, grid: np.ndarray, t_max: float = 1.0, rtol: float = 1e-3) -> float:
    """Largest ``t <= t_max`` (to ``rtol``) satisfying the graph condition.

    One integration scans the defect step by step; the first failing step is
    then bisected with single RK4 sub-steps from its left end.
    """
    flow = _Flow(field.r)
    z = np.asarray(grid, dtype=complex)
    M = z.shape[0]
    steps = max(8, math.ceil(t_max / STEP))
    h = t_max / steps
    y = flow.run(_perturbed(z), 0.0)
    for k in range(steps):
        y_next = _rk4(flow, y, h)
        if not np.all(np.isfinite(y_next)) or _defect_of_state(flow, y_next, M).max() > GRAPH_DEFECT_MAX:
            lo, hi = 0.0, h
            while hi - lo > rtol * (k * h + hi):
                mid = 0.5 * (lo + hi)
                ok = _defect_of_state(flow, _rk4(flow, y, mid), M).max() <= GRAPH_DEFECT_MAX
                lo, hi = (mid, hi) if ok else (lo, mid)
            return k * h + lo
        y = y_next
    return float(t_max)


# ---------------------------------------------------------------------------
# grids

def default_grid(field: DeformationField, radius: float = 0.6, n_dirs: int = 256,
                 radii=(0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)) -> np.ndarray:
    """Shells around the FBI-side center: ``x0_c + rho (a + i b)`` with ``(a, b)`` on the sphere."""
    n = field.dims.n
    dirs = sphere_points(2 * n, n_dirs)
    dz = dirs[:, :n] + 1j * dirs[:, n:]
    c = field.center_complex
    pts = [c[None, :]]
    for rho in radii:
        if 0 < rho <= radius:
            pts.append(c[None, :] + rho * dz)
    return np.concatenate(pts, axis=0)


def slice_grid(field: DeformationField, coord: int = 0, half_width: float = 0.6, n: int = 41) -> np.ndarray:
    """Square grid in the ``(Re x_k, Im x_k)`` plane through the center."""
    c = field.center_complex
    a = np.linspace(-half_width, half_width, n)
    U, V = np.meshgrid(a, a, indexing="ij")
    pts = np.repeat(c[None, :], U.size, axis=0)
    pts[:, coord] = c[coord] + U.ravel() + 1j * V.ravel()
    return pts


# ---------------------------------------------------------------------------
# evolution

@dataclass
class WeightFunction:
    """``phi_t`` sampled at complex points ``points`` (shape ``(M, n)``).

    ``gradient_samples`` holds the holomorphic derivative ``d_x phi_t``.
    """

    t: float
    points: np.ndarray
    samples: np.ndarray
    gradient_samples: np.ndarray
    center: np.ndarray
    graph_defect: float = 0.0
    steps: int = 0

    @property
    def phi0(self) -> np.ndarray:
        return 0.5 * np.sum(self.points.imag ** 2, axis=1)

    @property
    def gap(self) -> np.ndarray:
        return self.samples - self.phi0

    @property
    def distance(self) -> np.ndarray:
        return np.linalg.norm(self.points - self.center[None, :], axis=1)

    def to_csv(self) -> str:
        n = self.points.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"re_x{j + 1}" for j in range(n)] + [f"im_x{j + 1}" for j in range(n)] + ["phi_t", "phi_0", "gap"])
        for z, p, p0 in zip(self.points, self.samples, self.phi0):
            w.writerow([f"{v:.17g}" for v in list(z.real) + list(z.imag) + [p, p0, p - p0]])
        return buf.getvalue()


def evolve_weight(field: DeformationField, t_final: float, grid=None, n_steps: int | None = None,
                  max_iter: int = 80, tol: float = 1e-13) -> WeightFunction:
    """Evolve ``phi0`` to ``t_final`` and sample it at the points ``grid``.

    Characteristics are launched from preimages found by the fixed-point
    iteration ``z0 <- z0 + (z - Z_t(z0))``, which converges under the graph
    condition.

    Raises
    ------
    CausticError
        If ``sup ||dZ/dz0 - I|| > 1/2`` at the preimages; ``safe_t`` carries
        the largest time passing the check on the same grid.
    """
    if t_final < 0:
        raise ValueError("t_final must be nonnegative")
    target = np.asarray(default_grid(field) if grid is None else grid, dtype=complex)
    if target.ndim != 2 or target.shape[1] != field.dims.n:
        raise ValueError(f"grid must have shape (M, {field.dims.n})")
    flow = _Flow(field.r)
    steps = n_steps or max(8, math.ceil(t_final / STEP))
    z0 = target.copy()
    if t_final > 0:
        def caustic(safe):
            return CausticError(f"graph condition fails at t = {t_final:g}; largest safe t is {safe:.6g}", safe)

        safe = graph_window(field, target, t_max=t_final)
        if safe < t_final:
            raise caustic(safe)
        for _ in range(max_iter):
            err = target - _endpoint(flow, flow.run(z0, t_final, steps))
            z0 = z0 + err
            if not np.all(np.isfinite(err)) or np.abs(err).max() < tol:
                break
        defect = float(_defects(flow, z0, t_final, steps).max())
        if not np.all(np.isfinite(z0)) or defect > GRAPH_DEFECT_MAX:
            raise caustic(graph_window(field, np.where(np.isfinite(z0), z0, target), t_max=t_final))
    else:
        defect = 0.0
    y = flow.run(z0, t_final, steps)
    n = field.dims.n
    pu, pv = y[:, 2 * n:3 * n], y[:, 3 * n:4 * n]
    return WeightFunction(float(t_final), target, y[:, -1], 0.5 * (pu - 1j * pv),
                          field.center_complex, defect, steps if t_final > 0 else 0)


# ---------------------------------------------------------------------------
# reports

@dataclass
class TangencyReport:
    """Largest component of ``H_r`` transversal to each manifold."""

    violations: list[float]
    labels: list[str]
    tol: float

    @property
    def ok(self) -> bool:
        return all(v < self.tol for v in self.violations)

    def to_json(self) -> dict:
        return {"manifolds": [{"vanishing": lab, "max_violation": v} for lab, v in zip(self.labels, self.violations)],
                "tol": self.tol, "ok": self.ok}


def _hamilton_field(r: PolySymbol, pts: np.ndarray) -> np.ndarray:
    n = r.dims.n
    comps = [r.diff(n + j).evaluate_many(pts) for j in range(n)] + [-r.diff(j).evaluate_many(pts) for j in range(n)]
    return np.column_stack(comps).real


def tangency_check(field: DeformationField, manifolds, n_points: int = 512, tol: float = 1e-12,
                   radius: float = 1.0, seed: int = 0) -> TangencyReport:
    """Evaluate ``H_r`` at random points of each manifold near the center."""
    d = field.dims.nvars
    c = field.center_point
    rng = np.random.default_rng(seed)
    labels, out = [], []
    for m in manifolds:
        if not isinstance(m, LinearConicManifold):
            raise TypeError("manifolds must be LinearConicManifold instances")
        van = sorted(m.vanishing)
        pts = c + radius * rng.uniform(-1, 1, size=(n_points, d))
        pts[:, van] = 0.0
        pts = np.vstack([pts, np.where(np.isin(np.arange(d), van), 0.0, c)[None, :]])
        Hr = _hamilton_field(field.r, pts)
        out.append(float(np.abs(Hr[:, van]).max()) if van else 0.0)
        labels.append(",".join(field.dims.names[i] for i in van))
    return TangencyReport(out, labels, tol)


@dataclass
class GapReport:
    """``alpha1 = inf_{K1} (phi_t - phi0)/t`` and ``sup_{Omega4} (phi_t - phi0)``."""

    t: float
    alpha1: float
    k1: tuple
    sup_gap_omega4: float
    omega4_radius: float
    min_gap: float
    ratio_range: tuple
    n_k1: int
    n_omega4: int

    def to_json(self) -> dict:
        return {
            "t": self.t, "alpha1": self.alpha1, "K1": {"d_min": self.k1[0], "d_max": self.k1[1], "points": self.n_k1},
            "Omega4": {"radius": self.omega4_radius, "sup_gap": self.sup_gap_omega4, "points": self.n_omega4,
                       "taylor_bound": 2 * self.t * self.omega4_radius ** 2},
            "min_gap": self.min_gap,
            "ratio_range": list(self.ratio_range),
        }


def weight_gap_report(w: WeightFunction, k1=(0.1, 0.5), omega4_radius: float = 0.1) -> GapReport:
    """Gap statistics on the annulus ``K1 = {d_min <= |x - x0| <= d_max}`` and the ball ``Omega4``.

    ``ratio_range`` is the range of ``(phi_t - phi0) / (t |x - x0|^2)`` on ``K1``.
    """
    d = w.distance
    gap = w.gap
    eps = 1e-12
    in_k1 = (d >= k1[0] - eps) & (d <= k1[1] + eps)
    in_b = d <= omega4_radius + eps
    if w.t > 0 and in_k1.any():
        alpha1 = float((gap[in_k1] / w.t).min())
        ratios = gap[in_k1] / (w.t * d[in_k1] ** 2)
        rr = (float(ratios.min()), float(ratios.max()))
    else:
        alpha1, rr = 0.0, (math.nan, math.nan)
    return GapReport(w.t, alpha1, tuple(k1), float(gap[in_b].max()) if in_b.any() else 0.0, omega4_radius,
                     float(gap.min()), rr, int(in_k1.sum()), int(in_b.sum()))
