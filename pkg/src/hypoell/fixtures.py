"""Reference operators in model coordinates.

* :func:`heisenberg_example` -- the model with full symbol
  ``sum(tau_j^2 + |sigma|^2 t_j^2) - nu |sigma| + eta + i y |sigma|``.
* :func:`p_minus` -- ``D_x^2 + x^2 D_t^2 - D_t`` with ``x`` as the t-variable,
  ``t`` as the s-variable and a dummy y-pair.
* :func:`box_b_model` -- the Kohn Laplacian on the Heisenberg group written in
  model coordinates, ``sum(tau_j^2 + t_j^2 sigma^2) - n sigma``.
* :func:`box_b_symbol` -- the same operator's literal symbol in coordinates
  ``(x_j, y_j, t)`` of ``R^{2n+1}``.
"""

from __future__ import annotations

from fractions import Fraction
from importlib import resources

from .spectral_geometry import (
    Cone,
    FiberDirection,
    FiberSymbol,
    LinearConicManifold,
    OperatorSpec,
)
from .symbols import PhaseSpaceDims, PolySymbol

__all__ = [
    "heisenberg_example",
    "p_minus",
    "box_b_model",
    "box_b_symbol",
    "FIXTURES",
    "load_fixture",
    "fixture_path",
]


def _manifolds(dims: PhaseSpaceDims):
    t = dims.block("t") + dims.block("tau")
    yy = dims.block("y") + dims.block("eta")
    return LinearConicManifold(dims, frozenset(t)), LinearConicManifold(dims, frozenset(t + yy))


def _rays(dims: PhaseSpaceDims, weight=1):
    var = dims.block("sigma")[0]
    return (FiberDirection(var, 1, weight), FiberDirection(var, -1, weight))


def _sum_squares(dims: PhaseSpaceDims, names) -> PolySymbol:
    return sum((PolySymbol.from_expr(dims, f"{v}**2") for v in names), PolySymbol.zero(dims))


def heisenberg_example(nu: int = 2, n_s: int = 1, weight=1) -> OperatorSpec:
    """Model operator with ``q = eta + i y |sigma|`` on both fiber rays."""
    dims = PhaseSpaceDims(nu, 1, n_s)
    names = dims.names
    taus = [names[i] for i in dims.block("tau")]
    ts = [names[i] for i in dims.block("t")]
    p2 = FiberSymbol(dims, {0: _sum_squares(dims, taus), 2: _sum_squares(dims, ts)})
    p1 = FiberSymbol(dims, {0: PolySymbol.from_expr(dims, "eta"),
                            1: PolySymbol.from_expr(dims, f"-{nu} + I*y")})
    s1, s2 = _manifolds(dims)
    return OperatorSpec(dims, p2, p1, s1, s2, Cone(), _rays(dims, weight),
                        name=f"heisenberg_example(nu={nu}, n_s={n_s})")


def p_minus() -> OperatorSpec:
    """``D_x^2 + x^2 D_t^2 - D_t``; fails (H3) on the ray ``tau > 0``."""
    dims = PhaseSpaceDims(1, 1, 1)
    p2 = FiberSymbol(dims, {0: PolySymbol.from_expr(dims, "tau**2 + t**2*sigma**2")})
    p1 = FiberSymbol(dims, {0: PolySymbol.from_expr(dims, "-sigma")})
    s1, s2 = _manifolds(dims)
    return OperatorSpec(dims, p2, p1, s1, s2, Cone(), _rays(dims), name="p_minus")


def box_b_model(n: int = 1) -> OperatorSpec:
    """Kohn Laplacian in model coordinates: ``q = n(|sigma| - sigma)``."""
    dims = PhaseSpaceDims(n, 1, 1)
    names = dims.names
    taus = [names[i] for i in dims.block("tau")]
    ts = [names[i] for i in dims.block("t")]
    p2 = FiberSymbol(dims, {0: _sum_squares(dims, taus), 2: _sum_squares(dims, ts)})
    p1 = FiberSymbol(dims, {0: PolySymbol.from_expr(dims, f"-{n}*sigma")})
    s1, s2 = _manifolds(dims)
    return OperatorSpec(dims, p2, p1, s1, s2, Cone(), _rays(dims), name=f"box_b(n={n})")


def box_b_symbol(n: int) -> tuple[PhaseSpaceDims, PolySymbol, PolySymbol]:
    """Literal symbol of the Kohn Laplacian on ``R^{2n+1}``.

    Coordinates ``(x_1..x_n, y_1..y_n, t)`` occupy the t-slots ``0..2n-1`` and
    the single s-slot.  ``p2 = sum (xi_j/2 + y_j tau)^2 + (eta_j/2 - x_j tau)^2``
    and ``p1 = -n tau``.
    """
    dims = PhaseSpaceDims(2 * n, 0, 1)
    N = dims.n
    var = lambda i: PolySymbol.variable(dims, i)  # noqa: E731
    tau = var(dims.s_index() + N)
    half = PolySymbol.constant(dims, Fraction(1, 2))
    p2 = PolySymbol.zero(dims)
    for j in range(n):
        x, y = var(j), var(n + j)
        xi, eta = var(N + j), var(N + n + j)
        p2 = p2 + (half * xi + y * tau) ** 2 + (half * eta - x * tau) ** 2
    p1 = tau * (-n)
    return dims, p2, p1


FIXTURES = {
    "heisenberg_example": heisenberg_example,
    "p_minus": p_minus,
    "box_b": box_b_model,
}


def fixture_path(name: str):
    """Path of the shipped JSON copy of a fixture."""
    return resources.files("hypoell") / "data" / f"{name}.json"


def load_fixture(name: str) -> OperatorSpec:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return OperatorSpec.load(fixture_path(name))
