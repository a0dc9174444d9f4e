"""Computational toolkit for analytic hypoellipticity with loss of 3/2 derivatives."""

from .symbols import (
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

__version__ = "0.1.0"

__all__ = [
    "GaussianSymbol",
    "PhaseSpaceDims",
    "PolySymbol",
    "conjugate",
    "evaluate",
    "moyal_product",
    "moyal_product_gaussian",
    "poisson_bracket",
    "subprincipal_symbol",
]
