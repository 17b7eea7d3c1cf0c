"""Piecewise-concave approximation of functions over a box.

Three builders produce a maximum of concave diagonal-quadratic pieces:

* :func:`build_univariate` for Lipschitz functions of one variable,
* :func:`build_c2` for C2 functions via a difference-of-convex split,
* :func:`build_separable` for sums of univariate terms.

:mod:`pwcapprox.analysis` measures the result by dense sampling.
"""

from .analysis import (
    check_properties, convergence_study, estimate_lipschitz, sawtooth_value, sup_error,
    univariate_error,
)
from .core import Box, DiagQuadPiece, PwcFunction, eval_piece, eval_pwc
from .dc import build_c2, build_tangent_planes, estimate_mu, min_eigenvalue
from .expr import DomainError, Expr, ParseError, gradient_fd, hessian_fd, parse
from .modelfile import ModelFile, load_model, save_model
from .separable import SumForm, build_separable, eval_sumform, expand_sumform
from .univariate import UniGrid, build_grid, build_piece, build_univariate

__all__ = [
    "check_properties", "convergence_study", "estimate_lipschitz", "sawtooth_value",
    "sup_error", "univariate_error",
    "Box", "DiagQuadPiece", "PwcFunction", "eval_piece", "eval_pwc",
    "build_c2", "build_tangent_planes", "estimate_mu", "min_eigenvalue",
    "DomainError", "Expr", "ParseError", "gradient_fd", "hessian_fd", "parse",
    "ModelFile", "load_model", "save_model",
    "SumForm", "build_separable", "eval_sumform", "expand_sumform",
    "UniGrid", "build_grid", "build_piece", "build_univariate",
]
