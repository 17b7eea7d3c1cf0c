"""Max-of-parabolas approximation of a Lipschitz univariate function.

The interval is cut into ``n_p`` equal subintervals ``[L, R]`` of width
``delta``.  On each one a concave parabola is fitted that matches the target
at the midpoint and has slope ``+2*kappa`` at ``L`` and ``-2*kappa`` at
``R``.  The maximum of these parabolas is within ``2.5 * kappa * delta`` of
the target everywhere on the interval, so ``delta = eps / (2.5 * kappa)``
meets a tolerance ``eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Box, DiagQuadPiece, PwcFunction, pwc_from_arrays
from .expr import as_batch

MAX_SUBINTERVALS = 10**8

# Width ratios this close to an integer are treated as exact multiples so
# that e.g. delta=0.1 on [0, 1] gives 10 subintervals rather than 11.
_INTEGER_SNAP = 1e-9


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class UniGrid:
    lower: float
    upper: float
    delta: float
    n_p: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("grid needs lower < upper")
        if self.n_p < 1 or self.delta <= 0:
            raise ValueError("grid needs n_p >= 1 and delta > 0")
        width = self.upper - self.lower
        if abs(self.n_p * self.delta - width) > 1e-12 * width:
            raise ValueError(
                f"n_p * delta = {self.n_p * self.delta!r} does not match the width {width!r}"
            )

    def node(self, i: int) -> float:
        """Grid node ``i`` for ``i = 0 .. n_p``; both endpoints are exact."""
        if not 0 <= i <= self.n_p:
            raise IndexError(f"node index {i} outside 0..{self.n_p}")
        if i == self.n_p:
            return self.upper
        return self.lower + i * self.delta

    def nodes(self) -> np.ndarray:
        out = self.lower + np.arange(self.n_p + 1) * self.delta
        out[-1] = self.upper
        return out

    def subinterval(self, i: int) -> tuple[float, float]:
        """Endpoints of subinterval ``i``, counted ``1 .. n_p``."""
        if not 1 <= i <= self.n_p:
            raise IndexError(f"subinterval index {i} outside 1..{self.n_p}")
        return self.node(i - 1), self.node(i)

    def midpoints(self) -> np.ndarray:
        return self.nodes()[:-1] + 0.5 * self.delta


def _check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not (kappa > 0 and math.isfinite(kappa)):
        raise ValueError(f"Lipschitz constant must be positive and finite, got {kappa}")
    return kappa


def grid_from_delta(lower: float, upper: float, delta: float,
                    max_subintervals: int = MAX_SUBINTERVALS) -> UniGrid:
    """Uniform grid whose spacing is the largest value ``<= delta`` that
    divides ``[lower, upper]`` exactly."""
    lower, upper, delta = float(lower), float(upper), float(delta)
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    if not delta > 0:
        raise ValueError(f"spacing must be positive, got {delta}")
    width = upper - lower
    ratio = width / delta
    if not math.isfinite(ratio) or ratio > max_subintervals:
        raise GridTooLarge(
            f"{ratio:.4g} subintervals requested, limit is {max_subintervals}"
        )
    n_p = max(1, math.ceil(ratio))
    if abs(ratio - round(ratio)) <= _INTEGER_SNAP * ratio and round(ratio) >= 1:
        n_p = round(ratio)
    return UniGrid(lower, upper, width / n_p, n_p)


def build_grid(lower: float, upper: float, eps: float, kappa: float,
               max_subintervals: int = MAX_SUBINTERVALS) -> UniGrid:
    """Grid meeting tolerance ``eps``: spacing at most ``eps / (2.5 kappa)``."""
    kappa = _check_kappa(kappa)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return grid_from_delta(lower, upper, eps / (2.5 * kappa), max_subintervals)


def piece_coefficients(left, right, delta, kappa, v):
    """Closed-form (d, a, b) of the parabola on ``[left, right]``.

    Works elementwise on arrays.  ``v`` is the target value at the
    midpoint ``left + delta / 2``.
    """
    d = -2.0 * kappa / delta
    a = -2.0 * kappa * (1.0 - 2.0 * right / delta)
    b = -2.0 * kappa * left * left / delta - 0.5 * kappa * delta - 2.0 * kappa * left + v
    return d, a, b


def build_piece(f, grid: UniGrid, i: int, kappa: float) -> DiagQuadPiece:
    kappa = _check_kappa(kappa)
    left, right = grid.subinterval(i)
    mid = left + 0.5 * grid.delta
    v = float(as_batch(f)(np.array([[mid]]))[0])
    d, a, b = piece_coefficients(left, right, grid.delta, kappa, v)
    return DiagQuadPiece((d,), (a,), b)


@dataclass(frozen=True)
class UnivariateModel:
    pwc: PwcFunction
    grid: UniGrid
    kappa: float
    eps: float

    @property
    def meta(self) -> dict:
        return {
            "builder": "univariate",
            "kappa": self.kappa,
            "eps": self.eps,
            "delta": self.grid.delta,
            "n_p": self.grid.n_p,
        }


def build_on_grid(f, grid: UniGrid, kappa: float) -> PwcFunction:
    kappa = _check_kappa(kappa)
    nodes = grid.nodes()
    left, right = nodes[:-1], nodes[1:]
    mids = left + 0.5 * grid.delta
    v = as_batch(f)(mids[:, None])
    d, a, b = piece_coefficients(left, right, grid.delta, kappa, v)
    D = np.full((grid.n_p, 1), d)
    return pwc_from_arrays(D, a[:, None], b, Box((grid.lower,), (grid.upper,)))


def build_univariate(f, lower: float, upper: float, kappa: float, eps: float,
                     max_subintervals: int = MAX_SUBINTERVALS) -> UnivariateModel:
    """Approximate ``f`` on ``[lower, upper]`` to within ``eps``.

    ``kappa`` must bound the Lipschitz modulus of ``f`` on the interval;
    it is trusted, not verified.
    """
    grid = build_grid(lower, upper, eps, kappa, max_subintervals)
    return UnivariateModel(build_on_grid(f, grid, kappa), grid, float(kappa), float(eps))
