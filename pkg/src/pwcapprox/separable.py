"""Separable targets: one univariate model per coordinate, summed.

A sum of piecewise-concave functions of distinct coordinates is again
piecewise concave.  :class:`SumForm` keeps the compact per-coordinate
representation; :func:`expand_sumform` writes out the explicit max over
all index tuples when an ordinary :class:`PwcFunction` is needed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Box, PwcFunction, pwc_from_arrays
from .expr import as_batch
from .univariate import MAX_SUBINTERVALS, UnivariateModel, build_univariate

DEFAULT_MAX_PIECES = 10**5


class TooManyPieces(ValueError):
    pass


@dataclass(frozen=True)
class SumForm:
    components: tuple[PwcFunction, ...]
    domain: Box

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) != self.domain.dim:
            raise ValueError(
                f"{len(comps)} components for a {self.domain.dim}-dimensional box"
            )
        for j, c in enumerate(comps):
            if c.dim != 1:
                raise ValueError(f"component {j + 1} is not univariate")
            if c.domain != self.domain.axis(j):
                raise ValueError(
                    f"component {j + 1} domain {c.domain} does not match box axis {j + 1}"
                )
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Values and per-coordinate winner indices, shapes ``(m,)`` and ``(m, n)``."""
        X = np.asarray(points, dtype=float)
        if X.ndim == 1 and self.dim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: model has {self.dim}, points have shape {X.shape}")
        total = np.zeros(X.shape[0])
        winners = np.empty(X.shape, dtype=np.int64)
        for j, comp in enumerate(self.components):
            # tensor grids repeat each coordinate value many times
            xs, inverse = np.unique(X[:, j], return_inverse=True)
            v, w = comp.evaluate(xs[:, None])
            total += v[inverse]
            winners[:, j] = w[inverse]
        return total, winners

    def __call__(self, x) -> float:
        return eval_sumform(self, x)


def eval_sumform(sf: SumForm, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (sf.dim,):
        raise ValueError(f"dimension mismatch: model has {sf.dim}, point has {x.shape}")
    return float(sf.evaluate(x[None, :])[0][0])


@dataclass(frozen=True)
class SeparableModel:
    sumform: SumForm
    parts: tuple[UnivariateModel, ...]
    eps: float

    @property
    def meta(self) -> dict:
        return {
            "builder": "separable",
            "eps": self.eps,
            "eps_split": [p.eps for p in self.parts],
            "kappa": [p.kappa for p in self.parts],
            "delta": [p.grid.delta for p in self.parts],
            "n_p": [p.grid.n_p for p in self.parts],
        }


def build_separable(components: Sequence, box: Box, eps: float,
                    eps_split: Sequence[float] | None = None,
                    max_subintervals: int = MAX_SUBINTERVALS) -> SeparableModel:
    """Build one univariate model per ``(f_j, kappa_j)`` pair.

    Each ``f_j`` is a univariate target in its own coordinate.  The
    tolerance is split evenly unless ``eps_split`` gives per-coordinate
    values, in which case their sum is the guaranteed total.
    """
    n = box.dim
    if len(components) != n:
        raise ValueError(f"{len(components)} components for a {n}-dimensional box")
    if eps_split is None:
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        eps_split = [eps / n] * n
    else:
        eps_split = [float(e) for e in eps_split]
        if len(eps_split) != n:
            raise ValueError("eps_split needs one entry per coordinate")
        eps = math.fsum(eps_split)
    parts = tuple(
        build_univariate(f, box.lower[j], box.upper[j], kappa, eps_split[j], max_subintervals)
        for j, (f, kappa) in enumerate(components)
    )
    sf = SumForm(tuple(p.pwc for p in parts), box)
    return SeparableModel(sf, parts, float(eps))


def separable_target(functions: Sequence):
    """Vectorized ``x -> sum_j f_j(x_j)`` for univariate ``f_j``."""
    batches = [as_batch(f) for f in functions]

    def target(points):
        X = np.asarray(points, dtype=float)
        total = np.zeros(X.shape[0])
        for j, g in enumerate(batches):
            total += g(X[:, j:j + 1])
        return total

    return target


def expand_sumform(sf: SumForm, max_pieces: int = DEFAULT_MAX_PIECES) -> PwcFunction:
    """Explicit max form: one piece per tuple ``(i_1, ..., i_n)``.

    Tuples are enumerated lexicographically, first coordinate slowest.
    """
    counts = [c.n_pieces for c in sf.components]
    total = math.prod(counts)
    if total > max_pieces:
        raise TooManyPieces(
            f"expansion needs {' x '.join(map(str, counts))} = {total} pieces, "
            f"limit is {max_pieces}"
        )
    n = sf.dim
    D = np.empty((total, n))
    A = np.empty((total, n))
    B = np.zeros(total)
    index = np.array(list(itertools.product(*(range(k) for k in counts)))).reshape(total, n)
    for j, comp in enumerate(sf.components):
        Dj, Aj, Bj = comp.coefficients
        D[:, j] = Dj[index[:, j], 0]
        A[:, j] = Aj[index[:, j], 0]
        B += Bj[index[:, j]]
    return pwc_from_arrays(D, A, B, sf.domain)
