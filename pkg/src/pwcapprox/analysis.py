"""Empirical certification of piecewise-concave approximations.

Every claim here is checked by dense sampling, not by global optimization:
a report states how many samples it used so the claim can be reproduced.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Box, PwcFunction
from .expr import as_batch
from .univariate import UniGrid, build_on_grid, grid_from_delta

LIPSCHITZ_FLOOR = 1e-12
DEFAULT_SAFETY = 1.1
MAX_SAMPLES = 5 * 10**7

STUDY_HEADER = ("delta", "n_p", "max_error", "bound", "ratio")


class TooManySamples(ValueError):
    pass


def _as_box(box) -> Box:
    if isinstance(box, Box):
        return box
    lower, upper = box
    return Box(np.atleast_1d(lower), np.atleast_1d(upper))


def estimate_lipschitz(f, box, samples_per_unit: int = 1000,
                       safety: float = DEFAULT_SAFETY) -> float:
    """Heuristic Lipschitz constant of a univariate ``f``.

    Largest difference quotient between consecutive points of a uniform
    grid, times ``safety``.  Sampled quotients can only under-estimate the
    true modulus, hence the factor.  Constant functions get the floor
    ``1e-12 * safety``.
    """
    box = _as_box(box)
    if box.dim != 1:
        raise ValueError("Lipschitz estimation is univariate")
    if safety < 1:
        raise ValueError("safety factor must be >= 1")
    lo, hi = box.lower[0], box.upper[0]
    n = max(1, math.ceil(samples_per_unit * (hi - lo)))
    x = np.linspace(lo, hi, n + 1)
    y = as_batch(f)(x[:, None])
    slopes = np.abs(np.diff(y)) / np.diff(x)
    return safety * max(float(np.max(slopes)), LIPSCHITZ_FLOOR)


@dataclass(frozen=True)
class ErrorReport:
    max_abs_error: float
    argmax_point: tuple[float, ...]
    samples_used: int
    bound: float | None = None
    bound_satisfied: bool = True

    def to_dict(self) -> dict:
        return {
            "max_abs_error": self.max_abs_error,
            "argmax": list(self.argmax_point),
            "bound": self.bound,
            "pass": self.bound_satisfied,
            "samples_used": self.samples_used,
        }

    def summary(self) -> str:
        point = ", ".join(f"{v:.6g}" for v in self.argmax_point)
        text = f"max_error = {self.max_abs_error:.6g} at ({point}) over {self.samples_used} samples"
        if self.bound is not None:
            rel = "<=" if self.bound_satisfied else ">"
            text += f"; max_error {rel} {self.bound:.6g}"
        return text


def tensor_samples(box: Box, points_per_axis) -> np.ndarray:
    counts = np.broadcast_to(np.asarray(points_per_axis, dtype=int), (box.dim,))
    if np.any(counts < 2):
        raise ValueError("need at least 2 sample points per axis")
    total = math.prod(int(c) for c in counts)
    if total > MAX_SAMPLES:
        raise TooManySamples(f"{total} samples requested, limit is {MAX_SAMPLES}")
    axes = [np.linspace(lo, hi, int(c)) for lo, hi, c in zip(box.lower, box.upper, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def sample_set(box: Box, points_per_axis, special_points=None,
               random_points: int = 0, seed: int = 0) -> np.ndarray:
    """Tensor grid plus forced points plus seeded uniform draws, sorted
    lexicographically with duplicates removed."""
    parts = [tensor_samples(box, points_per_axis)]
    if special_points is not None:
        sp = np.asarray(special_points, dtype=float).reshape(-1, box.dim)
        inside = np.all((sp >= np.array(box.lower)) & (sp <= np.array(box.upper)), axis=1)
        parts.append(sp[inside])
    if random_points:
        rng = np.random.default_rng(seed)
        parts.append(rng.uniform(box.lower, box.upper, size=(random_points, box.dim)))
    pts = np.concatenate(parts)
    if len(pts) > MAX_SAMPLES:
        raise TooManySamples(f"{len(pts)} samples requested, limit is {MAX_SAMPLES}")
    return np.unique(pts, axis=0)


def error_on(f, p, points, bound: float | None = None) -> ErrorReport:
    """Max ``|f - p|`` over an explicit point set.  Ties resolve to the
    first point, so pass points in lexicographic order for determinism."""
    pts = np.asarray(points, dtype=float)
    err = np.abs(as_batch(f)(pts) - p.evaluate(pts)[0])
    k = int(np.argmax(err))
    worst = float(err[k])
    ok = True if bound is None else bool(worst <= bound)
    return ErrorReport(worst, tuple(float(v) for v in pts[k]), len(pts), bound, ok)


def sup_error(f, p, box, points_per_axis=2001, special_points=None,
              random_points: int = 0, seed: int = 0,
              bound: float | None = None) -> ErrorReport:
    """Sampled sup-norm error of model ``p`` (a PwcFunction or SumForm)."""
    box = _as_box(box)
    pts = sample_set(box, points_per_axis, special_points, random_points, seed)
    return error_on(f, p, pts, bound)


def grid_special_points(grid: UniGrid) -> np.ndarray:
    return np.concatenate([grid.nodes(), grid.midpoints()])[:, None]


def univariate_error(f, pwc: PwcFunction, grid: UniGrid, per_subinterval: int = 20,
                     min_points: int = 0, random_points: int = 0, seed: int = 0,
                     bound: float | None = None) -> ErrorReport:
    """:func:`sup_error` for a univariate build, sampling at least
    ``per_subinterval`` points per subinterval and always including every
    node and midpoint."""
    count = max(per_subinterval * grid.n_p + 1, min_points, 2)
    return sup_error(f, pwc, Box((grid.lower,), (grid.upper,)), count,
                     grid_special_points(grid), random_points, seed, bound)


def sawtooth_value(v_mid, center, kappa, x):
    """Cone ``v_mid - kappa * |x - center|`` below any kappa-Lipschitz
    function through ``(center, v_mid)``."""
    return v_mid - kappa * np.abs(np.asarray(x, dtype=float) - center)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    value: float  # worst observed statistic
    limit: float  # pass iff value <= limit (P1: strictly below)
    witness: tuple[float, ...] | None = None
    piece: int | None = None

    @property
    def margin(self) -> float:
        return self.limit - self.value

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: worst {self.value:.6g} (limit {self.limit:.6g})"
        if not self.passed and self.witness is not None:
            text += f" witness x={self.witness[0]!r}"
            if self.piece is not None:
                text += f" piece {self.piece}"
        return text


@dataclass(frozen=True)
class PropertyReport:
    results: tuple[PropertyResult, ...]
    samples_used: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> PropertyResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [r.line() for r in self.results]

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "samples_used": self.samples_used,
            "properties": [
                {
                    "name": r.name,
                    "pass": r.passed,
                    "value": r.value,
                    "limit": r.limit,
                    "witness": list(r.witness) if r.witness is not None else None,
                    "piece": r.piece,
                }
                for r in self.results
            ],
        }


def check_properties(f, p: PwcFunction, grid: UniGrid, kappa: float,
                     samples_per_unit: int = 10_000, tol: float = 1e-9,
                     slope_tol: float = 1e-6) -> PropertyReport:
    """Check the structural guarantees of a univariate max-of-parabolas build.

    * ``P1 concavity``: every curvature equals ``-2 kappa / delta`` < 0.
    * ``P2 underestimation``: piece ``i`` is below ``f`` outside its open
      subinterval.
    * ``P3 midpoint exactness``: the full max equals ``f`` at every midpoint.
    * ``P4 locality``: piece ``i`` only wins within half a cell of its
      subinterval (this also covers the first and last piece).
    * ``slope``: adjacent-sample slopes of ``p`` stay below ``4 kappa``.
    """
    if p.dim != 1:
        raise ValueError("property checks need a univariate model")
    if p.n_pieces != grid.n_p:
        raise ValueError(f"model has {p.n_pieces} pieces but the grid has {grid.n_p} subintervals")
    if p.domain != Box((grid.lower,), (grid.upper,)):
        raise ValueError(f"model domain {p.domain} does not match grid [{grid.lower}, {grid.upper}]")
    evaluate = as_batch(f)
    delta = grid.delta
    nodes = grid.nodes()
    left, right = nodes[:-1], nodes[1:]
    mids = grid.midpoints()

    results = []

    D = p.D[:, 0]
    expected = -2.0 * kappa / delta
    # worst offender: a non-negative curvature first, else the largest deviation
    if np.max(D) >= 0:
        i1 = int(np.argmax(D))
    else:
        i1 = int(np.argmax(np.abs(D - expected)))
    bad = bool(D[i1] >= 0 or abs(D[i1] - expected) > 1e-9 * abs(expected))
    results.append(PropertyResult(
        "P1 concavity", not bad, float(np.max(D)), 0.0,
        (float(mids[i1]),) if bad else None, i1 if bad else None,
    ))

    n_uniform = max(1, math.ceil(samples_per_unit * (grid.upper - grid.lower))) + 1
    uniform = np.linspace(grid.lower, grid.upper, n_uniform)
    x = np.unique(np.concatenate([uniform, nodes, mids]))
    fx = evaluate(x[:, None])

    p2_val, p2_x, p2_i = -np.inf, None, None
    p4_val, p4_x, p4_i = -np.inf, None, None
    px = np.empty_like(x)
    for s, V in p.iter_piece_values(x):
        xs = x[s:s + len(V)]
        diff = V - fx[s:s + len(V), None]
        outside = (xs[:, None] <= left[None, :]) | (xs[:, None] >= right[None, :])
        diff = np.where(outside, diff, -np.inf)
        k = int(np.argmax(diff))
        r, c = divmod(k, diff.shape[1])
        if diff[r, c] > p2_val:
            p2_val, p2_x, p2_i = float(diff[r, c]), float(xs[r]), c
        w = np.argmax(V, axis=1)
        px[s:s + len(V)] = V[np.arange(len(w)), w]
        excess = np.maximum((left[w] - 0.5 * delta) - xs, xs - (right[w] + 0.5 * delta))
        r = int(np.argmax(excess))
        if excess[r] > p4_val:
            p4_val, p4_x, p4_i = float(excess[r]), float(xs[r]), int(w[r])

    ok2 = p2_val <= tol
    results.append(PropertyResult("P2 underestimation", ok2, p2_val, tol,
                                  (p2_x,), p2_i))

    pm, wm = p.evaluate(mids)
    mid_err = np.abs(pm - evaluate(mids[:, None]))
    k = int(np.argmax(mid_err))
    ok3 = bool(mid_err[k] <= tol)
    results.append(PropertyResult("P3 midpoint exactness", ok3, float(mid_err[k]), tol,
                                  (float(mids[k]),), int(wm[k])))

    ok4 = p4_val <= tol
    results.append(PropertyResult("P4 locality", ok4, p4_val, tol, (p4_x,), p4_i))

    pu = p.evaluate(uniform)[0]
    slopes = np.abs(np.diff(pu)) / np.diff(uniform)
    k = int(np.argmax(slopes))
    limit = 4.0 * kappa + slope_tol
    results.append(PropertyResult("slope bound", bool(slopes[k] <= limit), float(slopes[k]),
                                  limit, (float(uniform[k]),), None))

    return PropertyReport(tuple(results), len(x))


@dataclass(frozen=True)
class StudyRow:
    delta: float
    n_p: int
    max_error: float
    bound: float
    ratio: float

    def as_tuple(self):
        return (self.delta, self.n_p, self.max_error, self.bound, self.ratio)


def convergence_study(f, lower: float, upper: float, kappa: float,
                      deltas: Sequence[float], per_subinterval: int = 20,
                      min_points: int = 100_000) -> list[StudyRow]:
    """Build and measure one model per requested spacing.

    ``delta`` and ``bound = 2.5 kappa delta`` refer to the requested
    spacing; the builder may shrink it to divide the interval, which only
    lowers the error.
    """
    rows = []
    for delta in deltas:
        delta = float(delta)
        if not delta > 0:
            raise ValueError(f"spacing must be positive, got {delta}")
        grid = grid_from_delta(lower, upper, delta)
        pwc = build_on_grid(f, grid, kappa)
        report = univariate_error(f, pwc, grid, per_subinterval, min_points)
        bound = 2.5 * kappa * delta
        rows.append(StudyRow(delta, grid.n_p, report.max_abs_error, bound,
                             report.max_abs_error / bound))
    return rows


def write_study_csv(rows: Sequence[StudyRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(STUDY_HEADER)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.as_tuple()])
