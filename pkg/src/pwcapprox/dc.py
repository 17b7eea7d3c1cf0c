"""Approximation of C2 functions through a difference-of-convex split.

``f = f_cvx + f_ccv`` with ``f_cvx = f + mu ||x||^2`` and
``f_ccv = -mu ||x||^2``.  Once ``mu`` is large enough for ``f_cvx`` to be
convex, the maximum of its tangent planes on a grid approximates it from
below, and adding ``f_ccv`` back to every plane gives concave pieces

    -mu ||x||^2 + a_i . x + b_i.

The ``mu`` estimate below samples finite-difference Hessians.  It is a
heuristic: nothing guarantees the sampled minimum eigenvalue is the true one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import sup_error
from .core import Box, PwcFunction, pwc_from_arrays
from .expr import DEFAULT_GRAD_STEP, DEFAULT_HESS_STEP, as_batch, gradient_fd_many, hessian_fd_many

MAX_DIM = 6
MAX_PLANES = 10**6


class TooManyPlanes(ValueError):
    pass


@dataclass(frozen=True)
class DcParams:
    mu: float
    grid_per_axis: int
    h_grad: float = DEFAULT_GRAD_STEP
    h_hess: float = DEFAULT_HESS_STEP

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mu must be non-negative, got {self.mu}")
        if self.grid_per_axis < 2:
            raise ValueError("grid_per_axis must be at least 2")


@dataclass(frozen=True)
class TangentPlane:
    a: tuple[float, ...]
    b: float


def min_eigenvalue(H, tol: float = 1e-12, max_sweeps: int = 100) -> float:
    """Smallest eigenvalue of a small symmetric matrix by cyclic Jacobi
    rotations, iterated until the off-diagonal norm is below
    ``tol * ||H||_F``."""
    A = np.array(H, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    scale = np.linalg.norm(A)
    if scale == 0:
        return 0.0
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(A * A) - np.sum(np.diag(A) ** 2)))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(A[p, q])
                if abs(apq) <= 1e-20 * scale:
                    continue
                theta = (float(A[q, q]) - float(A[p, p])) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
    return float(np.min(np.diag(A)))


def _check_dim(box: Box):
    if box.dim > MAX_DIM:
        raise ValueError(f"dimension {box.dim} exceeds the tensor-grid limit {MAX_DIM}")


def mu_sample_points(box: Box, samples: int) -> np.ndarray:
    """Uniform grid with ``samples`` points per axis plus all cell centres."""
    axes = [np.linspace(lo, hi, samples) for lo, hi in zip(box.lower, box.upper)]
    centres = [0.5 * (ax[:-1] + ax[1:]) for ax in axes]
    grids = [np.stack([g.reshape(-1) for g in np.meshgrid(*a, indexing="ij")], axis=1)
             for a in (axes, centres)]
    return np.concatenate(grids)


def sampled_min_eigenvalue(f, box: Box, samples: int = 9,
                           h: float = DEFAULT_HESS_STEP) -> float:
    _check_dim(box)
    if samples < 2:
        raise ValueError("need at least 2 samples per axis")
    pts = mu_sample_points(box, samples)
    hessians = hessian_fd_many(f, pts, h)
    return min(min_eigenvalue(H) for H in hessians)


def estimate_mu(f, box: Box, samples: int = 9, safety: float = 1.1,
                h: float = DEFAULT_HESS_STEP) -> float:
    """Shift ``mu = safety * max(0, -lambda_min / 2)`` making ``f + mu ||x||^2``
    convex at every sampled point, since its Hessian is ``H + 2 mu I``."""
    if safety < 1:
        raise ValueError("safety factor must be >= 1")
    lam = sampled_min_eigenvalue(f, box, samples, h)
    return safety * max(0.0, -lam / 2.0)


def convex_part(f, mu: float):
    """Vectorized ``f(x) + mu * ||x||^2``."""
    evaluate = as_batch(f)

    def f_cvx(points):
        X = np.asarray(points, dtype=float)
        sq = np.zeros(X.shape[0])
        for j in range(X.shape[1]):
            sq = sq + X[:, j] * X[:, j]
        return evaluate(X) + mu * sq

    return f_cvx


def concave_part(mu: float):
    def f_ccv(points):
        X = np.asarray(points, dtype=float)
        sq = np.zeros(X.shape[0])
        for j in range(X.shape[1]):
            sq = sq + X[:, j] * X[:, j]
        return -mu * sq

    return f_ccv


def grid_nodes(box: Box, grid_per_axis: int) -> np.ndarray:
    """Uniform tensor grid including the corners, first axis slowest."""
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def _plane_arrays(f, mu, box, grid_per_axis, h_grad):
    _check_dim(box)
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    count = grid_per_axis ** box.dim
    if count > MAX_PLANES:
        raise TooManyPlanes(f"{grid_per_axis}^{box.dim} = {count} planes, limit is {MAX_PLANES}")
    nodes = grid_nodes(box, grid_per_axis)
    f_cvx = convex_part(f, mu)
    A = gradient_fd_many(f_cvx, nodes, h_grad)
    B = f_cvx(nodes) - np.sum(A * nodes, axis=1)
    return A, B


def build_tangent_planes(f, mu: float, box: Box, grid_per_axis: int,
                         h_grad: float = DEFAULT_GRAD_STEP) -> list[TangentPlane]:
    A, B = _plane_arrays(f, mu, box, grid_per_axis, h_grad)
    return [TangentPlane(tuple(float(v) for v in a), float(b)) for a, b in zip(A, B)]


@dataclass(frozen=True)
class DcModel:
    pwc: PwcFunction
    mu: float
    grid_per_axis: int
    mu_heuristic: bool
    achieved_error: float | None = None
    target_eps: float | None = None

    @property
    def meta(self) -> dict:
        meta = {
            "builder": "dc",
            "mu": self.mu,
            "mu_heuristic": self.mu_heuristic,
            "grid_per_axis": self.grid_per_axis,
            "achieved_error": self.achieved_error,
        }
        if self.target_eps is not None:
            meta["target_eps"] = self.target_eps
        return meta


def build_c2(f, box: Box, mu: float, grid_per_axis: int,
             h_grad: float = DEFAULT_GRAD_STEP) -> PwcFunction:
    """Pieces ``-mu ||x||^2 + a_i . x + b_i`` from the tangent planes of
    ``f + mu ||x||^2`` at the grid nodes."""
    DcParams(mu, grid_per_axis, h_grad)
    A, B = _plane_arrays(f, mu, box, grid_per_axis, h_grad)
    D = np.full_like(A, -float(mu))
    return pwc_from_arrays(D, A, B, box)


def dc_error(f, pwc: PwcFunction, box: Box, grid_per_axis: int, cell_density: int = 10,
             max_points_per_axis: int | None = None):
    """Sampled error with ``cell_density`` points per grid cell along each
    axis, grid nodes included."""
    per_axis = cell_density * (grid_per_axis - 1) + 1
    if max_points_per_axis is not None:
        per_axis = min(per_axis, max_points_per_axis)
    return sup_error(f, pwc, box, per_axis, special_points=grid_nodes(box, grid_per_axis))


def build_c2_to_tolerance(f, box: Box, mu: float, eps: float, start: int = 2,
                          cell_density: int = 10, max_points_per_axis: int = 2001,
                          h_grad: float = DEFAULT_GRAD_STEP):
    """Smallest grid (by doubling then bisection) whose sampled error is at
    most ``eps``.  Returns ``(pwc, grid_per_axis, report)``; if the plane
    limit is hit first, the finest admissible grid is returned."""
    limit = int(math.floor(MAX_PLANES ** (1.0 / box.dim) + 1e-9))
    cache = {}

    def attempt(g):
        if g not in cache:
            pwc = build_c2(f, box, mu, g, h_grad)
            cache[g] = (pwc, dc_error(f, pwc, box, g, cell_density, max_points_per_axis))
        return cache[g]

    lo, hi = None, max(2, start)
    while attempt(hi)[1].max_abs_error > eps:
        if hi >= limit:
            pwc, report = attempt(hi)
            return pwc, hi, report
        lo, hi = hi, min(2 * hi, limit)
    while lo is not None and hi - lo > 1:
        mid = (lo + hi) // 2
        if attempt(mid)[1].max_abs_error <= eps:
            hi = mid
        else:
            lo = mid
    pwc, report = attempt(hi)
    return pwc, hi, report
