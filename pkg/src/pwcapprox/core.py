"""Piecewise-concave functions: the pointwise maximum of concave pieces.

Every piece has the diagonal-quadratic form

    value(x) = sum_j d_j * x_j**2 + sum_j a_j * x_j + b,    d_j <= 0,

which covers univariate parabolas, isotropic ``-mu * ||x||**2 + affine``
pieces and the per-coordinate sums produced by expanding a separable model.

Coefficients built on a fine grid are large and of mixed sign (a parabola
of curvature -500 near x=3 has terms of size ~5000 that cancel to O(1)), so
pieces are evaluated in vertex form ``sum_j d_j (x_j - c_j)**2 + e`` with
``c`` and ``e`` derived once from ``(d, a, b)`` in double-double
arithmetic.  Coordinates with ``d_j == 0`` stay affine.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Upper bound on the number of (point, piece) values held in memory at once.
_CHUNK_CELLS = 1 << 21


def _as_float_tuple(values, name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))
    if not out:
        raise ValueError(f"{name} must be non-empty")
    return out


@dataclass(frozen=True)
class Box:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = _as_float_tuple(self.lower, "lower")
        hi = _as_float_tuple(self.upper, "upper")
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same length")
        for j, (l, u) in enumerate(zip(lo, hi)):
            if not (np.isfinite(l) and np.isfinite(u)):
                raise ValueError(f"bounds of coordinate {j + 1} must be finite")
            if not l < u:
                raise ValueError(f"empty box: lower[{j}]={l} is not below upper[{j}]={u}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.array(self.lower) - tol) and np.all(x <= np.array(self.upper) + tol))

    def axis(self, j: int) -> "Box":
        return Box((self.lower[j],), (self.upper[j],))


@dataclass(frozen=True)
class DiagQuadPiece:
    d: tuple[float, ...]
    a: tuple[float, ...]
    b: float

    def __post_init__(self):
        d = _as_float_tuple(self.d, "d")
        a = _as_float_tuple(self.a, "a")
        if len(d) != len(a):
            raise ValueError("d and a must have the same length")
        if any(dj > 0 for dj in d):
            raise ValueError(f"concavity violated: curvature d={d} has a positive entry")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self) -> int:
        return len(self.d)

    def __call__(self, x) -> float:
        return eval_piece(self, x)


# -- double-double helpers -------------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def vertex_form(D: np.ndarray, A: np.ndarray, B: np.ndarray):
    """Centers ``C`` and offsets ``E`` with ``d(x-c)^2`` summed plus ``E``
    equal to the piece.  Coordinates where the vertex is undefined or not
    finite get ``C = nan`` and are evaluated as ``d x^2 + a x``."""
    with np.errstate(all="ignore"):
        C = -A / (2.0 * D)
        # a^2 / (4d) as hi + lo
        sq_hi, sq_lo = _two_prod(A, A)
        den = 4.0 * D
        q_hi = sq_hi / den
        p, pe = _two_prod(q_hi, den)
        q_lo = ((sq_hi - p) - pe + sq_lo) / den
    ok = (D < 0) & np.isfinite(C) & np.isfinite(q_hi) & np.isfinite(q_lo)
    C = np.where(ok, C, np.nan)
    s_hi = B.astype(float).copy()
    s_lo = np.zeros_like(s_hi)
    for j in range(D.shape[1]):
        hi = np.where(ok[:, j], -q_hi[:, j], 0.0)
        lo = np.where(ok[:, j], -q_lo[:, j], 0.0)
        s_hi, err = _two_sum(s_hi, hi)
        s_lo = s_lo + err + lo
    E = s_hi + s_lo
    return C, E


def quad_values(D, A, C, E, X) -> np.ndarray:
    """Piece values at rows of ``X`` as an ``(m, k)`` array.

    Elementwise with a fixed operation order, so a piece evaluates to the
    same bits alone or among many.
    """
    m, n = X.shape
    out = np.empty((m, D.shape[0]))
    out[:] = E
    tmp = np.empty_like(out)
    for j in range(n):
        xj = X[:, j:j + 1]
        cj = C[:, j]
        vertex = ~np.isnan(cj)
        if vertex.all():
            np.subtract(xj, cj, out=tmp)
            np.multiply(tmp, tmp, out=tmp)
            np.multiply(tmp, D[:, j], out=tmp)
        else:
            shifted = (xj - np.where(vertex, cj, 0.0)) ** 2 * D[:, j]
            plain = D[:, j] * (xj * xj) + A[:, j] * xj
            tmp[:] = np.where(vertex, shifted, plain)
        out += tmp
    return out


class PwcFunction:
    """Pointwise maximum of a non-empty list of concave pieces over a box.

    Coefficients are held as read-only arrays ``D``, ``A`` (shape
    ``(n_pieces, dim)``) and ``B`` (shape ``(n_pieces,)``).
    """

    def __init__(self, pieces, domain: Box):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("a piecewise-concave function needs at least one piece")
        for i, p in enumerate(pieces):
            if p.dim != domain.dim:
                raise ValueError(f"piece {i} has dimension {p.dim}, domain has {domain.dim}")
        self._init_arrays(
            np.array([p.d for p in pieces], dtype=float),
            np.array([p.a for p in pieces], dtype=float),
            np.array([p.b for p in pieces], dtype=float),
            domain,
        )
        self.__dict__["pieces"] = pieces

    @classmethod
    def from_arrays(cls, D, A, B, domain: Box) -> "PwcFunction":
        self = cls.__new__(cls)
        self._init_arrays(D, A, B, domain)
        return self

    def _init_arrays(self, D, A, B, domain):
        D = np.array(D, dtype=float, ndmin=2)
        A = np.array(A, dtype=float, ndmin=2)
        B = np.array(B, dtype=float).reshape(-1)
        k = len(B)
        if k == 0:
            raise ValueError("a piecewise-concave function needs at least one piece")
        if D.shape != (k, domain.dim) or A.shape != (k, domain.dim):
            raise ValueError(
                f"coefficient shapes {D.shape}, {A.shape}, {B.shape} do not match "
                f"{k} pieces of dimension {domain.dim}"
            )
        bad = np.argwhere(D > 0)
        if len(bad):
            i, j = bad[0]
            raise ValueError(f"concavity violated: piece {i} has d[{j}] = {D[i, j]} > 0")
        for arr in (D, A, B):
            arr.setflags(write=False)
        self.D, self.A, self.B = D, A, B
        self.domain = domain

    @cached_property
    def pieces(self) -> tuple[DiagQuadPiece, ...]:
        return tuple(DiagQuadPiece(tuple(d), tuple(a), b) for d, a, b in zip(self.D, self.A, self.B))

    @cached_property
    def _vertex(self):
        return vertex_form(self.D, self.A, self.B)

    @property
    def coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.D, self.A, self.B

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_pieces(self) -> int:
        return len(self.B)

    def __eq__(self, other):
        if not isinstance(other, PwcFunction):
            return NotImplemented
        return (
            self.domain == other.domain
            and np.array_equal(self.D, other.D)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.B, other.B)
        )

    def __repr__(self):
        return f"PwcFunction(n_pieces={self.n_pieces}, domain={self.domain})"

    def _check_points(self, points) -> np.ndarray:
        X = np.asarray(points, dtype=float)
        if X.ndim == 1 and self.dim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: function has {self.dim}, points have shape {X.shape}")
        return X

    def piece_values(self, points) -> np.ndarray:
        """All piece values, shape ``(m, n_pieces)``.  Not chunked."""
        C, E = self._vertex
        return quad_values(self.D, self.A, C, E, self._check_points(points))

    def iter_piece_values(self, points):
        """Yield ``(start, values)`` blocks of :meth:`piece_values` sized to
        bound memory."""
        X = self._check_points(points)
        C, E = self._vertex
        step = max(1, _CHUNK_CELLS // self.n_pieces)
        for s in range(0, X.shape[0], step):
            yield s, quad_values(self.D, self.A, C, E, X[s:s + step])

    def evaluate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Max value and winning piece index at each row of ``points``.

        The winner is the smallest index attaining the maximum.
        """
        X = self._check_points(points)
        m = X.shape[0]
        values = np.empty(m)
        winners = np.empty(m, dtype=np.int64)
        for s, V in self.iter_piece_values(X):
            w = np.argmax(V, axis=1)
            winners[s:s + len(w)] = w
            values[s:s + len(w)] = V[np.arange(len(w)), w]
        return values, winners

    def __call__(self, x) -> float:
        return eval_pwc(self, x)[0]


def eval_piece(piece: DiagQuadPiece, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (piece.dim,):
        raise ValueError(f"dimension mismatch: piece has {piece.dim}, point has {x.shape}")
    D = np.array([piece.d])
    A = np.array([piece.a])
    C, E = vertex_form(D, A, np.array([piece.b]))
    return float(quad_values(D, A, C, E, x[None, :])[0, 0])


def eval_pwc(f: PwcFunction, x) -> tuple[float, int]:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (f.dim,):
        raise ValueError(f"dimension mismatch: function has {f.dim}, point has {x.shape}")
    values, winners = f.evaluate(x[None, :])
    return float(values[0]), int(winners[0])


def pwc_from_arrays(D, A, B, domain: Box) -> PwcFunction:
    return PwcFunction.from_arrays(D, A, B, domain)
