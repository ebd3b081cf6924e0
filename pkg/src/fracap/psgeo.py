"""Geometry of the s-parabolic metric on R^{n+1}.

A space-time point is written (x, t) with x in R^n and t in R. For an
anisotropy exponent s in (1/2, 1] the distance between (x, t) and (y, tau) is

    max( |x - y|, |t - tau|^(1/(2s)) ),

so time scales like (space)^{2s}; s = 1 is the classical parabolic case.
Alongside the max-form distance there is an ellipsoidal norm: the unique
rho > 0 solving

    sum_j x_j^2 / rho^2 + t^2 / rho^(4s) = 1.

Both are provided (`ps_dist` and `ps_norm`) and are comparable within
[1, sqrt(n+1)]; they are never silently substituted for one another.

Cubes here are axis-aligned products of n spatial intervals of length l
with a time interval of length l^(2s). Balls are metric balls of the
max-form distance; note such a ball is a Euclidean spatial ball of radius
r crossed with a time interval of length 2 r^(2s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DimensionMismatchError

__all__ = [
    "PsPoint",
    "PsCube",
    "PsBall",
    "ps_dist",
    "ps_norm",
    "dilate",
    "cube_scale",
    "cube_diam",
    "dyadic_cubes",
    "bounding_cube",
    "hausdorff_content_upper",
    "points_to_arrays",
    "ps_dist_arrays",
]

_S_LO, _S_HI = 0.5, 1.0


def _check_s(s: float) -> None:
    if not (_S_LO < s <= _S_HI):
        raise ValueError(f"anisotropy exponent must satisfy 1/2 < s <= 1, got s={s}")


@dataclass(frozen=True, eq=False)
class PsPoint:
    """Space-time point (x, t), x of length n >= 1. Immutable."""

    x: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        if x.ndim != 1 or x.size < 1:
            raise ValueError("spatial coordinate must be a vector of length >= 1")
        if not (np.all(np.isfinite(x)) and math.isfinite(float(self.t))):
            raise ValueError("coordinates must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.x.size

    def coords(self) -> np.ndarray:
        """All n+1 coordinates, time last."""
        return np.append(self.x, self.t)

    def __repr__(self):  # compact, round-trippable enough for logs
        return f"PsPoint(x={self.x.tolist()}, t={self.t!r})"


def _as_point(p, n: int | None = None) -> PsPoint:
    if not isinstance(p, PsPoint):
        p = PsPoint(np.asarray(p[:-1], dtype=float), float(p[-1]))
    if n is not None and p.n != n:
        raise DimensionMismatchError(expected=n, got=p.n)
    return p


@dataclass(frozen=True, eq=False)
class PsCube:
    """Axis-aligned s-parabolic cube: spatial side `side`, time side `side^(2s)`.

    `corner` is the minimum corner. Membership is half-open on every axis,
    [min, min + extent), which makes dyadic partitions exact.
    """

    corner: PsPoint
    side: float
    s: float

    def __post_init__(self):
        object.__setattr__(self, "side", float(self.side))
        object.__setattr__(self, "s", float(self.s))
        if self.side <= 0:
            raise ValueError(f"cube side must be positive, got {self.side}")
        _check_s(self.s)

    @property
    def n(self) -> int:
        return self.corner.n

    @property
    def time_side(self) -> float:
        return self.side ** (2.0 * self.s)

    @property
    def center(self) -> PsPoint:
        return PsPoint(self.corner.x + 0.5 * self.side,
                       self.corner.t + 0.5 * self.time_side)

    def contains(self, p: PsPoint | tuple, closed: bool = False) -> bool:
        p = _as_point(p, self.n)
        lo_x, hi_x = self.corner.x, self.corner.x + self.side
        lo_t, hi_t = self.corner.t, self.corner.t + self.time_side
        if closed:
            return bool(np.all(p.x >= lo_x) and np.all(p.x <= hi_x)
                        and lo_t <= p.t <= hi_t)
        return bool(np.all(p.x >= lo_x) and np.all(p.x < hi_x)
                    and lo_t <= p.t < hi_t)

    def contains_arrays(self, X: np.ndarray, T: np.ndarray,
                        closed: bool = False) -> np.ndarray:
        """Vectorized membership for X of shape (N, n), T of shape (N,)."""
        lo_x, hi_x = self.corner.x, self.corner.x + self.side
        lo_t, hi_t = self.corner.t, self.corner.t + self.time_side
        if closed:
            m = np.all((X >= lo_x) & (X <= hi_x), axis=1)
            return m & (T >= lo_t) & (T <= hi_t)
        m = np.all((X >= lo_x) & (X < hi_x), axis=1)
        return m & (T >= lo_t) & (T < hi_t)


@dataclass(frozen=True, eq=False)
class PsBall:
    """Metric ball of `ps_dist`: {y : ps_dist(center, y) <= radius}."""

    center: PsPoint
    radius: float
    s: float

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "s", float(self.s))
        if self.radius <= 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        _check_s(self.s)

    @property
    def n(self) -> int:
        return self.center.n

    def contains(self, p: PsPoint | tuple) -> bool:
        p = _as_point(p, self.n)
        return ps_dist(self.center, p, self.s) <= self.radius

    def contains_arrays(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        d = ps_dist_arrays(X, T, self.center.x, self.center.t, self.s)
        return d <= self.radius


def ps_dist(a: PsPoint | tuple, b: PsPoint | tuple, s: float) -> float:
    """max(|x - y|, |t - tau|^(1/(2s))). A genuine metric for s in (1/2, 1]."""
    _check_s(s)
    a = _as_point(a)
    b = _as_point(b, a.n)
    sp = float(np.linalg.norm(a.x - b.x))
    tm = abs(a.t - b.t) ** (1.0 / (2.0 * s))
    return max(sp, tm)


def ps_dist_arrays(X: np.ndarray, T: np.ndarray, x0: np.ndarray, t0: float,
                   s: float) -> np.ndarray:
    """ps_dist from (x0, t0) to each row of (X, T); X shape (N, n)."""
    sp = np.linalg.norm(X - np.asarray(x0, dtype=float), axis=1)
    tm = np.abs(T - t0) ** (1.0 / (2.0 * s))
    return np.maximum(sp, tm)


def ps_norm(a: PsPoint | tuple, s: float, tol: float = 1e-12) -> float:
    """Ellipsoidal s-parabolic norm: the unique rho > 0 with
    |x|^2/rho^2 + t^2/rho^(4s) = 1.

    The left side is strictly decreasing in rho, so the root is found by
    bisection on a guaranteed bracket followed by Newton polishing. Returns 0
    for the origin by convention. `tol` bounds the residual of the defining
    equation at the returned root.
    """
    _check_s(s)
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _as_point(a)
    sp = float(np.linalg.norm(a.x))
    tt = abs(a.t)
    if sp == 0.0 and tt == 0.0:
        return 0.0
    # Axis cases are exact.
    if tt == 0.0:
        return sp
    if sp == 0.0:
        return tt ** (1.0 / (2.0 * s))

    # Normalize by the max form: the scaled root lies in [1, sqrt(n+1)].
    sigma = max(sp, tt ** (1.0 / (2.0 * s)))
    a2 = (sp / sigma) ** 2
    b2 = (tt / sigma ** (2.0 * s)) ** 2
    four_s = 4.0 * s

    def f(u):
        return a2 / u ** 2 + b2 / u ** four_s - 1.0

    lo, hi = 1.0, math.sqrt(a.n + 1.0)
    if f(lo) <= 0.0:       # root exactly at the max form (other term 0)
        return sigma * lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    u = 0.5 * (lo + hi)
    for _ in range(100):
        fu = f(u)
        if abs(fu) <= tol:
            return sigma * u
        df = -2.0 * a2 / u ** 3 - four_s * b2 / u ** (four_s + 1.0)
        step = fu / df
        u_new = u - step
        if not (lo <= u_new <= hi):   # keep the bracket; fall back to bisection
            u_new = 0.5 * (lo + hi)
        if f(u_new) > 0.0:
            lo = u_new
        else:
            hi = u_new
        u = u_new
    raise ConvergenceError("ps_norm root-finding did not reach residual "
                           f"{tol:g} (last residual {abs(f(u)):g})")


def dilate(a: PsPoint | tuple, lam: float, s: float) -> PsPoint:
    """Parabolic dilation (x, t) -> (lam x, lam^(2s) t)."""
    _check_s(s)
    if lam <= 0:
        raise ValueError("dilation factor must be positive")
    a = _as_point(a)
    return PsPoint(lam * a.x, lam ** (2.0 * s) * a.t)


def cube_scale(q: PsCube, lam: float) -> PsCube:
    """Concentric cube of side lam * side; the center is preserved exactly."""
    if lam <= 0:
        raise ValueError("scale factor must be positive")
    c = q.center
    new_side = lam * q.side
    new_tside = new_side ** (2.0 * q.s)
    corner = PsPoint(c.x - 0.5 * new_side, c.t - 0.5 * new_tside)
    return PsCube(corner, new_side, q.s)


def cube_diam(q: PsCube) -> float:
    """ps-diameter of an s-parabolic cube of side l: exactly l*sqrt(n).

    The spatial diagonal is l*sqrt(n) and the time extent contributes
    (l^(2s))^(1/(2s)) = l <= l*sqrt(n) for n >= 1.
    """
    return q.side * math.sqrt(q.n)


def dyadic_cubes(level: int, bounding: PsCube) -> list[PsCube]:
    """Dyadic partition of `bounding` at the given level.

    Returns 2^(level*n) spatial cells times ceil(2^(level*2s)) time slabs of
    side l/2^level. Slabs stack from the bottom time face, so the last slab
    may overshoot the top time face (the time-side ratio 2^(level*2s) is not
    an integer in general).
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        return [bounding]
    n = bounding.n
    h = bounding.side / 2 ** level
    ht = h ** (2.0 * bounding.s)
    # Guard against float dust in 2^(level*2s) landing just above an integer.
    nt = math.ceil(2.0 ** (level * 2.0 * bounding.s) * (1.0 - 1e-12))
    c0 = bounding.corner
    out = []
    for idx in np.ndindex(*([2 ** level] * n)):
        x = c0.x + h * np.asarray(idx, dtype=float)
        for j in range(nt):
            out.append(PsCube(PsPoint(x, c0.t + j * ht), h, bounding.s))
    return out


def bounding_cube(points, s: float, pad: float = 1e-9) -> PsCube:
    """Smallest s-parabolic cube (up to relative padding) containing the points.

    The side is inflated by `pad` relative so every point is interior to the
    half-open cube. A degenerate point set (zero extent) gets side 1.
    """
    _check_s(s)
    X, T = points_to_arrays(points)
    xmin = X.min(axis=0)
    tmin = float(T.min())
    ext_x = float((X.max(axis=0) - xmin).max()) if X.size else 0.0
    ext_t = float(T.max() - tmin)
    side = max(ext_x, ext_t ** (1.0 / (2.0 * s)))
    if side == 0.0:
        side = 1.0
    side *= 1.0 + pad
    return PsCube(PsPoint(xmin, tmin), side, s)


def points_to_arrays(points) -> tuple[np.ndarray, np.ndarray]:
    """(X, T) arrays from a list of PsPoint (or an (X, T) pair passed through)."""
    if isinstance(points, tuple) and len(points) == 2:
        X, T = points
        return np.asarray(X, dtype=float), np.asarray(T, dtype=float)
    pts = [_as_point(p) for p in points]
    if not pts:
        raise ValueError("empty point list")
    n = pts[0].n
    for p in pts:
        if p.n != n:
            raise DimensionMismatchError(expected=n, got=p.n)
    X = np.array([p.x for p in pts], dtype=float)
    T = np.array([p.t for p in pts], dtype=float)
    return X, T


def hausdorff_content_upper(points, d: float, s: float, max_level: int) -> float:
    """Greedy dyadic-cover upper bound for the s-parabolic Hausdorff content.

    For each level 0..max_level, covers the point set by the occupied dyadic
    cells of its bounding cube and sums diam^d over them; returns the minimum
    over levels. Monotone nonincreasing in max_level.
    """
    if d <= 0:
        raise ValueError("content exponent d must be positive")
    if max_level < 0:
        raise ValueError("max_level must be >= 0")
    X, T = points_to_arrays(points)
    if X.shape[0] == 0:
        raise ValueError("empty point list")
    root = bounding_cube((X, T), s)
    n = X.shape[1]
    best = math.inf
    for level in range(max_level + 1):
        h = root.side / 2 ** level
        ht = h ** (2.0 * s)
        ix = np.floor((X - root.corner.x) / h).astype(np.int64)
        it = np.floor((T - root.corner.t) / ht).astype(np.int64)
        # Points are interior to the padded root; clamp only defends roundoff.
        np.clip(ix, 0, 2 ** level - 1, out=ix)
        keys = np.unique(np.concatenate([ix, it[:, None]], axis=1), axis=0)
        occupied = keys.shape[0]
        best = min(best, occupied * (h * math.sqrt(n)) ** d)
    return best
