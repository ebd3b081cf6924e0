"""Self-similar space-time Cantor constructions with positive gaps.

Starting from the unit cube [0,1]^n x [0,1], each generation splits every
cube into (delta+1) * delta^n children: delta contracted intervals per
spatial axis and delta+1 along time. A level with contraction ratio
lambda places spatial children of side lambda * parent at fractional
starts (j-1)(lambda + g), j = 1..delta, with gap fraction
g = (1 - delta*lambda)/(delta - 1), and temporal children of extent
lambda^(2s) * parent at starts (j-1)(lambda^(2s) + g~), j = 1..delta+1,
with g~ = (1 - (delta+1)*lambda^(2s))/delta. Both gaps must be positive
(admissibility); delta must satisfy delta + 1 < delta^(2s), which makes
the temporal gap automatic for any admissible lambda and is the
non-self-intersection condition behind the child count.

The critical ratio lambda = ((delta+1) delta^n)^(-1/(n+1)) makes
(child count)^k * side^(n+1) identically 1: the construction then sits at
the dimension where degree-(n+1) growth is tight, which is the regime all
the capacity and blow-up experiments probe.

Cube corners are produced by accumulating the affine maps level by level
(child corner = parent corner + fraction * parent extent) rather than
re-deriving absolute coordinates from powers, so coordinates at depth 8
agree with the exact rationals to a few ulps and nesting is exact by
construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AdmissibilityError, DimensionMismatchError
from .measures import DiscreteMeasure
from .psgeo import PsCube, PsPoint

__all__ = [
    "CantorSpec",
    "CantorCube",
    "nonself_delta",
    "critical_lambda",
    "critical_spec",
    "count",
    "criticality_defect",
    "generation",
    "generation_corners",
    "natural_measure",
    "locate",
    "upper_corner_chain",
    "upper_corner",
]

_DELTA_CAP = 10 ** 6


def nonself_delta(s: float) -> int:
    """Smallest integer delta >= 2 with delta + 1 < delta^(2s), strictly.

    Exists for every s in (1/2, 1] (the required delta grows without bound
    as s -> 1/2); a cap guards against pathological inputs.
    """
    if not (0.5 < s <= 1.0):
        raise ValueError(f"anisotropy exponent out of range: s={s}")
    delta = 2
    while delta ** (2.0 * s) <= delta + 1:
        delta += 1
        if delta > _DELTA_CAP:
            raise ValueError(f"no admissible delta below {_DELTA_CAP} for s={s}")
    return delta


def critical_lambda(n: int, delta: int) -> float:
    """Contraction ratio ((delta+1) delta^n)^(-1/(n+1)) pinning generation
    count times side^(n+1) at 1. Always admissible: the child count exceeds
    delta^(n+1), so the ratio is below 1/delta."""
    if n < 1 or delta < 2:
        raise ValueError("need n >= 1 and delta >= 2")
    return float(((delta + 1) * delta ** n)) ** (-1.0 / (n + 1))


@dataclass(frozen=True)
class CantorSpec:
    """Parameters of the construction; one contraction ratio per level.

    `lambdas[k-1]` is the ratio used when refining generation k-1 into
    generation k; `depth` is the deepest generation available and must
    equal len(lambdas).
    """

    n: int
    s: float
    delta: int
    lambdas: tuple[float, ...]
    depth: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("spatial dimension n must be >= 1")
        if not (0.5 < self.s <= 1.0):
            raise ValueError(f"anisotropy exponent out of range: s={self.s}")
        if self.delta < 2:
            raise ValueError("delta must be an integer >= 2")
        if self.depth < 0 or len(self.lambdas) != self.depth:
            raise ValueError("depth must be >= 0 and match len(lambdas)")
        if self.delta + 1 >= self.delta ** (2.0 * self.s):
            raise AdmissibilityError(
                f"delta={self.delta} violates delta+1 < delta^(2s) at "
                f"s={self.s}: children would overlap in time")
        lams = tuple(float(v) for v in self.lambdas)
        object.__setattr__(self, "lambdas", lams)
        for level, lam in enumerate(lams, start=1):
            if not (0.0 < lam < 1.0):
                raise AdmissibilityError(f"level {level}: lambda={lam} "
                                         "outside (0, 1)")
            if self.spatial_gap(level) <= 0.0:
                raise AdmissibilityError(
                    f"level {level}: lambda={lam} >= 1/delta leaves no "
                    "spatial gap")
            if self.time_gap(level) <= 0.0:
                raise AdmissibilityError(
                    f"level {level}: lambda^(2s)={lam ** (2 * self.s)} >= "
                    "1/(delta+1) leaves no temporal gap")

    @property
    def branching(self) -> int:
        """Children per cube: (delta+1) * delta^n."""
        return (self.delta + 1) * self.delta ** self.n

    def ell(self, k: int) -> float:
        """Side of a generation-k cube: the running product of the ratios,
        accumulated left to right (the same order generation() multiplies
        in, so sides compare exactly equal)."""
        self._check_generation(k)
        side = 1.0
        for lam in self.lambdas[:k]:
            side *= lam
        return side

    def spatial_gap(self, level: int) -> float:
        lam = self.lambdas[level - 1]
        return (1.0 - self.delta * lam) / (self.delta - 1)

    def time_gap(self, level: int) -> float:
        lam = self.lambdas[level - 1]
        return (1.0 - (self.delta + 1) * lam ** (2.0 * self.s)) / self.delta

    def separation(self, level: int) -> float:
        """Sibling ps-separation at `level` as a fraction of the parent
        side: min of the spatial gap and the temporal gap^(1/(2s))."""
        return min(self.spatial_gap(level),
                   self.time_gap(level) ** (1.0 / (2.0 * self.s)))

    def spatial_starts(self, level: int) -> np.ndarray:
        """Fractional start of each spatial child within its parent."""
        lam = self.lambdas[level - 1]
        return np.arange(self.delta) * (lam + self.spatial_gap(level))

    def time_starts(self, level: int) -> np.ndarray:
        """Fractional start of each temporal child within the parent's
        time extent."""
        lam = self.lambdas[level - 1]
        return np.arange(self.delta + 1) * (lam ** (2.0 * self.s)
                                            + self.time_gap(level))

    def _check_generation(self, k: int) -> None:
        if not (0 <= k <= self.depth):
            raise ValueError(f"generation {k} outside [0, depth={self.depth}]")


def critical_spec(n: int, s: float, depth: int,
                  delta: int | None = None) -> CantorSpec:
    """Spec with every level at the critical ratio for delta = delta(s)."""
    if delta is None:
        delta = nonself_delta(s)
    lam = critical_lambda(n, delta)
    return CantorSpec(n=n, s=s, delta=delta, lambdas=(lam,) * depth,
                      depth=depth)


def count(spec: CantorSpec, k: int) -> int:
    """Exact number of generation-k cubes: branching^k."""
    spec._check_generation(k)
    return spec.branching ** k


def criticality_defect(spec: CantorSpec, k: int) -> Fraction:
    """Exact base-branching exponent of count(k) * ell(k)^(n+1).

    Defined for critical specs, where ell(k) = branching^(-k/(n+1)) and the
    exponent arithmetic is exact in rationals; the defect is 0 precisely
    when generation count times side^(n+1) equals 1.
    """
    spec._check_generation(k)
    lam = critical_lambda(spec.n, spec.delta)
    if any(v != lam for v in spec.lambdas[:k]):
        raise ValueError("criticality defect is defined for critical specs")
    side_exp = k * Fraction(-1, spec.n + 1)
    return Fraction(k) + (spec.n + 1) * side_exp


@dataclass(frozen=True, eq=False)
class CantorCube:
    """One generation-k cube with its 1-based lexicographic index."""

    generation: int
    index: int
    cube: PsCube


def generation(spec: CantorSpec, k: int) -> list[CantorCube]:
    """All generation-k cubes in lexicographic order.

    Within a parent, children are ordered by (spatial index along axis 1,
    ..., axis n, temporal index), temporal fastest; parents keep their own
    order, so the global order is lexicographic in the full index word.
    Sides accumulate multiplicatively and corners by affine steps; for bulk
    coordinate access at large k use generation_corners.
    """
    spec._check_generation(k)
    corners: list[tuple[np.ndarray, float]] = [(np.zeros(spec.n), 0.0)]
    side = 1.0
    for level in range(1, k + 1):
        sx = spec.spatial_starts(level) * side
        st = spec.time_starts(level) * side ** (2.0 * spec.s)
        nxt = []
        for cx, ct in corners:
            for off in itertools.product(sx, repeat=spec.n):
                x = cx + np.asarray(off)
                for ot in st:
                    nxt.append((x, ct + ot))
        corners = nxt
        side *= spec.lambdas[level - 1]
    return [CantorCube(generation=k, index=j + 1,
                       cube=PsCube(PsPoint(cx, ct), side, spec.s))
            for j, (cx, ct) in enumerate(corners)]


def generation_corners(spec: CantorSpec, k: int
                       ) -> tuple[np.ndarray, np.ndarray, float]:
    """(X, T, side): min corners of generation k in generation() order.

    Vectorized bulk path for deep generations (branching^k rows); the
    object path above stays the readable reference and the two are
    index-for-index identical.
    """
    spec._check_generation(k)
    X = np.zeros((1, spec.n))
    T = np.zeros(1)
    side = 1.0
    for level in range(1, k + 1):
        sx = spec.spatial_starts(level) * side
        st = spec.time_starts(level) * side ** (2.0 * spec.s)
        for axis in range(spec.n):
            X = np.repeat(X, spec.delta, axis=0)
            T = np.repeat(T, spec.delta)
            X[:, axis] += np.tile(sx, T.size // spec.delta)
        X = np.repeat(X, spec.delta + 1, axis=0)
        T = np.repeat(T, spec.delta + 1) + np.tile(st, T.size)
        side *= spec.lambdas[level - 1]
    return X, T, side


def natural_measure(spec: CantorSpec, k: int,
                    atom_placement: str = "center") -> DiscreteMeasure:
    """Uniform probability measure on generation k: one atom per cube.

    Every atom carries exactly float(1 / branching^k), computed as the
    exact rational before conversion so the weights carry no accumulated
    drift; the float weights then sum to 1 within an ulp per atom. Atoms
    sit at cube centers or min corners.
    """
    if atom_placement not in ("center", "min_corner"):
        raise ValueError(f"unknown atom placement {atom_placement!r}")
    X, T, side = generation_corners(spec, k)
    if atom_placement == "center":
        X = X + 0.5 * side
        T = T + 0.5 * side ** (2.0 * spec.s)
    w = float(Fraction(1, spec.branching ** k))
    return DiscreteMeasure(x=X, t=T, weights=np.full(T.size, w), s=spec.s)


def locate(spec: CantorSpec, k: int, p: PsPoint) -> CantorCube | None:
    """The generation-k cube containing p (closed cubes), or None.

    Walks down the tree: at each level the fractional coordinate within the
    parent either lands in a child interval or falls in a gap. Gaps are
    open and children closed, so membership at shared corners is
    unambiguous.
    """
    spec._check_generation(k)
    if p.n != spec.n:
        raise DimensionMismatchError(expected=spec.n, got=p.n,
                                     context="locate")
    cx = np.zeros(spec.n)
    ct = 0.0
    side = 1.0
    index = 0
    for level in range(1, k + 1):
        lam = spec.lambdas[level - 1]
        sx = spec.spatial_starts(level)
        st = spec.time_starts(level)
        rank = 0
        for axis in range(spec.n):
            rel = (p.x[axis] - cx[axis]) / side
            j = int(np.searchsorted(sx, rel, side="right")) - 1
            if j < 0 or rel > sx[j] + lam:
                return None
            cx[axis] += sx[j] * side
            rank = rank * spec.delta + j
        tside = side ** (2.0 * spec.s)
        rel = (p.t - ct) / tside
        j = int(np.searchsorted(st, rel, side="right")) - 1
        if j < 0 or rel > st[j] + lam ** (2.0 * spec.s):
            return None
        ct += st[j] * tside
        rank = rank * (spec.delta + 1) + j
        index = index * spec.branching + rank
        side *= lam
    if k == 0:
        q = PsCube(PsPoint(cx, ct), 1.0, spec.s)
        if not q.contains(p, closed=True):
            return None
    return CantorCube(generation=k, index=index + 1,
                      cube=PsCube(PsPoint(cx, ct), side, spec.s))


def upper_corner_chain(spec: CantorSpec, k: int) -> list[CantorCube]:
    """Cubes Q^0 contains Q^1 ... contains Q^k sharing the distinguished
    corner (0, ..., 0, 1): first spatial child on every axis, last temporal
    child, at every level. Built by index arithmetic, not float membership,
    so the chain is robust at the top time face where rounding could spill
    a containment test.
    """
    spec._check_generation(k)
    chain = []
    cx = np.zeros(spec.n)
    ct = 0.0
    side = 1.0
    index = 0
    chain.append(CantorCube(0, 1, PsCube(PsPoint(cx, ct), side, spec.s)))
    for level in range(1, k + 1):
        st = spec.time_starts(level)
        ct = ct + st[-1] * side ** (2.0 * spec.s)
        rank = spec.delta  # spatial children all first: rank contribution 0
        index = index * spec.branching + rank
        side *= spec.lambdas[level - 1]
        chain.append(CantorCube(level, index + 1,
                                PsCube(PsPoint(cx.copy(), ct), side, spec.s)))
    return chain


def upper_corner(spec: CantorSpec, k: int) -> PsPoint:
    """The shared corner point of the upper_corner_chain: spatial origin,
    top time face of the generation-k cube in the chain."""
    q = upper_corner_chain(spec, k)[-1].cube
    return PsPoint(q.corner.x, q.corner.t + q.time_side)
