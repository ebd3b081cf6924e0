"""LP-discretized positive caloric capacities.

At a fixed resolution, the positive capacity of a finite point cloud E
discretizes to a linear program over atomic weights w >= 0 placed on E:

    maximize  sum(w)
    subject to
      (a) growth rows: for each cube Q of a dyadic family over E,
          sum_{atoms in Q} w  <=  diam_ps(Q)^(n+1),
      (b) potential rows: for each point of an off-support evaluation grid
          and each kernel component, +/- (row of kernel values) . w <= bound,
      (c) the same rows for the conjugate kernel K(-.) when requested.

The vector infinity-bound is linearized componentwise (each gradient
component bounded by `bound`), which differs from the Euclidean ball by at
most sqrt(n); feasibility checks below therefore use the max over
components. Only positive measures are represented: this estimates the
positive-capacity variants, never signed distributions.

The continuum sup-norm constraint is enforced only on the finite grid.
The grid clusters near the support (offsets from atom anchors at a few
multiples of the minimum inter-atom distance) plus a coarse far-field
lattice; near-support rows are where the singular kernels bite, and they
drive the resolution trends the experiments measure.

The solver is a self-contained dense primal simplex on the slack form:
Dantzig pricing with a permanent switch to Bland's rule once the objective
stalls (anti-cycling), deterministic lowest-index tie-breaking throughout,
and row equilibration for scale robustness. Intended for desk scale
(hundreds of columns, thousands of rows); optimality is certified by the
recomputed primal/dual objective gap.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DimensionMismatchError,
    FracapError,
    SolverStallError,
    UnboundedError,
)
from .kernels import KernelSpec, kernel_component_count, kernel_values
from .psgeo import (
    PsCube,
    PsPoint,
    bounding_cube,
    cube_diam,
    cube_scale,
    hausdorff_content_upper,
    points_to_arrays,
)

__all__ = [
    "LpInstance",
    "CapacityEstimate",
    "CapacityProblem",
    "ResolutionParams",
    "assemble_capacity_problem",
    "build_lp",
    "solve_lp",
    "verify_estimate",
    "gamma_tilde_estimate",
    "gamma_half_estimate",
    "content_capacity_report",
    "write_lp_text",
]


@dataclass(frozen=True, eq=False)
class LpInstance:
    """Dense LP in slack form: maximize objective . w, rows . w <= bounds, w >= 0.

    Row bounds must be nonnegative so that w = 0 is feasible and the slack
    basis can start the simplex; every capacity assembly satisfies this by
    construction (growth bounds are diam^d > 0, potential bounds are > 0).
    """

    objective: np.ndarray
    rows: np.ndarray
    bounds: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        a = np.atleast_2d(np.asarray(self.rows, dtype=float))
        b = np.asarray(self.bounds, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("objective must be a nonempty vector")
        if a.shape != (b.size, c.size):
            raise ValueError(
                f"constraint shapes disagree: rows {a.shape}, "
                f"bounds {b.size}, objective {c.size}")
        if b.size < 1:
            raise ValueError("at least one constraint row is required")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a))
                and np.all(np.isfinite(b))):
            raise ValueError("LP entries must be finite")
        if np.any(b < 0):
            raise ValueError("negative row bound: the origin w = 0 must be feasible")
        for name, arr in (("objective", c), ("rows", a), ("bounds", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_rows(self) -> int:
        return self.bounds.size

    @property
    def n_cols(self) -> int:
        return self.objective.size


@dataclass(frozen=True, eq=False)
class CapacityEstimate:
    """Solved LP with feasibility/optimality certificates.

    `value` equals objective . optimal_weights (= total mass when the
    objective is all ones). `certificate_gap` is |primal - dual| recomputed
    from the final tableau; `feasibility_residual` is the worst relative
    constraint violation of the returned weights against the original data.
    `resolution_metadata` is (atom count, growth-cube count, eval count);
    a raw solve_lp fills (columns, rows, 0).
    """

    value: float
    optimal_weights: np.ndarray
    active_constraints: np.ndarray
    resolution_metadata: tuple[int, int, int]
    certificate_gap: float
    feasibility_residual: float
    iterations: int


def solve_lp(lp: LpInstance, tol: float = 1e-9) -> CapacityEstimate:
    """Dense primal simplex for `maximize c.w, A w <= b, w >= 0` with b >= 0.

    Deterministic: Dantzig pricing (most negative reduced cost, first index
    on ties), leaving row by minimum ratio with ties broken by the lowest
    basis variable index. If the objective makes no progress for 2(k+m)
    consecutive pivots the pricing switches permanently to Bland's rule,
    which cannot cycle. Raises UnboundedError when an entering column has
    no positive pivot entry, and SolverStallError (with a pivot trace) on
    iteration exhaustion or a failed optimality certificate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    c = lp.objective
    k, m = lp.n_rows, lp.n_cols

    # Row equilibration: rescale each row to unit max entry. Slack columns
    # and duals are rescaled implicitly; the dual objective y.b is invariant.
    row_scale = np.maximum(np.max(np.abs(lp.rows), axis=1), 1e-300)
    a = lp.rows / row_scale[:, None]
    b = lp.bounds / row_scale

    tab = np.zeros((k + 1, m + k + 1))
    tab[:k, :m] = a
    tab[:k, m:m + k] = np.eye(k)
    tab[:k, -1] = b
    tab[k, :m] = -c
    basis = np.arange(m, m + k)

    price_eps = 1e-10 * max(1.0, float(np.max(np.abs(c))))
    piv_eps = 1e-10
    max_iter = 50 * (k + m) + 10_000
    stall_limit = 2 * (k + m)
    trace: deque = deque(maxlen=100)
    best_obj = 0.0
    stalled = 0
    bland = False

    it = 0
    while True:
        red = tab[k, :m + k]
        if bland:
            neg = np.nonzero(red < -price_eps)[0]
            if neg.size == 0:
                break
            j = int(neg[0])
        else:
            j = int(np.argmin(red))
            if red[j] >= -price_eps:
                break
        col = tab[:k, j]
        pos = col > piv_eps
        if not np.any(pos):
            raise UnboundedError(
                f"objective unbounded along column {j} "
                "(no growth row caps this direction)")
        ratios = np.full(k, np.inf)
        ratios[pos] = tab[:k, -1][pos] / col[pos]
        rmin = ratios.min()
        # Additive slack: rmin can sit a hair below zero from roundoff, and a
        # multiplicative band would then exclude rmin itself.
        ties = np.nonzero(ratios <= rmin + 1e-12 * (1.0 + abs(rmin)))[0]
        r = int(ties[np.argmin(basis[ties])])

        piv = tab[r, j]
        tab[r] /= piv
        colj = tab[:, j].copy()
        colj[r] = 0.0
        tab -= np.outer(colj, tab[r])
        tab[:, j] = 0.0
        tab[r, j] = 1.0
        basis[r] = j

        it += 1
        obj = tab[k, -1]
        trace.append((it, j, r, float(obj)))
        if obj > best_obj + 1e-12 * (1.0 + abs(best_obj)):
            best_obj = obj
            stalled = 0
        else:
            stalled += 1
            if stalled > stall_limit:
                bland = True
        if it >= max_iter:
            raise SolverStallError(
                f"simplex exceeded {max_iter} iterations", trace=list(trace))

    w = np.zeros(m)
    in_cols = basis < m
    w[basis[in_cols]] = tab[:k, -1][in_cols]
    if np.any(w < -tol):
        raise SolverStallError(
            f"negative basic weight {w.min():.3e} at optimum", trace=list(trace))
    np.clip(w, 0.0, None, out=w)

    value = float(c @ w)
    duals = tab[k, m:m + k]
    gap = abs(value - float(duals @ b))
    resid = float(np.max((lp.rows @ w - lp.bounds)
                         / (1.0 + np.abs(lp.bounds)), initial=0.0))
    if gap > tol * (1.0 + abs(value)) or resid > tol:
        raise SolverStallError(
            f"optimality certificate failed: gap {gap:.3e}, "
            f"residual {resid:.3e} at tol {tol:g}", trace=list(trace))

    slack = lp.bounds - lp.rows @ w
    active = np.nonzero(slack <= tol * (1.0 + np.abs(lp.bounds)))[0]
    return CapacityEstimate(
        value=value, optimal_weights=w, active_constraints=active,
        resolution_metadata=(m, k, 0), certificate_gap=gap,
        feasibility_residual=max(resid, 0.0), iterations=it)


@dataclass(frozen=True, eq=False)
class CapacityProblem:
    """Discretized capacity problem: atoms, growth family, eval grid, kernel.

    Invariants checked at construction: nonempty atoms of equal dimension
    matching the kernel, at least one growth cube containing every atom
    (the root; this guards the LP against unboundedness), and every eval
    point at ps-distance > `margin` from every atom.
    """

    atoms_x: np.ndarray
    atoms_t: np.ndarray
    growth_cubes: tuple[PsCube, ...]
    eval_x: np.ndarray
    eval_t: np.ndarray
    kernel: KernelSpec
    enforce_conjugate: bool = True
    bound: float = 1.0
    margin: float = 0.0

    def __post_init__(self):
        ax = np.atleast_2d(np.asarray(self.atoms_x, dtype=float))
        at = np.asarray(self.atoms_t, dtype=float)
        ex = np.atleast_2d(np.asarray(self.eval_x, dtype=float))
        et = np.asarray(self.eval_t, dtype=float)
        if ax.shape[0] != at.size or ax.shape[0] < 1:
            raise ValueError("atoms_x and atoms_t must be nonempty and aligned")
        if ex.shape[0] != et.size:
            raise ValueError("eval_x and eval_t must be aligned")
        n = self.kernel.n
        if ax.shape[1] != n:
            raise DimensionMismatchError(expected=n, got=ax.shape[1],
                                         context="candidate atoms")
        if et.size and ex.shape[1] != n:
            raise DimensionMismatchError(expected=n, got=ex.shape[1],
                                         context="eval points")
        if self.bound <= 0:
            raise ValueError("potential bound must be positive")
        if not any(np.all(q.contains_arrays(ax, at, closed=True))
                   for q in self.growth_cubes):
            raise ValueError("growth family must include a cube containing "
                             "all atoms (root cube)")
        if et.size:
            d = _pairwise_ps_dist(ex, et, ax, at, self.kernel.s).min()
            if d <= self.margin:
                raise ValueError(
                    f"eval grid touches the atom set: min distance {d:.3e} "
                    f"<= margin {self.margin:.3e}")
        for name, arr in (("atoms_x", ax), ("atoms_t", at),
                          ("eval_x", ex), ("eval_t", et)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "growth_cubes", tuple(self.growth_cubes))

    @property
    def n(self) -> int:
        return self.kernel.n

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.atoms_t.size, len(self.growth_cubes), self.eval_t.size)


def _pairwise_ps_dist(X: np.ndarray, T: np.ndarray, Y: np.ndarray,
                      U: np.ndarray, s: float) -> np.ndarray:
    """(len(X), len(Y)) matrix of ps-distances between two point clouds."""
    sp = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)
    tm = np.abs(T[:, None] - U[None, :]) ** (1.0 / (2.0 * s))
    return np.maximum(sp, tm)


def _kernel_matrix(spec: KernelSpec, ex: np.ndarray, et: np.ndarray,
                   ax: np.ndarray, at: np.ndarray,
                   conjugate: bool) -> np.ndarray:
    """Kernel rows (eval x component, atom): K(x - a), or K(a - x) conjugate.

    On kernel failure the offending (eval point, atom) pair is identified by
    a scalar rescan and reported.
    """
    E, A = et.size, at.size
    DX = ex[:, None, :] - ax[None, :, :]
    DT = et[:, None] - at[None, :]
    if conjugate:
        DX, DT = -DX, -DT
    ncomp = kernel_component_count(spec)
    try:
        vals = kernel_values(spec, DX.reshape(E * A, -1), DT.reshape(E * A))
    except FracapError as exc:
        for i in range(E):
            for j in range(A):
                try:
                    kernel_values(spec, DX[i, j][None, :], DT[i, j][None])
                except FracapError:
                    raise FracapError(
                        f"kernel evaluation failed at eval point {i} "
                        f"(x={ex[i].tolist()}, t={et[i]!r}) against atom {j} "
                        f"(x={ax[j].tolist()}, t={at[j]!r}): {exc}") from exc
        raise
    if ncomp == 1:
        return vals.reshape(E, A)[:, None, :].reshape(E, A)
    # (E*A, n) -> (E, n, A): one row per (eval point, component).
    return vals.reshape(E, A, ncomp).transpose(0, 2, 1).reshape(E * ncomp, A)


def build_lp(p: CapacityProblem) -> LpInstance:
    """Assemble the capacity LP from a problem description.

    Row layout (documented for active-constraint bookkeeping): first the
    growth rows in family order, then +direct, -direct, and when the
    conjugate is enforced +conjugate, -conjugate potential blocks, each
    block ordered by (eval point, component). Growth membership uses closed
    cubes, matching the growth audit in the measures module; the counting
    identity is G + 4nE rows for a vector kernel with conjugate on.
    """
    ax, at = p.atoms_x, p.atoms_t
    A = at.size
    rows = [np.array([q.contains_arrays(ax, at, closed=True)
                      for q in p.growth_cubes], dtype=float)]
    bounds = [np.array([cube_diam(q) ** (p.n + 1) for q in p.growth_cubes])]

    if p.eval_t.size:
        mats = [_kernel_matrix(p.kernel, p.eval_x, p.eval_t, ax, at, False)]
        if p.enforce_conjugate:
            mats.append(_kernel_matrix(p.kernel, p.eval_x, p.eval_t, ax, at, True))
        for mat in mats:
            rows.extend([mat, -mat])
            bounds.extend([np.full(mat.shape[0], p.bound)] * 2)

    return LpInstance(objective=np.ones(A),
                      rows=np.vstack(rows),
                      bounds=np.concatenate(bounds))


@dataclass(frozen=True)
class ResolutionParams:
    """Discretization knobs shared by the capacity estimators.

    growth_levels: finest dyadic level of the growth family over the root.
    eval_cap: approximate ceiling on the eval-grid size (anchored offsets
        are subsampled to fit; the far-field lattice is added on top).
    anchor_radii: offsets from atom anchors, in units of the minimum
        inter-atom ps-distance.
    lattice_per_axis: coarse far-field lattice resolution per spatial axis.
    atoms_cap: candidate atoms are stride-subsampled above this count to
        keep the LP at desk scale.
    """

    growth_levels: int = 3
    eval_cap: int = 320
    anchor_radii: tuple[float, ...] = (1.0, 2.0)
    lattice_per_axis: int = 3
    atoms_cap: int = 2048
    bound: float = 1.0
    tol: float = 1e-9

    def __post_init__(self):
        if self.growth_levels < 0 or self.eval_cap < 0 or self.atoms_cap < 1:
            raise ValueError("resolution parameters out of range")
        if any(r <= 0 for r in self.anchor_radii):
            raise ValueError("anchor radii must be positive")


def _subsample(k: int, total: int) -> np.ndarray:
    """k deterministic indices spread evenly over range(total)."""
    if total <= k:
        return np.arange(total)
    return np.unique(np.round(np.linspace(0, total - 1, k)).astype(int))


def _min_interatom_dist(X: np.ndarray, T: np.ndarray, s: float,
                        fallback: float) -> float:
    if T.size < 2:
        return fallback
    idx = _subsample(2048, T.size)
    D = _pairwise_ps_dist(X[idx], T[idx], X[idx], T[idx], s)
    np.fill_diagonal(D, np.inf)
    d = float(D.min())
    return d if d > 0 else fallback


def _occupied_dyadic(root: PsCube, X: np.ndarray, T: np.ndarray,
                     level: int) -> list[PsCube]:
    """Occupied cells of the level-`level` dyadic partition of `root`.

    Reproduces the corner arithmetic of psgeo.dyadic_cubes but builds only
    the cells that contain an atom.
    """
    if level == 0:
        return [root]
    h = root.side / 2 ** level
    ht = h ** (2.0 * root.s)
    nt = math.ceil(2.0 ** (level * 2.0 * root.s) * (1.0 - 1e-12))
    ix = np.clip(np.floor((X - root.corner.x) / h).astype(np.int64),
                 0, 2 ** level - 1)
    it = np.clip(np.floor((T - root.corner.t) / ht).astype(np.int64),
                 0, nt - 1)
    keys = np.unique(np.concatenate([ix, it[:, None]], axis=1), axis=0)
    return [PsCube(PsPoint(root.corner.x + h * key[:-1].astype(float),
                           root.corner.t + key[-1] * ht), h, root.s)
            for key in keys]


def assemble_capacity_problem(points, kernel: KernelSpec,
                              params: ResolutionParams = ResolutionParams(),
                              enforce_conjugate: bool = True) -> CapacityProblem:
    """Standard discretization: dyadic growth family plus clustered eval grid.

    The growth family is the root bounding cube plus every occupied dyadic
    cell down to `growth_levels`, with the depth clamped so cells stay no
    smaller than the minimum inter-atom distance r_floor: the cloud
    represents a continuum set only down to its spacing, and growth rows
    below that scale measure the discretization, not the set. Eval
    candidates are axis offsets from stride-subsampled atom anchors at
    `anchor_radii` times r_floor, plus cell centers of a coarse lattice over
    the doubled root; candidates closer than half the smallest anchor radius
    to any atom are dropped (the disjointness margin), then deduplicated.
    """
    X, T = points_to_arrays(points)
    if X.shape[0] > params.atoms_cap:
        idx = _subsample(params.atoms_cap, X.shape[0])
        X, T = X[idx], T[idx]
    n, s = X.shape[1], kernel.s
    if n != kernel.n:
        raise DimensionMismatchError(expected=kernel.n, got=n,
                                     context="capacity atoms")
    root = bounding_cube((X, T), s)

    r_floor = _min_interatom_dist(X, T, s, root.side / 2 ** params.growth_levels)
    levels = min(params.growth_levels,
                 max(0, int(math.floor(math.log2(root.side / r_floor)))))
    cubes: list[PsCube] = []
    for level in range(levels + 1):
        cubes.extend(_occupied_dyadic(root, X, T, level))
    per_anchor = 2 * (n + 1) * len(params.anchor_radii)
    n_anchor = max(1, params.eval_cap // max(per_anchor, 1))
    anchors = _subsample(n_anchor, T.size)

    cand_x, cand_t = [], []
    for mult in params.anchor_radii:
        r = mult * r_floor
        for axis in range(n):
            for sign in (1.0, -1.0):
                off = np.zeros(n)
                off[axis] = sign * r
                cand_x.append(X[anchors] + off)
                cand_t.append(T[anchors])
        for sign in (1.0, -1.0):
            cand_x.append(X[anchors])
            cand_t.append(T[anchors] + sign * r ** (2.0 * s))

    box = cube_scale(root, 2.0)
    na = max(params.lattice_per_axis, 1)
    hx = box.side / na
    ht = box.time_side / (na + 1)
    axes = [box.corner.x[a] + hx * (np.arange(na) + 0.5) for a in range(n)]
    tgrid = box.corner.t + ht * (np.arange(na + 1) + 0.5)
    mesh = np.meshgrid(*axes, tgrid, indexing="ij")
    cand_x.append(np.stack([m.ravel() for m in mesh[:-1]], axis=1))
    cand_t.append(mesh[-1].ravel())

    ex = np.concatenate(cand_x, axis=0)
    et = np.concatenate(cand_t, axis=0)
    margin = 0.5 * min(params.anchor_radii) * r_floor
    keep = _pairwise_ps_dist(ex, et, X, T, s).min(axis=1) > margin
    ex, et = ex[keep], et[keep]
    scale = max(root.side, 1e-30)
    key = np.round(np.concatenate([ex, et[:, None]], axis=1) / scale, 12)
    _, uniq = np.unique(key, axis=0, return_index=True)
    uniq.sort()
    ex, et = ex[uniq], et[uniq]

    return CapacityProblem(atoms_x=X, atoms_t=T, growth_cubes=tuple(cubes),
                           eval_x=ex, eval_t=et, kernel=kernel,
                           enforce_conjugate=enforce_conjugate,
                           bound=params.bound, margin=margin)


@dataclass(frozen=True)
class EstimateAudit:
    """A-posteriori feasibility of an optimal measure against its problem."""

    max_growth_ratio: float
    max_potential: float
    growth_ok: bool
    potential_ok: bool


def verify_estimate(p: CapacityProblem, est: CapacityEstimate,
                    tol: float = 1e-9) -> EstimateAudit:
    """Re-evaluate growth and potential constraints at the optimum.

    Growth ratio is max over the family of mass(Q)/diam(Q)^(n+1); the
    potential is the max over eval points, kernel components, and (when
    enforced) both kernel directions of |K * mu| / bound. Both must be
    <= 1 + tol for a sound estimate.
    """
    w = est.optimal_weights
    ratios = [float(w[q.contains_arrays(p.atoms_x, p.atoms_t, closed=True)].sum())
              / cube_diam(q) ** (p.n + 1) for q in p.growth_cubes]
    gmax = max(ratios)

    pmax = 0.0
    if p.eval_t.size:
        dirs = [False, True] if p.enforce_conjugate else [False]
        for conj in dirs:
            mat = _kernel_matrix(p.kernel, p.eval_x, p.eval_t,
                                 p.atoms_x, p.atoms_t, conj)
            pmax = max(pmax, float(np.max(np.abs(mat @ w))) / p.bound)

    return EstimateAudit(max_growth_ratio=gmax, max_potential=pmax,
                         growth_ok=gmax <= 1.0 + tol,
                         potential_ok=pmax <= 1.0 + tol)


def _estimate(points, kernel: KernelSpec, params: ResolutionParams,
              enforce_conjugate: bool) -> CapacityEstimate:
    p = assemble_capacity_problem(points, kernel, params, enforce_conjugate)
    est = solve_lp(build_lp(p), tol=params.tol)
    return replace(est, resolution_metadata=p.counts)


def gamma_tilde_estimate(points, s: float,
                         params: ResolutionParams = ResolutionParams()
                         ) -> CapacityEstimate:
    """Positive-capacity estimate with the spatial-gradient kernel.

    Enforces |each component of grad P_s * mu| <= bound at the eval grid for
    both the kernel and its conjugate, plus degree-(n+1) growth. The value
    is a resolution-dependent stand-in for the continuum capacity: trends
    across nested resolutions are meaningful, absolute values are not.
    """
    X, T = points_to_arrays(points)
    kernel = KernelSpec("GradPs" if s < 1.0 else "GradW", n=X.shape[1], s=s)
    return _estimate((X, T), kernel, params, enforce_conjugate=True)


def gamma_half_estimate(points,
                        params: ResolutionParams = ResolutionParams()
                        ) -> CapacityEstimate:
    """Half-Laplacian caloric capacity estimate (plane only: n = 1, s = 1).

    Same assembly as gamma_tilde_estimate but with the scalar kernel
    (-Delta)^(1/2) W and no conjugate rows: the defining constraint is the
    single sup bound on the half-Laplacian of the heat potential.
    """
    X, T = points_to_arrays(points)
    if X.shape[1] != 1:
        raise DimensionMismatchError(expected=1, got=X.shape[1],
                                     context="half-Laplacian capacity")
    kernel = KernelSpec("HalfLapW", n=1, s=1.0)
    return _estimate((X, T), kernel, params, enforce_conjugate=False)


@dataclass(frozen=True)
class ContentCapacityRecord:
    """Capacity estimate vs dyadic-cover content upper bound."""

    capacity: CapacityEstimate
    content: float
    ratio: float


def content_capacity_report(points, s: float,
                            params: ResolutionParams = ResolutionParams()
                            ) -> ContentCapacityRecord:
    """Compare the capacity estimate against the Hausdorff content bound.

    The theory bounds capacity by a constant times the degree-(n+1) content;
    the constant is not known explicitly, so the record carries the raw
    ratio for empirical tracking across resolutions. The covering depth is
    clamped at the r_floor scale for the same reason the growth family is:
    below the atom spacing the content of the cloud decays to zero and the
    ratio measures the discretization instead of the set.
    """
    X, T = points_to_arrays(points)
    est = gamma_tilde_estimate((X, T), s, params)
    root = bounding_cube((X, T), s)
    r_floor = _min_interatom_dist(X, T, s,
                                  root.side / 2 ** params.growth_levels)
    scale_level = max(0, int(math.floor(math.log2(root.side / r_floor))))
    content = hausdorff_content_upper(
        (X, T), X.shape[1] + 1, s,
        max_level=min(params.growth_levels + 2, scale_level))
    return ContentCapacityRecord(capacity=est, content=content,
                                 ratio=est.value / content if content > 0
                                 else math.inf)


def write_lp_text(lp: LpInstance, path) -> None:
    """Export in CPLEX LP text format for cross-checking with other solvers.

    Variables are w1..wm with the default nonnegative bounds; coefficients
    are written with 17 significant digits.
    """
    def terms(coeffs):
        parts = [f"{v:+.17g} w{j + 1}" for j, v in enumerate(coeffs) if v != 0.0]
        if not parts:
            parts = ["+0 w1"]
        return "\n   ".join(" ".join(parts[i:i + 6])
                            for i in range(0, len(parts), 6))

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\ capacity LP export\nMaximize\n")
        fh.write(f" obj: {terms(lp.objective)}\n")
        fh.write("Subject To\n")
        for i in range(lp.n_rows):
            fh.write(f" c{i + 1}: {terms(lp.rows[i])} <= {lp.bounds[i]:.17g}\n")
        fh.write("Bounds\nEnd\n")
