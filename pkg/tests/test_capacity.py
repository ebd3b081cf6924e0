import itertools
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import linprog

from fracap.cantor import critical_spec, natural_measure
from fracap.capacity import (
    CapacityProblem,
    LpInstance,
    ResolutionParams,
    assemble_capacity_problem,
    build_lp,
    content_capacity_report,
    gamma_half_estimate,
    gamma_tilde_estimate,
    solve_lp,
    verify_estimate,
    write_lp_text,
)
from fracap.errors import DimensionMismatchError, UnboundedError
from fracap.kernels import KernelSpec, kernel_values
from fracap.measures import DiscreteMeasure, growth_audit
from fracap.psgeo import PsCube, PsPoint, cube_diam


def cantor_atoms(n, s, k):
    spec = critical_spec(n, s, k)
    nu = natural_measure(spec, k)
    return nu.x, nu.t


def segment_atoms(count, vertical):
    u = (np.arange(count) + 0.5) / count
    if vertical:
        return np.zeros((count, 1)), u
    return u[:, None], np.zeros(count)


def random_bounded_lp(rng, n_cols, n_rows):
    """Random instance with one all-ones row so the feasible set is compact."""
    rows = np.vstack([rng.uniform(-1, 1, size=(n_rows, n_cols)),
                      np.ones((1, n_cols))])
    bounds = np.concatenate([rng.uniform(0.1, 2.0, size=n_rows),
                             [rng.uniform(0.5, 3.0)]])
    return LpInstance(objective=rng.uniform(0.1, 1.0, size=n_cols),
                      rows=rows, bounds=bounds)


def vertex_enumeration_value(lp):
    """Optimum by brute force: visit every basic point of {Aw <= b, w >= 0}.

    Each vertex solves an m x m subsystem of tight constraints drawn from
    the rows and the nonnegativity bounds; infeasible solutions are
    discarded. The origin is always feasible, so the running best starts
    at 0. Only viable for single-digit column counts.
    """
    m = lp.n_cols
    A = np.vstack([lp.rows, -np.eye(m)])
    b = np.concatenate([lp.bounds, np.zeros(m)])
    best = 0.0
    for idx in itertools.combinations(range(A.shape[0]), m):
        sub = A[list(idx)]
        try:
            w = np.linalg.solve(sub, b[list(idx)])
        except np.linalg.LinAlgError:
            continue
        if np.all(A @ w <= b + 1e-9 * (1 + np.abs(b))):
            best = max(best, float(lp.objective @ w))
    return best


class TestLpInstance:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="disagree"):
            LpInstance(objective=np.ones(3), rows=np.ones((2, 2)),
                       bounds=np.ones(2))

    def test_negative_bound_rejected(self):
        # w = 0 must be feasible, otherwise the slack basis cannot start
        with pytest.raises(ValueError, match="origin"):
            LpInstance(objective=np.ones(2), rows=np.ones((1, 2)),
                       bounds=np.array([-0.5]))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            LpInstance(objective=np.array([1.0, np.nan]),
                       rows=np.ones((1, 2)), bounds=np.ones(1))

    def test_empty_objective_rejected(self):
        with pytest.raises(ValueError):
            LpInstance(objective=np.array([]), rows=np.ones((1, 0)),
                       bounds=np.ones(1))

    def test_arrays_frozen(self):
        lp = LpInstance(objective=np.ones(2), rows=np.ones((1, 2)),
                        bounds=np.ones(1))
        with pytest.raises(ValueError):
            lp.rows[0, 0] = 7.0

    def test_counts(self):
        lp = LpInstance(objective=np.ones(3), rows=np.ones((2, 3)),
                        bounds=np.ones(2))
        assert (lp.n_rows, lp.n_cols) == (2, 3)


class TestSolveLp:
    def test_single_variable(self):
        lp = LpInstance(objective=np.ones(1), rows=np.array([[1.0]]),
                        bounds=np.array([3.0]))
        est = solve_lp(lp)
        assert est.value == pytest.approx(3.0, rel=1e-12)
        assert est.optimal_weights == pytest.approx([3.0])
        assert 0 in est.active_constraints

    def test_degenerate_tie(self):
        # the redundant w1 cap leaves the optimum at the shared vertex
        lp = LpInstance(objective=np.ones(2),
                        rows=np.array([[1.0, 1.0], [1.0, 0.0]]),
                        bounds=np.array([1.0, 0.25]))
        est = solve_lp(lp)
        assert est.value == pytest.approx(1.0, rel=1e-12)

    def test_duplicate_rows_degeneracy(self):
        row = np.array([[0.5, 1.0, 0.25]])
        lp = LpInstance(objective=np.ones(3),
                        rows=np.repeat(row, 5, axis=0),
                        bounds=np.full(5, 2.0))
        est = solve_lp(lp)
        # best single coordinate: put everything on the 0.25 coefficient
        assert est.value == pytest.approx(8.0, rel=1e-12)

    def test_unbounded(self):
        # nothing caps w1: every row has a nonpositive entry in its column
        lp = LpInstance(objective=np.array([1.0, 0.0]),
                        rows=np.array([[0.0, 1.0], [-1.0, 0.0]]),
                        bounds=np.array([1.0, 1.0]))
        with pytest.raises(UnboundedError):
            solve_lp(lp)

    def test_zero_objective(self):
        lp = LpInstance(objective=np.zeros(2), rows=np.ones((1, 2)),
                        bounds=np.ones(1))
        assert solve_lp(lp).value == 0.0

    def test_tol_validation(self):
        lp = LpInstance(objective=np.ones(1), rows=np.ones((1, 1)),
                        bounds=np.ones(1))
        with pytest.raises(ValueError, match="tol"):
            solve_lp(lp, tol=0.0)

    def test_certificates_populated(self):
        lp = LpInstance(objective=np.ones(2),
                        rows=np.array([[1.0, 2.0], [2.0, 1.0]]),
                        bounds=np.array([1.0, 1.0]))
        est = solve_lp(lp)
        assert est.value == pytest.approx(2.0 / 3.0, rel=1e-12)
        assert est.certificate_gap <= 1e-9 * (1 + est.value)
        assert est.feasibility_residual <= 1e-9
        assert est.resolution_metadata == (2, 2, 0)
        assert est.iterations >= 1

    def test_against_vertex_enumeration(self):
        # exhaustive oracle on instances small enough to enumerate
        rng = np.random.default_rng(20240817)
        for _ in range(100):
            lp = random_bounded_lp(rng, int(rng.integers(2, 9)),
                                   int(rng.integers(2, 7)))
            est = solve_lp(lp)
            ref = vertex_enumeration_value(lp)
            assert est.value == pytest.approx(ref, rel=1e-7, abs=1e-7)

    def test_against_scipy_highs(self):
        rng = np.random.default_rng(7)
        for _ in range(12):
            lp = random_bounded_lp(rng, 40, 30)
            est = solve_lp(lp)
            res = linprog(-lp.objective, A_ub=lp.rows, b_ub=lp.bounds,
                          method="highs")
            assert res.status == 0
            assert est.value == pytest.approx(-res.fun, rel=1e-7)


class TestCapacityProblem:
    def _root(self, s=1.0):
        return PsCube(PsPoint(np.array([0.0]), 0.0), 1.0, s)

    def test_missing_root_cube(self):
        with pytest.raises(ValueError, match="root"):
            CapacityProblem(
                atoms_x=np.array([[0.2], [0.8]]), atoms_t=np.array([0.2, 0.8]),
                growth_cubes=(PsCube(PsPoint(np.array([0.0]), 0.0), 0.3, 1.0),),
                eval_x=np.zeros((0, 1)), eval_t=np.zeros(0),
                kernel=KernelSpec("GradW", 1, 1.0))

    def test_eval_grid_touching_atoms(self):
        with pytest.raises(ValueError, match="touches"):
            CapacityProblem(
                atoms_x=np.array([[0.5]]), atoms_t=np.array([0.5]),
                growth_cubes=(self._root(),),
                eval_x=np.array([[0.5]]), eval_t=np.array([0.5 + 1e-6]),
                kernel=KernelSpec("GradW", 1, 1.0), margin=0.01)

    def test_atom_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            CapacityProblem(
                atoms_x=np.array([[0.5, 0.5]]), atoms_t=np.array([0.5]),
                growth_cubes=(self._root(),),
                eval_x=np.zeros((0, 1)), eval_t=np.zeros(0),
                kernel=KernelSpec("GradW", 1, 1.0))

    def test_bad_bound(self):
        with pytest.raises(ValueError, match="bound"):
            CapacityProblem(
                atoms_x=np.array([[0.5]]), atoms_t=np.array([0.5]),
                growth_cubes=(self._root(),),
                eval_x=np.zeros((0, 1)), eval_t=np.zeros(0),
                kernel=KernelSpec("GradW", 1, 1.0), bound=0.0)

    def test_misaligned_eval(self):
        with pytest.raises(ValueError, match="aligned"):
            CapacityProblem(
                atoms_x=np.array([[0.5]]), atoms_t=np.array([0.5]),
                growth_cubes=(self._root(),),
                eval_x=np.array([[0.1], [0.2]]), eval_t=np.array([2.0]),
                kernel=KernelSpec("GradW", 1, 1.0))

    def test_counts(self):
        p = CapacityProblem(
            atoms_x=np.array([[0.2], [0.8]]), atoms_t=np.array([0.2, 0.8]),
            growth_cubes=(self._root(),),
            eval_x=np.array([[0.5]]), eval_t=np.array([2.0]),
            kernel=KernelSpec("GradW", 1, 1.0))
        assert p.counts == (2, 1, 1)
        assert p.n == 1


class TestBuildLp:
    def _problem(self, kernel, enforce_conjugate):
        return CapacityProblem(
            atoms_x=np.array([[0.3], [0.7]]), atoms_t=np.array([0.4, 0.6]),
            growth_cubes=(PsCube(PsPoint(np.array([0.0]), 0.0), 1.0, kernel.s),
                          PsCube(PsPoint(np.array([0.0]), 0.0), 0.5, kernel.s)),
            eval_x=np.array([[0.5], [0.9]]), eval_t=np.array([2.0, 3.0]),
            kernel=kernel, enforce_conjugate=enforce_conjugate)

    def test_row_count_vector_kernel_with_conjugate(self):
        # G + 4nE: direct and conjugate, each with +/- rows per component
        p = self._problem(KernelSpec("GradW", 1, 1.0), True)
        lp = build_lp(p)
        assert lp.n_rows == 2 + 4 * 1 * 2
        assert lp.n_cols == 2
        assert np.all(lp.objective == 1.0)

    def test_row_count_scalar_kernel_no_conjugate(self):
        p = self._problem(KernelSpec("HalfLapW", 1, 1.0), False)
        lp = build_lp(p)
        assert lp.n_rows == 2 + 2 * 2

    def test_growth_rows_and_bounds(self):
        p = self._problem(KernelSpec("GradW", 1, 1.0), True)
        lp = build_lp(p)
        # both atoms in the root, only the (0.4) atom in the half cube
        # (side 0.5 spans t in [0, 0.25 + ...); 2s = 2 keeps t_max = 0.25)
        assert np.all(lp.rows[0] == [1.0, 1.0])
        assert lp.bounds[0] == pytest.approx(cube_diam(p.growth_cubes[0]) ** 2)
        assert lp.bounds[1] == pytest.approx(cube_diam(p.growth_cubes[1]) ** 2)

    def test_potential_row_layout(self):
        p = self._problem(KernelSpec("GradW", 1, 1.0), True)
        lp = build_lp(p)
        spec = p.kernel
        direct = np.empty((2, 2))
        conj = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                dx = p.eval_x[i] - p.atoms_x[j]
                dt = p.eval_t[i] - p.atoms_t[j]
                direct[i, j] = kernel_values(spec, dx[None, :],
                                             np.array([dt]))[0, 0]
                conj[i, j] = kernel_values(spec, -dx[None, :],
                                           np.array([-dt]))[0, 0]
        np.testing.assert_allclose(lp.rows[2:4], direct, rtol=1e-15)
        np.testing.assert_allclose(lp.rows[4:6], -direct, rtol=1e-15)
        np.testing.assert_allclose(lp.rows[6:8], conj, rtol=1e-15)
        np.testing.assert_allclose(lp.rows[8:10], -conj, rtol=1e-15)
        assert np.all(lp.bounds[2:] == p.bound)


class TestAssembledEstimates:
    @pytest.mark.parametrize("points,s", [
        (cantor_atoms(1, 0.75, 2), 0.75),
        (segment_atoms(24, True), 1.0),
    ])
    def test_optimum_stays_feasible(self, points, s):
        X, T = points
        kernel = KernelSpec("GradPs" if s < 1.0 else "GradW", 1, s)
        p = assemble_capacity_problem((X, T), kernel)
        est = solve_lp(build_lp(p))
        audit = verify_estimate(p, est)
        assert audit.growth_ok and audit.potential_ok
        assert audit.max_growth_ratio <= 1.0 + 1e-9
        assert audit.max_potential <= 1.0 + 1e-9

    def test_optimum_passes_independent_growth_audit(self):
        # same degree-(n+1) audit the measures module runs, over the
        # problem's own growth family
        X, T = cantor_atoms(1, 1.0, 2)
        kernel = KernelSpec("GradW", 1, 1.0)
        p = assemble_capacity_problem((X, T), kernel)
        est = solve_lp(build_lp(p))
        mu = DiscreteMeasure.from_points((X, T), est.optimal_weights, 1.0)
        rep = growth_audit(mu, 2.0, family=list(p.growth_cubes))
        assert rep.constant <= 1.0 + 1e-9

    def test_more_eval_points_never_raise_value(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0.2, 0.8, size=(40, 1))
        T = rng.uniform(0.2, 0.8, size=40)
        p = assemble_capacity_problem((X, T), KernelSpec("GradW", 1, 1.0),
                                      ResolutionParams(eval_cap=160))
        E = p.eval_t.size
        vals = []
        for frac in np.linspace(0.1, 1.0, 8):
            e = max(1, int(frac * E))
            q = replace(p, eval_x=p.eval_x[:e], eval_t=p.eval_t[:e])
            vals.append(solve_lp(build_lp(q)).value)
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))

    def test_larger_growth_family_never_raises_value(self):
        X, T = cantor_atoms(1, 1.0, 2)
        p = assemble_capacity_problem((X, T), KernelSpec("GradW", 1, 1.0))
        root_only = replace(p, growth_cubes=p.growth_cubes[:1])
        assert (solve_lp(build_lp(p)).value
                <= solve_lp(build_lp(root_only)).value + 1e-9)

    def test_dilation_covariance(self):
        # delta_lam scales every ingredient the same way: masses by
        # lam^(n+1), growth caps by diam^(n+1), kernel rows by lam^-(n+1);
        # the assembled optimum scales exactly
        s, lam = 0.75, 2.0
        X, T = cantor_atoms(1, s, 2)
        base = gamma_tilde_estimate((X, T), s).value
        dilated = gamma_tilde_estimate((lam * X, lam ** (2 * s) * T), s).value
        assert dilated == pytest.approx(lam ** 2 * base, rel=1e-9)

    def test_metadata_mirrors_problem_counts(self):
        X, T = cantor_atoms(1, 1.0, 2)
        est = gamma_tilde_estimate((X, T), 1.0)
        atoms, cubes, evals = est.resolution_metadata
        assert atoms == T.size
        assert cubes >= 1 and evals >= 1


class TestGammaEstimates:
    def test_half_capacity_requires_plane(self):
        X = np.array([[0.1, 0.2], [0.3, 0.4]])
        T = np.array([0.0, 1.0])
        with pytest.raises(DimensionMismatchError):
            gamma_half_estimate((X, T))

    def test_vertical_segment_decays_under_half_laplacian(self):
        params = ResolutionParams(eval_cap=640)
        vals = [gamma_half_estimate(segment_atoms(N, True), params).value
                for N in (24, 48, 96)]
        expected = [0.21822954403741662, 0.18109807950044005,
                    0.15803779790593664]
        np.testing.assert_allclose(vals, expected, rtol=1e-9)
        drops = np.diff(vals) / np.array(vals[:-1])
        assert np.all(drops <= -0.05)

    def test_horizontal_segment_stable_under_half_laplacian(self):
        params = ResolutionParams(eval_cap=640)
        vals = [gamma_half_estimate(segment_atoms(N, False), params).value
                for N in (24, 48, 96)]
        assert min(vals) > 0.0
        assert max(vals) / min(vals) <= 1.25

    def test_vertical_segment_stable_under_gradient(self):
        # same set as the decaying half-Laplacian sweep: the two kernels
        # measure different capacities and must not be conflated
        params = ResolutionParams(eval_cap=640)
        vals = [gamma_tilde_estimate(segment_atoms(N, True), 1.0, params).value
                for N in (24, 48, 96)]
        expected = [0.9583333352500002, 0.9791666686250002,
                    0.9895833353124992]
        np.testing.assert_allclose(vals, expected, rtol=1e-9)
        assert max(vals) / min(vals) <= 1.25

    def test_cantor_sweep_regression(self):
        # at desk scale the optimum is growth-capped and climbs toward the
        # content value; the removability trend shows up as the sup-norm
        # rows tightening toward the bound, not as value decay
        vals, utils = [], []
        for K in (2, 3, 4):
            X, T = cantor_atoms(1, 1.0, K)
            p = assemble_capacity_problem((X, T), KernelSpec("GradW", 1, 1.0))
            est = solve_lp(build_lp(p))
            vals.append(est.value)
            utils.append(verify_estimate(p, est).max_potential)
        expected = [0.9722222241666667, 0.99537037236111225,
                    0.99922839706018451]
        np.testing.assert_allclose(vals, expected, rtol=1e-9)
        assert all(b >= a - 1e-9 for a, b in zip(utils, utils[1:]))
        assert utils[0] < 0.5
        assert utils[-1] == pytest.approx(1.0, abs=1e-6)


class TestContentReport:
    @pytest.mark.parametrize("name,points", [
        ("point", (np.array([[0.5]]), np.array([0.5]))),
        ("cantor", cantor_atoms(1, 0.75, 2)),
    ])
    def test_capacity_tracks_content(self, name, points):
        ratios = []
        for par in (ResolutionParams(growth_levels=2, eval_cap=192),
                    ResolutionParams(growth_levels=3, eval_cap=320)):
            rec = content_capacity_report(points, 0.75, par)
            assert rec.content > 0.0
            assert rec.ratio <= 2.0
            ratios.append(rec.ratio)
        spread = max(ratios) / min(ratios)
        assert spread <= 4.0


class TestWriteLpText:
    def test_round_trippable_export(self, tmp_path):
        lp = LpInstance(objective=np.array([1.0, 1.0]),
                        rows=np.array([[0.5, 2.0], [1.0, 0.0]]),
                        bounds=np.array([1.0, 0.25]))
        path = tmp_path / "instance.lp"
        write_lp_text(lp, path)
        text = path.read_text()
        assert "Maximize" in text and "Subject To" in text
        assert text.count("c1:") == 1 and text.count("c2:") == 1
        # 17 significant digits keep the coefficients exact
        assert "+0.5 w1" in text and "+2 w2" in text
