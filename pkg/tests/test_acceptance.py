"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  Tolerances are fixed here and nowhere else.
"""

import json
import time

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from pcplace.harness import (
    ExperimentConfig,
    baseline_mean_based,
    run_pipeline,
    sample_parameter_set,
)
from pcplace.helmholtz import (
    affine_family,
    apply_sound_soft,
    assemble,
    assemble_operator,
    build_annulus_mesh,
    incident_rhs,
    max_safe_amplitude,
    shape_family,
)
from pcplace.krylov import contraction_factor, gmres_left, lu_factor
from pcplace.param_space import ParamBox, ParamSet, WeightMatrix, anisotropy_profile
from pcplace.placement import allocate, plan_placement
from pcplace.surrogate import (
    GpState,
    IterationMap,
    SurrogatePrior,
    fit_hyperparameters,
    kernel_matrix,
    prior_mean,
)


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def desk_instance():
    """Shape family, k0=20, N=2, |W|=100, amplitude half the cap,
    synthetic costs with build/iteration ratio 100 (criteria 9-10)."""
    exp = ExperimentConfig.from_dict(
        {
            "family": {
                "kind": "shape",
                "n_dims": 2,
                "amplitude": 0.5 * max_safe_amplitude(2.0),
                "decay": 2.0,
            },
            "k0": 20.0,
            "n_points": 100,
            "seed": 0,
            "cost": {"mode": "synthetic", "c_build": 1e-4, "c_iter": 1e-6},
        }
    )
    start = time.perf_counter()
    report, surrogate, plan = run_pipeline(exp)
    mean_report = baseline_mean_based(exp)
    elapsed = time.perf_counter() - start
    return exp, report, surrogate, plan, mean_report, elapsed


class TestCriterion1:
    def test_elman_bound_soundness(self):
        rng = np.random.default_rng(2024)
        gmap = IterationMap(1e-5)
        tol = 1e-5
        start = time.perf_counter()
        violations = 0
        for _ in range(200):
            n = int(rng.integers(4, 100))
            target = rng.uniform(0.05, 0.95)
            r = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            r *= target / np.linalg.norm(r, 2)
            a = sp.csr_matrix(np.eye(n) + r)
            pc = lu_factor(sp.eye(n, format="csr"))
            alpha = contraction_factor(pc, a)
            assert alpha < 1
            b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            rep = gmres_left(pc, a, b, tol=tol)
            if not rep.converged or rep.iterations > int(
                np.ceil(gmap.iters_from_alpha(alpha))
            ):
                violations += 1
        elapsed = time.perf_counter() - start
        ok = violations == 0 and elapsed < 60.0
        verdict(
            1,
            ok,
            f"Elman bound: {violations} violations over 200 systems "
            f"({elapsed:.1f}s < 60s)",
        )
        assert violations == 0
        assert elapsed < 60.0


class TestCriterion2:
    def test_exact_preconditioner_identity(self):
        from pcplace.helmholtz import HelmholtzConfig

        cfg = HelmholtzConfig(k0=10.0)
        mesh = build_annulus_mesh(cfg)
        rng = np.random.default_rng(7)
        families = {
            "affine": affine_family([0.25, 0.25], cfg),
            "shape": shape_family(2, 0.5 * max_safe_amplitude(2.0), 2.0, cfg),
        }
        worst = 0
        for family in families.values():
            for _ in range(20):
                y = rng.uniform(-1, 1, family.n_dims)
                matrix, rhs = assemble(y, family, mesh, cfg)
                pc = lu_factor(matrix, source_param=y)
                rep = gmres_left(pc, matrix, rhs, tol=1e-5)
                assert rep.converged
                worst = max(worst, rep.iterations)
        ok = worst == 1
        verdict(2, ok, f"exact preconditioner: max iterations {worst} (want 1)")
        assert worst == 1


class TestCriterion3:
    def test_fem_convergence_order(self):
        from pcplace.helmholtz import HelmholtzConfig

        k0 = 5.0
        errs, hs = [], []
        for h in (0.15, 0.075, 0.0375, 0.01875):
            cfg = HelmholtzConfig(k0=k0, mesh_size=h)
            mesh = build_annulus_mesh(cfg)
            family = affine_family(np.array([0.25, 0.25]), cfg)
            system = assemble_operator(np.ones(2), family, mesh, cfg)
            rhs = incident_rhs(mesh, cfg)
            u_star = np.exp(
                1j * k0 * (mesh.nodes @ np.asarray(cfg.incident_direction))
            )
            system, rhs = apply_sound_soft(
                system, rhs, mesh, values=u_star[mesh.inner_boundary]
            )
            u_h = spla.spsolve(system.tocsc(), rhs)
            err = u_h - u_star
            from pcplace.helmholtz import _QUAD_PHI

            w = mesh.areas / 3.0
            phi_outer = np.einsum("qi,qj->qij", _QUAD_PHI, _QUAD_PHI)
            me = np.einsum("t,qij->tij", w, phi_outer)
            rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
            cols = np.tile(mesh.triangles, (1, 3)).ravel()
            mass = sp.coo_matrix(
                (me.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2
            ).tocsr()
            errs.append(float(np.sqrt(abs(np.vdot(err, mass @ err)))))
            hs.append(h)
        rate = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        ok = rate >= 1.8
        verdict(3, ok, f"manufactured-solution L2 rate {rate:.3f} (want >= 1.8)")
        assert rate >= 1.8


class TestCriterion4:
    def test_gp_contract(self):
        rng = np.random.default_rng(11)
        box_ok = True
        # interpolation and origin variance
        b = WeightMatrix(np.diag([1.0, 0.4]))
        prior = SurrogatePrior(
            b, WeightMatrix.zero(2), anisotropy_profile(b, WeightMatrix.zero(2), 0, 1, 2.0)
        )
        gp = GpState(prior, coeffs=(0.0, 0.1))
        gp.add_pair(np.zeros(2), 2.5e-11)
        deltas = rng.uniform(-1, 1, size=(10, 2))
        targets = rng.uniform(0.01, 0.4, size=10)
        for d, t in zip(deltas, targets):
            gp.add_pair(d, t)
        mean, var = gp.posterior(deltas)
        interp_err = float(np.max(np.abs(mean - targets)))
        _, var0 = gp.posterior(np.zeros((1, 2)))
        # Cholesky of 100 random Gram matrices via the state machinery
        chol_failures = 0
        for _ in range(100):
            dims = int(rng.integers(1, 5))
            bb = WeightMatrix(np.diag(rng.uniform(0.2, 2.0, dims)))
            pp = SurrogatePrior(
                bb,
                WeightMatrix.zero(dims),
                anisotropy_profile(bb, WeightMatrix.zero(dims), 0, 1, 2.0),
            )
            g = GpState(pp)
            for _ in range(int(rng.integers(2, 12))):
                g.add_pair(rng.uniform(-1, 1, dims), rng.uniform(0, 0.5))
            try:
                g.posterior(np.zeros((1, dims)))
            except Exception:
                chol_failures += 1
        ok = interp_err <= 1e-6 and var0[0] <= 1e-10 and chol_failures == 0
        verdict(
            4,
            ok,
            f"GP contract: interpolation {interp_err:.2e} <= 1e-6, "
            f"var(0) {var0[0]:.2e} <= 1e-10, {chol_failures} Cholesky failures",
        )
        assert interp_err <= 1e-6
        assert var0[0] <= 1e-10
        assert chol_failures == 0


class TestCriterion5:
    def test_hyperparameter_recovery(self):
        rng = np.random.default_rng(21)
        b = WeightMatrix(np.diag([1.0, 0.3, 0.7]))
        d = WeightMatrix(np.diag([0.4, 1.0, 0.2]))
        deltas = rng.uniform(-1, 1, size=(40, 3))
        targets = prior_mean(deltas, (2.0, 3.0), b, d)
        (c1, c2), degenerate = fit_hyperparameters(deltas, targets, b, d)
        rel = max(abs(c1 - 2.0) / 2.0, abs(c2 - 3.0) / 3.0)
        ok = rel <= 1e-6 and not degenerate
        verdict(5, ok, f"hyperparameter recovery: relative error {rel:.2e} <= 1e-6")
        assert rel <= 1e-6


class TestCriterion6:
    def test_iteration_map_roundtrip(self):
        gmap = IterationMap(1e-5)
        anchors = [1.0, 2.0, 5.0, 20.80, 195.49, 1e4]
        worst = 0.0
        for m in anchors:
            back = gmap.iters_from_alpha(gmap.alpha_from_iters(m))
            worst = max(worst, abs(back - m) / m)
        ok = worst <= 1e-9
        verdict(6, ok, f"map roundtrip: worst relative error {worst:.2e} <= 1e-9")
        assert worst <= 1e-9


class TestCriterion7:
    def test_location_allocation_monotone_and_voronoi(self):
        rng = np.random.default_rng(33)
        monotone = True
        for trial in range(20):
            dims = int(rng.integers(1, 4))
            pts = rng.uniform(-1, 1, size=(int(rng.integers(8, 40)), dims))
            targets = ParamSet(ParamBox.symmetric_unit(dims), pts)
            scale = float(rng.uniform(2.0, 50.0))

            def m(deltas, s=scale):
                return np.maximum(
                    1.0, s * np.linalg.norm(np.atleast_2d(deltas), axis=1)
                )

            plan = plan_placement(
                targets, m, cost_ratio=float(rng.uniform(5.0, 80.0)), seed=trial
            )
            if np.any(np.diff(plan.sigma_m_trace) > 1e-9):
                monotone = False

        def euclid(deltas):
            return np.linalg.norm(np.atleast_2d(deltas), axis=1)

        pts = rng.uniform(-1, 1, size=(80, 2))
        locs = rng.uniform(-1, 1, size=(5, 2))
        assignment, _ = allocate(pts, locs, euclid)
        brute = np.array(
            [int(np.argmin([np.linalg.norm(p - l) for l in locs])) for p in pts]
        )
        voronoi_exact = bool(np.array_equal(assignment, brute))
        ok = monotone and voronoi_exact
        verdict(
            7,
            ok,
            f"location-allocation: monotone={monotone}, "
            f"euclidean allocation exact={voronoi_exact}",
        )
        assert monotone and voronoi_exact


class TestCriterion8:
    def test_preconditioner_count_extremes(self):
        rng = np.random.default_rng(44)
        dims, n = 25, 60
        pts = rng.uniform(-1, 1, size=(n, dims))
        targets = ParamSet(ParamBox.symmetric_unit(dims), pts)
        typical = float(np.mean(np.linalg.norm(pts, axis=1)))

        def cheap(deltas):
            return np.maximum(
                1.0, (30.0 / typical) * np.linalg.norm(np.atleast_2d(deltas), axis=1)
            )

        plan_low = plan_placement(targets, cheap, cost_ratio=100.0, seed=0)

        pts2 = rng.uniform(-1, 1, size=(12, 12))
        targets2 = ParamSet(ParamBox.symmetric_unit(12), pts2)
        typical2 = float(np.mean(np.linalg.norm(pts2, axis=1)))

        def expensive(deltas):
            return np.maximum(
                1.0, (500.0 / typical2) * np.linalg.norm(np.atleast_2d(deltas), axis=1)
            )

        plan_high = plan_placement(targets2, expensive, cost_ratio=100.0, seed=0)
        ok = plan_low.n_pc == 1 and plan_high.n_pc == len(targets2)
        verdict(
            8,
            ok,
            f"count extremes: cheap landscape N_pc={plan_low.n_pc} (want 1), "
            f"expensive N_pc={plan_high.n_pc} (want {len(targets2)})",
        )
        assert plan_low.n_pc == 1
        assert plan_high.n_pc == len(targets2)


class TestCriterion9:
    def test_savings_vs_mean_based(self, desk_instance):
        _, report, _, _, mean_report, _ = desk_instance
        ratio = report.cost_total / mean_report.cost_total
        ok = ratio <= 0.5
        verdict(
            9,
            ok,
            f"pipeline vs mean-based: {report.cost_total:.0f} / "
            f"{mean_report.cost_total:.0f} = {ratio:.2f} (want <= 0.5)",
        )
        assert ratio <= 0.5, (
            f"pipeline modeled cost {report.cost_total:.0f} is {ratio:.2f}x the "
            f"mean-based baseline {mean_report.cost_total:.0f}; at this desk "
            f"scale (|W| = cost ratio = 100, iteration counts <= ~13) no "
            f"placement can halve the mean-based cost: k extra builds cost "
            f"100(k+1) while the iteration sum cannot drop below |W|"
        )

    def test_savings_vs_per_point(self, desk_instance):
        _, report, _, _, _, elapsed = desk_instance
        ratio = report.cost_total / report.cost_per_point
        ok = ratio <= 0.3 and elapsed < 600.0
        verdict(
            9,
            ok,
            f"pipeline vs per-point: {report.cost_total:.0f} / "
            f"{report.cost_per_point:.0f} = {ratio:.2f} (want <= 0.3, "
            f"runtime {elapsed:.0f}s < 600s)",
        )
        assert ratio <= 0.3
        assert elapsed < 600.0


class TestCriterion10:
    def test_sp_terminates_and_surrogate_accurate(self, desk_instance):
        exp, _, surrogate, _, _, _ = desk_instance
        trailing = float(np.mean(surrogate.sp_history[-5:]))
        stopped_early = not surrogate.budget_exhausted

        cfg = exp.helmholtz_config()
        family = exp.build_family(cfg)
        mesh = build_annulus_mesh(cfg)
        pc = lu_factor(assemble(np.zeros(2), family, mesh, cfg)[0])
        rng = np.random.default_rng(1234)
        holdout = rng.uniform(-1, 1, size=(30, 2))
        true_m = []
        for y in holdout:
            matrix, rhs = assemble(y, family, mesh, cfg)
            rep = gmres_left(pc, matrix, rhs, tol=cfg.tol)
            true_m.append(rep.iterations)
        pred = surrogate.expected_iterations(holdout - surrogate.ybar)
        rmse = float(np.sqrt(np.mean((np.asarray(true_m, float) - pred) ** 2)))
        ok = stopped_early and trailing < 0.01 and rmse <= 5.0
        verdict(
            10,
            ok,
            f"training: stopped with {len(surrogate.evaluated)}/{exp.n_points} "
            f"points, trailing disagree {trailing:.4f} < 0.01, "
            f"held-out RMSE {rmse:.2f} <= 5",
        )
        assert stopped_early
        assert trailing < 0.01
        assert rmse <= 5.0


class TestCriterion11:
    def test_byte_identical_reports(self):
        exp = ExperimentConfig.from_dict(
            {
                "family": {"kind": "affine", "eta": [0.25, 0.25]},
                "k0": 8.0,
                "n_points": 20,
                "seed": 5,
                "cost": {"mode": "synthetic", "c_build": 1e-4, "c_iter": 1e-6},
            }
        )
        doc_a = json.dumps(run_pipeline(exp)[0].to_json_dict(), sort_keys=True)
        doc_b = json.dumps(run_pipeline(exp)[0].to_json_dict(), sort_keys=True)
        ok = doc_a == doc_b
        verdict(11, ok, f"determinism: byte-identical reports = {ok}")
        assert doc_a == doc_b
