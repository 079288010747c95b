"""Distortion gradient factorization and the Frank-Wolfe blended solver."""

from __future__ import annotations

import numpy as np
import pytest

from kpg_ot import (
    Backend,
    CostMatrix,
    EmptyKeypoints,
    InvalidParameters,
    KeypointPairing,
    MassMismatchAtKeypoint,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    TransportPlan,
    guiding_matrix,
    make_distribution,
    pairwise_cost,
    relation_scores,
    solve_kpg_rl_gw,
)
from kpg_ot.gromov import gw_gradient

from conftest import points_instance
from oracles import gw_distortion_loops


def _random_setup(seed, m, n, dim=2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, dim))
    Y = rng.normal(size=(n, dim))
    Cs = pairwise_cost(X, X)
    Ct = pairwise_cost(Y, Y)
    P = rng.uniform(0.0, 1.0, size=(m, n))
    P /= P.sum()
    return Cs, Ct, P


class TestGradient:
    @pytest.mark.parametrize("seed,m,n", [(0, 4, 5), (1, 5, 4), (2, 6, 6)])
    def test_factorized_matches_quadruple_loop(self, seed, m, n):
        Cs, Ct, P = _random_setup(seed, m, n)
        fast = gw_gradient(P, Cs, Ct)
        slow = gw_gradient(P, Cs, Ct, naive=True)
        np.testing.assert_allclose(fast, slow, rtol=0.0, atol=1e-10)

    def test_transport_plan_and_array_inputs_agree(self):
        Cs, Ct, P = _random_setup(3, 4, 4)
        plan = TransportPlan(
            values=P,
            row_marginal_error=0.0,
            col_marginal_error=0.0,
            objective=0.0,
            solver_tag=SolverTag.LP,
            iterations=0,
            converged=True,
        )
        assert np.array_equal(gw_gradient(plan, Cs, Ct), gw_gradient(P, Cs, Ct))

    def test_distortion_is_half_plan_dot_gradient(self):
        # <P, grad>/2 must equal the scalar quadruple-loop distortion
        for seed in range(3):
            Cs, Ct, P = _random_setup(seed, 5, 4)
            value = 0.5 * float(np.sum(P * gw_gradient(P, Cs, Ct)))
            assert value == pytest.approx(
                gw_distortion_loops(P, Cs.values, Ct.values), abs=1e-10
            )

    def test_rejects_non_square_intra(self):
        bad = CostMatrix(np.ones((3, 4)))
        Ct = CostMatrix(np.zeros((4, 4)))
        with pytest.raises(ShapeMismatch):
            gw_gradient(np.ones((3, 4)) / 12, bad, Ct)

    def test_rejects_asymmetric_intra(self):
        Cs = CostMatrix(np.array([[0.0, 1.0, 2.0], [1.5, 0.0, 1.0], [2.0, 1.0, 0.0]]))
        Ct = CostMatrix(np.zeros((4, 4)))
        with pytest.raises(InvalidParameters):
            gw_gradient(np.ones((3, 4)) / 12, Cs, Ct)

    def test_rejects_plan_size_mismatch(self):
        Cs, Ct, _ = _random_setup(0, 4, 5)
        with pytest.raises(ShapeMismatch):
            gw_gradient(np.ones((3, 5)) / 15, Cs, Ct)


class TestSolver:
    def test_keypoints_pinned_and_mask_respected(self):
        inst = points_instance(7, 6, 7, 2)
        plan, trace = solve_kpg_rl_gw(
            inst["source"],
            inst["target"],
            inst["source_intra"],
            inst["target_intra"],
            inst["keypoints"],
            alpha=0.5,
        )
        p = inst["source"].weights
        for i, j in inst["keypoints"].pairs:
            assert plan.values[i, j] == p[i]
        assert np.all(plan.values[inst["mask"].values == 0.0] == 0.0)
        assert plan.row_marginal_error <= 1e-9
        assert plan.col_marginal_error <= 1e-9
        assert plan.solver_tag is SolverTag.FRANK_WOLFE

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0])
    def test_trace_non_increasing_and_steps_in_unit_interval(self, seed, alpha):
        inst = points_instance(seed, 5, 5, 1)
        plan, trace = solve_kpg_rl_gw(
            inst["source"],
            inst["target"],
            inst["source_intra"],
            inst["target_intra"],
            inst["keypoints"],
            alpha=alpha,
        )
        vals = trace.objective_values
        assert len(vals) >= 1
        for prev, nxt in zip(vals, vals[1:]):
            assert nxt <= prev + 1e-10 * max(1.0, abs(prev))
        assert all(0.0 <= s <= 1.0 for s in trace.step_sizes)
        assert len(trace.step_sizes) == len(vals) - 1
        assert trace.converged
        assert plan.converged

    def test_reported_objective_matches_blend_of_parts(self):
        inst = points_instance(11, 5, 6, 2)
        alpha = 0.4
        cfg = SolverConfig()
        plan, _ = solve_kpg_rl_gw(
            inst["source"],
            inst["target"],
            inst["source_intra"],
            inst["target_intra"],
            inst["keypoints"],
            alpha=alpha,
            cfg=cfg,
        )
        rel_s = relation_scores(
            inst["source_intra"], inst["keypoints"].source_indices, cfg.rho
        )
        rel_t = relation_scores(
            inst["target_intra"], inst["keypoints"].target_indices, cfg.rho
        )
        G = guiding_matrix(rel_s, rel_t, cfg.divergence).values
        distortion = gw_distortion_loops(
            plan.values, inst["source_intra"].values, inst["target_intra"].values
        )
        expected = alpha * distortion + (1.0 - alpha) * float(np.sum(plan.values * G))
        assert plan.objective == pytest.approx(expected, abs=1e-9)

    def test_alpha_one_reports_pure_distortion(self):
        inst = points_instance(2, 5, 5, 1)
        plan, _ = solve_kpg_rl_gw(
            inst["source"],
            inst["target"],
            inst["source_intra"],
            inst["target_intra"],
            inst["keypoints"],
            alpha=1.0,
        )
        distortion = gw_distortion_loops(
            plan.values, inst["source_intra"].values, inst["target_intra"].values
        )
        assert plan.objective == pytest.approx(distortion, abs=1e-10)

    def test_default_alpha_comes_from_config(self):
        inst = points_instance(4, 5, 6, 1)
        cfg = SolverConfig(alpha=0.35)
        args = (
            inst["source"],
            inst["target"],
            inst["source_intra"],
            inst["target_intra"],
            inst["keypoints"],
        )
        plan_default, _ = solve_kpg_rl_gw(*args, cfg=cfg)
        plan_explicit, _ = solve_kpg_rl_gw(*args, alpha=0.35, cfg=cfg)
        assert np.array_equal(plan_default.values, plan_explicit.values)
        assert plan_default.objective == plan_explicit.objective

    @pytest.mark.parametrize("seed", range(6))
    def test_plain_gw_recovers_permuted_cloud(self, seed):
        # a translated, relabeled copy of a cloud is distortion-free under
        # the exact relabeling; the solver should find it
        rng = np.random.default_rng(seed)
        m = 7
        X = rng.normal(size=(m, 2)) * 3.0
        perm = rng.permutation(m)
        Y = X[perm] + np.array([5.0, -2.0])
        src = make_distribution(X)
        tgt = make_distribution(Y)
        plan, _ = solve_kpg_rl_gw(
            src,
            tgt,
            pairwise_cost(src.points, src.points),
            pairwise_cost(tgt.points, tgt.points),
            KeypointPairing(()),
            alpha=1.0,
            cfg=SolverConfig(max_iterations=500, tolerance=1e-14),
        )
        assert abs(plan.objective) <= 1e-6
        for j in range(m):
            assert int(np.argmax(plan.values[:, j])) == int(perm[j])

    def test_empty_pairing_requires_alpha_one(self):
        inst = points_instance(0, 5, 5, 1)
        with pytest.raises(EmptyKeypoints):
            solve_kpg_rl_gw(
                inst["source"],
                inst["target"],
                inst["source_intra"],
                inst["target_intra"],
                KeypointPairing(()),
                alpha=0.5,
            )

    @pytest.mark.parametrize("alpha", [0.0, -0.2, 1.0001, float("nan")])
    def test_alpha_outside_half_open_interval_rejected(self, alpha):
        inst = points_instance(0, 5, 5, 1)
        with pytest.raises(InvalidParameters):
            solve_kpg_rl_gw(
                inst["source"],
                inst["target"],
                inst["source_intra"],
                inst["target_intra"],
                inst["keypoints"],
                alpha=alpha,
            )

    def test_only_exact_linear_oracle_supported(self):
        inst = points_instance(0, 5, 5, 1)
        with pytest.raises(InvalidParameters):
            solve_kpg_rl_gw(
                inst["source"],
                inst["target"],
                inst["source_intra"],
                inst["target_intra"],
                inst["keypoints"],
                lp_backend=Backend.SINKHORN,
            )

    def test_keypoint_mass_mismatch_rejected(self):
        src = make_distribution(np.zeros((3, 2)), np.array([0.5, 0.3, 0.2]), normalize=False)
        tgt = make_distribution(np.ones((3, 2)), np.array([0.4, 0.4, 0.2]), normalize=False)
        intra_s = pairwise_cost(src.points, src.points)
        intra_t = pairwise_cost(tgt.points, tgt.points)
        with pytest.raises(MassMismatchAtKeypoint):
            solve_kpg_rl_gw(
                src, tgt, intra_s, intra_t, KeypointPairing(((0, 0),)), alpha=0.5
            )

    def test_intra_size_must_match_distributions(self):
        inst = points_instance(0, 5, 6, 1)
        wrong = CostMatrix(np.zeros((4, 4)))
        with pytest.raises(ShapeMismatch):
            solve_kpg_rl_gw(
                inst["source"],
                inst["target"],
                wrong,
                inst["target_intra"],
                inst["keypoints"],
            )
