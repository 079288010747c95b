"""Exact masked transport and the guided front ends."""

import numpy as np
import pytest

import oracles
from conftest import masked_instance, points_instance
from kpg_ot import (
    Backend,
    CostMatrix,
    Divergence,
    EmptyKeypoints,
    InfeasibleMask,
    InvalidParameters,
    KeypointPairing,
    MassMismatchAtKeypoint,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    build_mask,
    guiding_matrix,
    lp_masked,
    make_distribution,
    relation_scores,
    solve_kpg_rl,
    solve_kpg_rl_kp,
)


def _dist(weights):
    w = np.asarray(weights, dtype=float)
    return make_distribution(np.zeros((w.shape[0], 1)), w, normalize=False)


class TestFrozenInstances:
    def test_masked_3x3_with_keypoint(self):
        # frozen from the HiGHS cell-wise LP reference
        src = _dist([0.5, 0.3, 0.2])
        tgt = _dist([0.2, 0.5, 0.3])
        cost = CostMatrix(np.array([[0.0, 0.7, 0.3], [0.4, 0.1, 0.5], [0.6, 0.2, 0.8]]))
        kp = KeypointPairing(((0, 1),))
        plan = lp_masked(src, tgt, cost, build_mask(3, 3, kp))
        assert plan.objective == pytest.approx(0.62, abs=1e-12)
        want = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, 0.3], [0.2, 0.0, 0.0]])
        np.testing.assert_allclose(plan.values, want, atol=1e-12)
        assert plan.values[0, 1] == 0.5  # keypoint cell holds exactly p_0
        assert plan.solver_tag is SolverTag.LP
        assert plan.row_marginal_error <= 1e-15
        assert plan.col_marginal_error <= 1e-15

    def test_uniform_4x4_vs_permutations(self):
        # frozen: best admissible permutation is (1, 2, 3, 0) at cost 2.25
        cost = np.array(
            [[4.0, 1.0, 2.0, 7.0],
             [3.0, 6.0, 2.0, 5.0],
             [8.0, 2.0, 9.0, 1.0],
             [5.0, 3.0, 6.0, 2.0]]
        )
        u = _dist([0.25, 0.25, 0.25, 0.25])
        kp = KeypointPairing(((1, 2),))
        plan = lp_masked(u, u, CostMatrix(cost), build_mask(4, 4, kp))
        assert plan.objective == pytest.approx(2.25, abs=1e-12)
        want = np.zeros((4, 4))
        for i, j in enumerate((1, 2, 3, 0)):
            want[i, j] = 0.25
        np.testing.assert_allclose(plan.values, want, atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_matches_generic_lp_reference(seed):
    inst = masked_instance(seed, 7, 6, 2)
    src, tgt, cost, mask = inst["source"], inst["target"], inst["cost"], inst["mask"]
    plan = lp_masked(src, tgt, cost, mask)
    ref_val, _ = oracles.lp_masked_reference(
        src.weights, tgt.weights, cost.values, mask.values
    )
    assert plan.objective == pytest.approx(ref_val, abs=1e-9)
    assert plan.row_marginal_error <= 1e-12
    assert plan.col_marginal_error <= 1e-12


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("n", [3, 5, 6])
def test_uniform_matches_permutation_enumeration(seed, n):
    inst = masked_instance(100 * n + seed, n, n, 1, uniform=True)
    plan = lp_masked(inst["source"], inst["target"], inst["cost"], inst["mask"])
    best, _ = oracles.best_admissible_permutation(inst["cost"].values, inst["mask"].values)
    assert plan.objective == pytest.approx(best, abs=1e-12)


def test_keypoint_cells_bitwise_exact():
    inst = masked_instance(42, 9, 8, 3)
    plan = lp_masked(inst["source"], inst["target"], inst["cost"], inst["mask"])
    for i, j in inst["keypoints"].pairs:
        assert plan.values[i, j] == inst["source"].weights[i]
    off = inst["mask"].values == 0.0
    assert np.all(plan.values[off] == 0.0)


def test_no_keypoints_is_plain_transport():
    rng = np.random.default_rng(5)
    p = rng.uniform(0.5, 1.5, 5)
    q = rng.uniform(0.5, 1.5, 4)
    q *= p.sum() / q.sum()
    src, tgt = _dist(p), _dist(q)
    cost = CostMatrix(rng.uniform(0.0, 1.0, (5, 4)))
    plan = lp_masked(src, tgt, cost, build_mask(5, 4, KeypointPairing(())))
    ref_val, _ = oracles.lp_masked_reference(p, q, cost.values, np.ones((5, 4)))
    assert plan.objective == pytest.approx(ref_val, abs=1e-9)


class TestErrors:
    def test_keypoint_mass_mismatch(self):
        src = _dist([0.6, 0.4])
        tgt = _dist([0.5, 0.5])
        kp = KeypointPairing(((0, 0),))
        with pytest.raises(MassMismatchAtKeypoint):
            lp_masked(src, tgt, CostMatrix(np.ones((2, 2))), build_mask(2, 2, kp))

    def test_free_mass_imbalance(self):
        src = _dist([0.5, 0.3, 0.2])
        tgt = _dist([0.5, 0.3, 0.3])
        kp = KeypointPairing(((0, 0),))
        with pytest.raises(InfeasibleMask):
            lp_masked(src, tgt, CostMatrix(np.ones((3, 3))), build_mask(3, 3, kp))

    def test_implied_singleton_pair_mismatch(self):
        # one keypoint on a 2x2 mask leaves a 1x1 free block, which is
        # itself a forced cell; its mass mismatch is reported as a pair
        # mismatch at the implied pair (1, 1)
        src = _dist([0.5, 0.5])
        tgt = _dist([0.5, 0.6])
        kp = KeypointPairing(((0, 0),))
        with pytest.raises(MassMismatchAtKeypoint) as exc:
            lp_masked(src, tgt, CostMatrix(np.ones((2, 2))), build_mask(2, 2, kp))
        assert exc.value.pair == (1, 1)

    def test_shape_mismatch(self):
        src = _dist([0.5, 0.5])
        tgt = _dist([0.5, 0.5])
        with pytest.raises(ShapeMismatch):
            lp_masked(src, tgt, CostMatrix(np.ones((3, 2))),
                      build_mask(2, 2, KeypointPairing(())))


class TestGuidedFrontEnds:
    def test_solve_kpg_rl_composes_pipeline(self):
        inst = points_instance(7, 6, 6, 2)
        src, tgt = inst["source"], inst["target"]
        kp = inst["keypoints"]
        cfg = SolverConfig()
        plan = solve_kpg_rl(src, tgt, inst["source_intra"], inst["target_intra"], kp, cfg)
        # composing the stages by hand must give the identical plan
        rel_s = relation_scores(inst["source_intra"], kp.source_indices, cfg.rho)
        rel_t = relation_scores(inst["target_intra"], kp.target_indices, cfg.rho)
        guide = guiding_matrix(rel_s, rel_t, cfg.divergence)
        direct = lp_masked(src, tgt, guide, build_mask(src.count, tgt.count, kp))
        np.testing.assert_array_equal(plan.values, direct.values)
        assert plan.objective == direct.objective

    def test_solve_kpg_rl_requires_keypoints(self):
        inst = points_instance(8, 5, 5, 1)
        with pytest.raises(EmptyKeypoints):
            solve_kpg_rl(inst["source"], inst["target"], inst["source_intra"],
                         inst["target_intra"], KeypointPairing(()))

    def test_sinkhorn_backend_tag(self):
        inst = points_instance(9, 5, 5, 1)
        plan = solve_kpg_rl(inst["source"], inst["target"], inst["source_intra"],
                            inst["target_intra"], inst["keypoints"],
                            SolverConfig(epsilon=0.05, tolerance=1e-8),
                            backend=Backend.SINKHORN)
        assert plan.solver_tag is SolverTag.SINKHORN_LOG

    def test_blend_objective_is_convex_combination(self):
        inst = points_instance(11, 6, 6, 2)
        src, tgt, kp = inst["source"], inst["target"], inst["keypoints"]
        cross = CostMatrix(np.random.default_rng(11).uniform(0.0, 1.0, (6, 6)))
        alpha = 0.3
        plan = solve_kpg_rl_kp(src, tgt, cross, inst["source_intra"],
                               inst["target_intra"], kp, alpha=alpha)
        cfg = SolverConfig()
        rel_s = relation_scores(inst["source_intra"], kp.source_indices, cfg.rho)
        rel_t = relation_scores(inst["target_intra"], kp.target_indices, cfg.rho)
        guide = guiding_matrix(rel_s, rel_t, cfg.divergence)
        blend = alpha * cross.values + (1.0 - alpha) * guide.values
        ref_val, _ = oracles.lp_masked_reference(
            src.weights, tgt.weights, blend, inst["mask"].values
        )
        assert plan.objective == pytest.approx(ref_val, abs=1e-9)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
    def test_blend_alpha_must_be_interior(self, alpha):
        inst = points_instance(12, 5, 5, 1)
        cross = CostMatrix(np.ones((5, 5)))
        with pytest.raises(InvalidParameters):
            solve_kpg_rl_kp(inst["source"], inst["target"], cross,
                            inst["source_intra"], inst["target_intra"],
                            inst["keypoints"], alpha=alpha)
