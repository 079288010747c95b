"""Quadratically regularized masked transport solved through its smooth dual.

The 1x1 problem is the frozen analytic anchor: with unit masses, zero cost
and weight eps the dual is z - z^2/(4 eps) for z = phi + psi, maximized at
z = 2 eps with value eps and recovered plan [[1]].
"""

from __future__ import annotations

import numpy as np
import pytest

from kpg_ot import (
    CostMatrix,
    MassMismatchAtKeypoint,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    build_mask,
    KeypointPairing,
    make_distribution,
    solve_dual,
)
from kpg_ot.dual import (
    PotentialPair,
    dual_gradient,
    dual_objective,
    l2_regularized_objective,
    recover_plan,
)

from conftest import masked_instance
from oracles import (
    dual_value_loops,
    l2_objective_loops,
    qp_masked_reference,
    recovered_plan_loops,
)

EPS = 0.05


def _potentials(inst, seed):
    rng = np.random.default_rng(seed + 100)
    phi = rng.uniform(0.1, 0.6, size=inst["source"].count)
    psi = rng.uniform(0.1, 0.6, size=inst["target"].count)
    return phi, psi


def _unpack(inst):
    return inst["source"], inst["target"], inst["cost"], inst["mask"]


class TestClosedForm1x1:
    def test_solver_attains_the_analytic_optimum(self):
        src = make_distribution(np.zeros((1, 1)), np.array([1.0]), normalize=False)
        tgt = make_distribution(np.ones((1, 1)), np.array([1.0]), normalize=False)
        cost = CostMatrix(np.zeros((1, 1)))
        mask = build_mask(1, 1, KeypointPairing(()))
        eps = 0.3
        cfg = SolverConfig(epsilon=eps, tolerance=1e-12)
        plan, pot = solve_dual(src, tgt, cost, mask, cfg)
        assert plan.converged
        assert pot.dual_objective == pytest.approx(eps, abs=1e-9)
        assert float(pot.phi[0] + pot.psi[0]) == pytest.approx(2.0 * eps, abs=1e-9)
        np.testing.assert_allclose(plan.values, [[1.0]], atol=1e-9)
        assert plan.solver_tag is SolverTag.DUAL_ASCENT

    def test_analytic_value_via_the_objective_function(self):
        src = make_distribution(np.zeros((1, 1)), np.array([1.0]), normalize=False)
        tgt = make_distribution(np.ones((1, 1)), np.array([1.0]), normalize=False)
        cost = CostMatrix(np.zeros((1, 1)))
        mask = build_mask(1, 1, KeypointPairing(()))
        eps = 0.3
        val = dual_objective(np.array([eps]), np.array([eps]), src, tgt, cost, mask, eps)
        assert val == pytest.approx(eps, abs=1e-15)


class TestFormulaPieces:
    @pytest.mark.parametrize("seed", [2, 3, 6, 9])
    def test_dual_objective_matches_scalar_loops(self, seed):
        inst = masked_instance(seed, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        phi, psi = _potentials(inst, seed)
        fast = dual_objective(phi, psi, src, tgt, cost, mask, EPS)
        slow = dual_value_loops(phi, psi, src.weights, tgt.weights,
                                cost.values, mask.values, EPS)
        assert fast == pytest.approx(slow, abs=1e-12)

    @pytest.mark.parametrize("seed", [2, 3, 6, 9])
    def test_recovered_plan_matches_scalar_loops(self, seed):
        inst = masked_instance(seed, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        phi, psi = _potentials(inst, seed)
        fast = recover_plan(phi, psi, src, tgt, cost, mask, EPS)
        slow = recovered_plan_loops(phi, psi, src.weights, tgt.weights,
                                    cost.values, mask.values, EPS)
        np.testing.assert_allclose(fast, slow, rtol=0.0, atol=1e-14)
        assert np.all(fast[mask.values == 0.0] == 0.0)

    @pytest.mark.parametrize("seed", [2, 3, 6, 9])
    def test_regularized_primal_matches_scalar_loops(self, seed):
        inst = masked_instance(seed, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        rng = np.random.default_rng(seed)
        P = mask.values * rng.uniform(0.0, 0.2, size=mask.shape)
        fast = l2_regularized_objective(P, src, tgt, cost, mask, EPS)
        slow = l2_objective_loops(P, src.weights, tgt.weights,
                                  cost.values, mask.values, EPS)
        assert fast == pytest.approx(slow, abs=1e-12)

    @pytest.mark.parametrize("seed", [2, 3, 6, 9])
    def test_gradient_matches_central_differences(self, seed):
        inst = masked_instance(seed, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        phi, psi = _potentials(inst, seed)
        # stay well clear of the hinge so the finite difference is clean
        slack = phi[:, None] + psi[None, :] - cost.values
        assert np.min(np.abs(slack[mask.values > 0.0])) > 1e-3
        gphi, gpsi = dual_gradient(phi, psi, src, tgt, cost, mask, EPS)
        h = 1e-6

        def d(a, b):
            return dual_objective(a, b, src, tgt, cost, mask, EPS)

        for i in range(phi.shape[0]):
            e = np.zeros_like(phi)
            e[i] = h
            fd = (d(phi + e, psi) - d(phi - e, psi)) / (2.0 * h)
            assert gphi[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)
        for j in range(psi.shape[0]):
            e = np.zeros_like(psi)
            e[j] = h
            fd = (d(phi, psi + e) - d(phi, psi - e)) / (2.0 * h)
            assert gpsi[j] == pytest.approx(fd, rel=1e-5, abs=1e-8)

    @pytest.mark.parametrize("seed", [2, 3, 6, 9])
    def test_gap_identity(self, seed):
        # primal(P(phi,psi)) - D(phi,psi) == -<phi,g_phi> - <psi,g_psi>
        inst = masked_instance(seed, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        phi, psi = _potentials(inst, seed)
        P = recover_plan(phi, psi, src, tgt, cost, mask, EPS)
        primal = l2_regularized_objective(P, src, tgt, cost, mask, EPS)
        dual = dual_objective(phi, psi, src, tgt, cost, mask, EPS)
        gphi, gpsi = dual_gradient(phi, psi, src, tgt, cost, mask, EPS)
        identity = -float(phi @ gphi) - float(psi @ gpsi)
        assert primal - dual == pytest.approx(identity, abs=1e-12)


class TestSolver:
    @pytest.mark.parametrize("seed,m,n,n_kp", [(0, 5, 6, 1), (1, 6, 5, 2), (2, 7, 7, 2)])
    def test_agrees_with_interior_point_qp(self, seed, m, n, n_kp):
        inst = masked_instance(seed, m, n, n_kp)
        src, tgt, cost, mask = _unpack(inst)
        cfg = SolverConfig(epsilon=EPS, max_iterations=100_000, tolerance=1e-8)
        plan, pot = solve_dual(src, tgt, cost, mask, cfg)
        assert plan.converged
        qp_value, _ = qp_masked_reference(
            src.weights, tgt.weights, cost.values, mask.values, EPS
        )
        # weak duality up to the reference solver's own accuracy, and a
        # gap small enough to certify near-optimality on both sides
        assert pot.dual_objective <= qp_value + 1e-6
        assert qp_value - pot.dual_objective <= 1e-4
        primal = l2_regularized_objective(plan.values, src, tgt, cost, mask, EPS)
        assert abs(primal - qp_value) <= 1e-4

    def test_marginals_and_keypoints_within_tolerance(self):
        inst = masked_instance(4, 6, 7, 2)
        src, tgt, cost, mask = _unpack(inst)
        cfg = SolverConfig(epsilon=EPS, max_iterations=100_000, tolerance=1e-8)
        plan, _ = solve_dual(src, tgt, cost, mask, cfg)
        assert plan.converged
        assert plan.row_marginal_error <= 10.0 * cfg.tolerance
        assert plan.col_marginal_error <= 10.0 * cfg.tolerance
        p = src.weights
        for i, j in inst["keypoints"].pairs:
            assert plan.values[i, j] == pytest.approx(p[i], abs=10.0 * cfg.tolerance)
        assert np.all(plan.values[mask.values == 0.0] == 0.0)

    def test_iteration_budget_reports_not_converged(self):
        inst = masked_instance(0, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        cfg = SolverConfig(epsilon=EPS, max_iterations=2, tolerance=1e-12)
        plan, pot = solve_dual(src, tgt, cost, mask, cfg)
        assert not plan.converged
        assert not pot.converged
        assert plan.iterations == 2

    def test_dual_values_never_decrease_across_tolerances(self):
        # a looser stop is dominated by a tighter one on the same instance
        inst = masked_instance(1, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        loose = solve_dual(src, tgt, cost, mask,
                           SolverConfig(epsilon=EPS, tolerance=1e-4))[1]
        tight = solve_dual(src, tgt, cost, mask,
                           SolverConfig(epsilon=EPS, max_iterations=100_000,
                                        tolerance=1e-8))[1]
        assert tight.dual_objective >= loose.dual_objective - 1e-12

    def test_potential_pair_fields(self):
        pot = PotentialPair(phi=np.zeros(2), psi=np.zeros(3), dual_objective=0.5)
        assert pot.iterations == 0
        assert pot.converged

    def test_keypoint_mass_mismatch_rejected(self):
        src = make_distribution(np.zeros((3, 2)), np.array([0.5, 0.3, 0.2]), normalize=False)
        tgt = make_distribution(np.ones((3, 2)), np.array([0.4, 0.4, 0.2]), normalize=False)
        kp = KeypointPairing(((0, 0),))
        with pytest.raises(MassMismatchAtKeypoint):
            solve_dual(src, tgt, CostMatrix(np.zeros((3, 3))), build_mask(3, 3, kp))

    def test_shape_errors(self):
        inst = masked_instance(0, 5, 6, 1)
        src, tgt, cost, mask = _unpack(inst)
        with pytest.raises(ShapeMismatch):
            dual_objective(np.zeros(4), np.zeros(6), src, tgt, cost, mask, EPS)
        with pytest.raises(ShapeMismatch):
            recover_plan(np.zeros(5), np.zeros(7), src, tgt, cost, mask, EPS)
        with pytest.raises(ShapeMismatch):
            l2_regularized_objective(np.zeros((4, 6)), src, tgt, cost, mask, EPS)
        with pytest.raises(ShapeMismatch):
            solve_dual(src, tgt, CostMatrix(np.zeros((4, 6))), mask)
