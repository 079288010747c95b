"""Partial keypoint-guided transport via dummy-point augmentation.

A mass budget s < total mass is handled by adding one dummy source point
absorbing the untransported target mass and one dummy target point
absorbing the untransported source mass.  Keypoint rows and columns get no
dummy arc, so their mass must still move to the paired point.  With border
cost xi and corner cost 2*xi + A (A > 0) the corner cell of every optimal
augmented plan is exactly zero and the stripped top-left block solves the
budgeted problem; this requires the keypoint mass on each side to stay
strictly below the budget.

The keypoint-free special case (empty pairing, all-ones mask) is plain
partial transport of the cheapest s units of mass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    CostMatrix,
    DiscreteDistribution,
    InvalidMassBudget,
    InvalidParameters,
    KeypointMassExceedsBudget,
    KeypointPairing,
    MaskMatrix,
    NonPositiveA,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    TheoremViolation,
    TransportPlan,
    _finalize_plan,
)
from .exact import Backend, _guidance, _lp_masked_values
from .masking import _check_feasibility_values, _pairs_list, build_mask

__all__ = ["AugmentedProblem", "augment", "solve_partial_masked", "solve_partial_kpg_rl"]


@dataclass(frozen=True)
class AugmentedProblem:
    """Balanced (m+1) x (n+1) problem equivalent to the budgeted one.

    ``p_bar``/``q_bar`` end with the dummy masses ||q||_1 - s and
    ||p||_1 - s (either may be zero).  ``mask_bar`` is the keypoint mask of
    the augmented shape: dummy arcs exist exactly for non-keypoint rows and
    columns, plus the dummy-dummy corner.
    """

    p_bar: np.ndarray
    q_bar: np.ndarray
    objective_bar: np.ndarray
    mask_bar: MaskMatrix
    keypoints: KeypointPairing
    mass_budget: float
    xi: float
    corner_penalty: float


def augment(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    objective: CostMatrix,
    mask: MaskMatrix,
    keypoints: KeypointPairing,
    mass_budget: float,
    xi: float = 0.0,
    corner_penalty: float = 1.0,
) -> AugmentedProblem:
    """Build the balanced augmented problem for a mass budget.

    Preconditions: ``corner_penalty > 0``; ``0 <= mass_budget <= min`` of
    the two total masses; the keypoint mass on each side is strictly below
    the budget (keypoint rows/columns have no dummy arc, so equality would
    leave them nothing to spare).
    """
    p, q = source.weights, target.weights
    m, n = source.count, target.count
    if objective.shape != (m, n) or mask.shape != (m, n):
        raise ShapeMismatch(
            f"objective {objective.shape} and mask {mask.shape} must both be ({m}, {n})"
        )
    if not (corner_penalty > 0.0):
        raise NonPositiveA("corner_penalty must be strictly positive")
    s = float(mass_budget)
    tp, tq = float(p.sum()), float(q.sum())
    if not (0.0 <= s <= min(tp, tq) + 1e-12):
        raise InvalidMassBudget(
            f"mass budget must lie in [0, min(total masses)] = [0, {min(tp, tq)!r}], got {s!r}"
        )
    mask_pairs = set(_pairs_list(mask.values))
    if mask_pairs != set(keypoints.pairs):
        raise InvalidParameters("mask does not encode the given keypoint pairing")
    if keypoints.pairs:
        kp_p = float(sum(p[i] for i, _ in keypoints.pairs))
        kp_q = float(sum(q[j] for _, j in keypoints.pairs))
        if not (kp_p < s):
            raise KeypointMassExceedsBudget(
                f"source keypoint mass {kp_p!r} must stay strictly below the budget {s!r}"
            )
        if not (kp_q < s):
            raise KeypointMassExceedsBudget(
                f"target keypoint mass {kp_q!r} must stay strictly below the budget {s!r}"
            )
    p_bar = np.concatenate([p, [max(tq - s, 0.0)]])
    q_bar = np.concatenate([q, [max(tp - s, 0.0)]])
    G_bar = np.full((m + 1, n + 1), xi)
    G_bar[:m, :n] = objective.values
    G_bar[m, n] = 2.0 * xi + corner_penalty
    mask_bar = build_mask(m + 1, n + 1, keypoints)
    return AugmentedProblem(
        p_bar=p_bar,
        q_bar=q_bar,
        objective_bar=G_bar,
        mask_bar=mask_bar,
        keypoints=keypoints,
        mass_budget=s,
        xi=float(xi),
        corner_penalty=float(corner_penalty),
    )


def solve_partial_masked(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    objective: CostMatrix,
    mask: MaskMatrix,
    keypoints: KeypointPairing,
    mass_budget: float,
    cfg: SolverConfig = SolverConfig(),
    backend: Backend = Backend.LP,
    xi: float = 0.0,
    corner_penalty: float = 1.0,
) -> TransportPlan:
    """Transport exactly ``mass_budget`` units, keypoint rows in full.

    Solves the augmented balanced problem and strips the dummy row and
    column.  Row sums never exceed p, column sums never exceed q, the
    transported total equals the budget, and keypoint cells carry exactly
    p_i.  With the LP backend the dummy-dummy corner of the augmented
    solution is exactly zero; these guarantees are re-checked on exit and
    a failure raises :class:`TheoremViolation`.

    The reported marginal errors measure the untransported remainders
    ``max|row sums - p|`` and ``max|col sums - q|``; the objective is
    evaluated over the real cells only.
    """
    aug = augment(source, target, objective, mask, keypoints, mass_budget, xi, corner_penalty)
    p, q = source.weights, target.weights
    m, n = source.count, target.count
    pairs = list(keypoints.pairs)
    aug_pairs = _pairs_list(aug.mask_bar.values)
    _check_feasibility_values(aug.p_bar, aug.q_bar, aug_pairs)

    if backend is Backend.LP:
        vals, iters = _lp_masked_values(
            aug.p_bar, aug.q_bar, aug.objective_bar, aug.mask_bar.values, aug_pairs
        )
        converged = True
    elif backend is Backend.SINKHORN:
        from .sinkhorn import _resolve_epsilon, _sinkhorn_log_values

        eps = _resolve_epsilon(cfg, aug.objective_bar)
        if eps > corner_penalty / 10.0:
            warnings.warn(
                f"epsilon {eps!r} exceeds corner_penalty/10 = {corner_penalty / 10.0!r}; "
                "dummy routing becomes diffuse and the stripped block only "
                "approximates the budgeted solution",
                RuntimeWarning,
                stacklevel=2,
            )
        vals, iters, converged = _sinkhorn_log_values(
            aug.p_bar, aug.q_bar, aug.objective_bar, aug.mask_bar.values, cfg
        )
        for i, j in aug_pairs:
            vals[i, j] = aug.p_bar[i]
    else:
        raise InvalidParameters(f"unknown backend {backend!r}")

    block = np.array(vals[:m, :n])
    corner = float(vals[m, n])
    s = aug.mass_budget

    if backend is Backend.LP:
        if corner != 0.0:
            raise TheoremViolation(f"augmented corner cell must be exactly 0, got {corner!r}")
        total_tol = 1e-9
    else:
        total_tol = max(1e-9, 10.0 * (m + n) * cfg.tolerance)
    total = float(block.sum())
    if abs(total - s) > total_tol:
        raise TheoremViolation(f"transported mass {total!r} differs from the budget {s!r}")
    if np.any(block.sum(axis=1) > p + total_tol) or np.any(block.sum(axis=0) > q + total_tol):
        raise TheoremViolation("a transported marginal exceeds its available mass")

    return _finalize_plan(
        block,
        p,
        q,
        objective.values,
        mask.values,
        pairs,
        SolverTag.LP if backend is Backend.LP else SolverTag.SINKHORN_LOG,
        iters,
        converged,
    )


def solve_partial_kpg_rl(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    source_intra: CostMatrix,
    target_intra: CostMatrix,
    keypoints: KeypointPairing,
    mass_budget: float,
    cfg: SolverConfig = SolverConfig(),
    backend: Backend = Backend.LP,
    xi: float = 0.0,
    corner_penalty: float = 1.0,
) -> TransportPlan:
    """Budgeted keypoint-guided transport on the relation objective."""
    guide = _guidance(source_intra, target_intra, keypoints, cfg)
    mask = build_mask(source.count, target.count, keypoints)
    return solve_partial_masked(
        source, target, guide, mask, keypoints, mass_budget, cfg, backend, xi, corner_penalty
    )
