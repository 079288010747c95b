"""Exact masked transport by network simplex, and the guided LP solvers.

The masked polytope decomposes into the isolated keypoint cells (whose
values are forced) plus one complete bipartite block on the remaining rows
and columns; that block is handed to the transportation-simplex kernel.
Solutions are vertices: at most m + n - 1 positive entries, a permutation
support for uniform square problems.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from ._backend import solve_transportation
from .core import (
    CostMatrix,
    DiscreteDistribution,
    Divergence,
    InvalidParameters,
    KeypointPairing,
    MaskMatrix,
    RelationMode,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    TransportPlan,
    _finalize_plan,
)
from .masking import _check_feasibility_values, _pairs_list, build_mask
from .relation import guiding_matrix, relation_scores

__all__ = ["Backend", "lp_masked", "solve_kpg_rl", "solve_kpg_rl_kp"]


class Backend(str, Enum):
    """Which masked-transport solver a pipeline should run."""

    LP = "lp"
    SINKHORN = "sinkhorn"


def _lp_masked_values(p, q, cost, mask_values, pairs):
    """Solve the masked program on raw arrays; returns (plan_values, pivots)."""
    m, n = mask_values.shape
    plan = np.zeros((m, n))
    for i, j in pairs:
        plan[i, j] = p[i]
    src_idx = set(i for i, _ in pairs)
    tgt_idx = set(j for _, j in pairs)
    free_r = [i for i in range(m) if i not in src_idx]
    free_c = [j for j in range(n) if j not in tgt_idx]
    pivots = 0
    if free_r and free_c:
        sub_cost = np.ascontiguousarray(cost[np.ix_(free_r, free_c)])
        flows, pivots = solve_transportation(sub_cost, p[free_r], q[free_c])
        plan[np.ix_(free_r, free_c)] = flows
    return plan, pivots


def lp_masked(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    objective: CostMatrix,
    mask: MaskMatrix,
) -> TransportPlan:
    """Exact minimizer of <plan, objective> over the masked transport polytope.

    Deterministic (Bland's rule in the simplex kernel) and exact: the
    result is a vertex with at most m + n - 1 positive entries, keypoint
    cells carry exactly p_i, and off-mask cells are exactly zero.
    """
    p, q = source.weights, target.weights
    m, n = source.count, target.count
    if objective.shape != (m, n) or mask.shape != (m, n):
        raise ShapeMismatch(
            f"objective {objective.shape} and mask {mask.shape} must both be ({m}, {n})"
        )
    pairs = _pairs_list(mask.values)
    _check_feasibility_values(p, q, pairs)
    plan, pivots = _lp_masked_values(p, q, objective.values, mask.values, pairs)
    return _finalize_plan(
        plan, p, q, objective.values, mask.values, pairs, SolverTag.LP, pivots, True
    )


def _guidance(source_intra, target_intra, keypoints, cfg) -> CostMatrix:
    """Relation scores on both sides, compared under cfg.divergence."""
    mode = RelationMode.RAW_DIST if cfg.divergence is Divergence.RAW_DIST else RelationMode.SOFTMAX
    rel_s = relation_scores(source_intra, keypoints.source_indices, cfg.rho, mode)
    rel_t = relation_scores(target_intra, keypoints.target_indices, cfg.rho, mode)
    return guiding_matrix(rel_s, rel_t, cfg.divergence)


def _dispatch_masked(source, target, objective, mask, cfg, backend):
    if backend is Backend.LP:
        return lp_masked(source, target, objective, mask)
    if backend is Backend.SINKHORN:
        from .sinkhorn import sinkhorn_masked_log

        return sinkhorn_masked_log(source, target, objective, mask, cfg)
    raise InvalidParameters(f"unknown backend {backend!r}")


def solve_kpg_rl(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    source_intra: CostMatrix,
    target_intra: CostMatrix,
    keypoints: KeypointPairing,
    cfg: SolverConfig = SolverConfig(),
    backend: Backend = Backend.LP,
) -> TransportPlan:
    """Keypoint-guided transport on the relation objective.

    Builds relation scores from each domain's intra-costs, compares them
    under ``cfg.divergence`` to obtain the guiding matrix, constrains the
    plan with the keypoint mask, and minimizes with the chosen backend
    (exact LP, or log-domain Sinkhorn with weight ``cfg.epsilon``).
    """
    guide = _guidance(source_intra, target_intra, keypoints, cfg)
    mask = build_mask(source.count, target.count, keypoints)
    return _dispatch_masked(source, target, guide, mask, cfg, backend)


def solve_kpg_rl_kp(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    cross_cost: CostMatrix,
    source_intra: CostMatrix,
    target_intra: CostMatrix,
    keypoints: KeypointPairing,
    cfg: SolverConfig = SolverConfig(),
    alpha: float | None = None,
    backend: Backend = Backend.LP,
) -> TransportPlan:
    """Keypoint-guided transport on the blended objective alpha*C + (1-alpha)*G.

    ``alpha`` must lie strictly inside (0, 1); it defaults to ``cfg.alpha``.
    The alpha -> 1 limit approaches plain masked transport on ``cross_cost``
    and the alpha -> 0 limit approaches :func:`solve_kpg_rl`.
    """
    a = cfg.alpha if alpha is None else float(alpha)
    if not (0.0 < a < 1.0):
        raise InvalidParameters("alpha must lie in (0, 1)")
    m, n = source.count, target.count
    if cross_cost.shape != (m, n):
        raise ShapeMismatch(f"cross cost must be ({m}, {n}), got {cross_cost.shape}")
    guide = _guidance(source_intra, target_intra, keypoints, cfg)
    blended = CostMatrix(values=a * cross_cost.values + (1.0 - a) * guide.values)
    mask = build_mask(m, n, keypoints)
    return _dispatch_masked(source, target, blended, mask, cfg, backend)
