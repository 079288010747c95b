"""Entropic masked transport: Sinkhorn scaling in linear and log domain.

The masked kernel is K = mask * exp(-objective / epsilon); alternating
scalings u = p / (K v), v = q / (K^T u) converge to the entropic optimum
over the masked polytope.  Iterations stop when the max-norm marginal
violation of the current rescaled plan drops below ``cfg.tolerance`` or
after ``cfg.max_iterations`` sweeps, whichever comes first; the plan is
returned either way with its ``converged`` flag set accordingly.

The linear-domain kernel underflows once objective / epsilon is large
(around 750); :func:`sinkhorn_masked_log` runs the same fixed point on log
potentials and handles those regimes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import (
    CostMatrix,
    DiscreteDistribution,
    MaskMatrix,
    NumericalUnderflow,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    TransportPlan,
    _finalize_plan,
)
from .masking import _check_feasibility_values, _pairs_list

__all__ = ["sinkhorn_masked", "sinkhorn_masked_log"]


def _resolve_epsilon(cfg: SolverConfig, objective_values: np.ndarray) -> float:
    if cfg.relative_epsilon:
        scale = float(objective_values.max())
        return cfg.epsilon * (scale if scale > 0 else 1.0)
    return cfg.epsilon


def _validate(source, target, objective, mask):
    m, n = source.count, target.count
    if objective.shape != (m, n) or mask.shape != (m, n):
        raise ShapeMismatch(
            f"objective {objective.shape} and mask {mask.shape} must both be ({m}, {n})"
        )
    pairs = _pairs_list(mask.values)
    _check_feasibility_values(source.weights, target.weights, pairs)
    return pairs


def sinkhorn_masked(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    objective: CostMatrix,
    mask: MaskMatrix,
    cfg: SolverConfig = SolverConfig(),
    on_iteration=None,
) -> TransportPlan:
    """Linear-domain Sinkhorn on the masked kernel.

    Raises :class:`NumericalUnderflow` when the kernel loses an entire row
    or column to underflow (epsilon too small for this domain); the
    log-domain variant handles those cases.  ``on_iteration``, when given,
    receives ``(iteration, row_error, col_error)`` after every sweep.
    """
    pairs = _validate(source, target, objective, mask)
    p, q = source.weights, target.weights
    vals, iters, converged = _sinkhorn_linear_values(
        p, q, objective.values, mask.values, cfg, on_iteration
    )
    return _finalize_plan(
        vals, p, q, objective.values, mask.values, pairs, SolverTag.SINKHORN, iters, converged
    )


def _sinkhorn_linear_values(p, q, obj, maskv, cfg, on_iteration=None):
    eps = _resolve_epsilon(cfg, obj)
    with np.errstate(under="ignore"):
        K = maskv * np.exp(-obj / eps)
    if np.any(K.sum(axis=1) == 0.0) or np.any(K.sum(axis=0) == 0.0):
        raise NumericalUnderflow(
            "masked kernel lost a full row or column to underflow; "
            "decrease objective/epsilon or use sinkhorn_masked_log"
        )
    m, n = K.shape
    v = np.ones(n)
    plan = K
    iters = 0
    converged = False
    # Intermediate inf/nan here is an expected signal that this domain needs
    # the log variant; it is converted into NumericalUnderflow below, so the
    # raw floating-point warnings would only be noise to the caller.
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        for it in range(1, cfg.max_iterations + 1):
            Kv = K @ v
            if np.any(Kv == 0.0):
                raise NumericalUnderflow("scaling vector underflowed; use sinkhorn_masked_log")
            u = p / Kv
            Ktu = K.T @ u
            if np.any(Ktu == 0.0):
                raise NumericalUnderflow("scaling vector underflowed; use sinkhorn_masked_log")
            v = q / Ktu
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise NumericalUnderflow("scaling vectors overflowed; use sinkhorn_masked_log")
            plan = u[:, None] * K * v[None, :]
            row_err = float(np.max(np.abs(plan.sum(axis=1) - p)))
            col_err = float(np.max(np.abs(plan.sum(axis=0) - q)))
            iters = it
            if on_iteration is not None:
                on_iteration(it, row_err, col_err)
            if max(row_err, col_err) < cfg.tolerance:
                converged = True
                break
    return plan, iters, converged


def sinkhorn_masked_log(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    objective: CostMatrix,
    mask: MaskMatrix,
    cfg: SolverConfig = SolverConfig(),
    on_iteration=None,
) -> TransportPlan:
    """Log-domain Sinkhorn: same fixed point as :func:`sinkhorn_masked`,
    stable for small epsilon.  Masked cells carry -inf log-kernel entries."""
    pairs = _validate(source, target, objective, mask)
    p, q = source.weights, target.weights
    vals, iters, converged = _sinkhorn_log_values(
        p, q, objective.values, mask.values, cfg, on_iteration
    )
    return _finalize_plan(
        vals, p, q, objective.values, mask.values, pairs, SolverTag.SINKHORN_LOG, iters, converged
    )


def _sinkhorn_log_values(p, q, obj, maskv, cfg, on_iteration=None):
    eps = _resolve_epsilon(cfg, obj)
    with np.errstate(divide="ignore"):
        S = -obj / eps + np.log(maskv)  # -inf on masked cells
        logp = np.log(p)
        logq = np.log(q)
    fs = np.zeros(p.shape[0])
    gs = np.zeros(q.shape[0])
    plan = None
    iters = 0
    converged = False
    with np.errstate(under="ignore"):
        for it in range(1, cfg.max_iterations + 1):
            fs = logp - logsumexp(S + gs[None, :], axis=1)
            gs = logq - logsumexp(S + fs[:, None], axis=0)
            plan = np.exp(S + fs[:, None] + gs[None, :])
            row_err = float(np.max(np.abs(plan.sum(axis=1) - p)))
            col_err = float(np.max(np.abs(plan.sum(axis=0) - q)))
            iters = it
            if on_iteration is not None:
                on_iteration(it, row_err, col_err)
            if max(row_err, col_err) < cfg.tolerance:
                converged = True
                break
    return plan, iters, converged
