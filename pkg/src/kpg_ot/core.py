"""Shared domain types for keypoint-guided optimal transport.

Every solver in this package works on the small vocabulary defined here:
discrete distributions, keypoint pairings, cost matrices, binary masks,
solver configuration and transport plans.  Arrays are coerced to
contiguous float64 and frozen (read-only) at construction so instances
can be shared safely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "CostMetric",
    "Divergence",
    "RelationMode",
    "SolverTag",
    "KpgOtError",
    "ShapeMismatch",
    "DimensionMismatch",
    "NonFiniteInput",
    "NonPositiveWeight",
    "IndexOutOfBounds",
    "EmptyKeypoints",
    "IncompatibleMode",
    "NonSimplexRow",
    "Infeasible",
    "MassMismatchAtKeypoint",
    "InfeasibleMask",
    "NumericalUnderflow",
    "KeypointMassExceedsBudget",
    "InvalidMassBudget",
    "NonPositiveA",
    "TheoremViolation",
    "InvalidEta",
    "InvalidParameters",
    "DiscreteDistribution",
    "KeypointPairing",
    "CostMatrix",
    "MaskMatrix",
    "TransportPlan",
    "SolverConfig",
    "make_distribution",
    "pairwise_cost",
]


class CostMetric(str, Enum):
    """Ground metrics available to :func:`pairwise_cost`."""

    SQEUCLIDEAN = "sqeuclidean"
    EUCLIDEAN = "euclidean"


class Divergence(str, Enum):
    """Row-wise discrepancies between relation matrices.

    ``RAW_DIST`` is the ablation mode that compares raw (max-normalized)
    keypoint distances with the L2 distance instead of comparing softmax
    relation rows.
    """

    JS = "js"
    KL_ST = "kl-st"
    KL_TS = "kl-ts"
    L1 = "l1"
    L2 = "l2"
    RAW_DIST = "raw"


class RelationMode(str, Enum):
    SOFTMAX = "softmax"
    RAW_DIST = "raw-dist"


class SolverTag(str, Enum):
    LP = "lp"
    SINKHORN = "sinkhorn"
    SINKHORN_LOG = "sinkhorn-log"
    FRANK_WOLFE = "frank-wolfe"
    DUAL_ASCENT = "dual-ascent"


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


class KpgOtError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(KpgOtError):
    pass


class DimensionMismatch(KpgOtError):
    pass


class NonFiniteInput(KpgOtError):
    pass


class NonPositiveWeight(KpgOtError):
    pass


class IndexOutOfBounds(KpgOtError):
    pass


class EmptyKeypoints(KpgOtError):
    pass


class IncompatibleMode(KpgOtError):
    pass


class NonSimplexRow(KpgOtError):
    pass


class Infeasible(KpgOtError):
    """The masked transport polytope is empty."""


class MassMismatchAtKeypoint(Infeasible):
    """A keypoint pair (i, j) with p_i != q_j; carries the offending pair."""

    def __init__(self, i: int, j: int, p_i: float, q_j: float):
        self.pair = (i, j)
        super().__init__(
            f"keypoint pair (i={i}, j={j}) requires equal masses, "
            f"got p[{i}]={p_i!r} and q[{j}]={q_j!r}"
        )


class InfeasibleMask(Infeasible):
    pass


class NumericalUnderflow(KpgOtError):
    """Linear-domain Sinkhorn kernel underflowed; use the log-domain solver."""


class KeypointMassExceedsBudget(KpgOtError):
    pass


class InvalidMassBudget(KpgOtError):
    pass


class NonPositiveA(KpgOtError):
    pass


class TheoremViolation(KpgOtError):
    """A guaranteed property of a computed solution failed its check."""


class InvalidEta(KpgOtError):
    pass


class InvalidParameters(KpgOtError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _frozen_f64(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDistribution:
    """Weighted point cloud ``(points, weights)`` with strictly positive weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ShapeMismatch(f"points must be (count, dim) with count, dim >= 1, got {pts.shape}")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise ShapeMismatch(f"weights must be ({pts.shape[0]},), got {w.shape}")
        object.__setattr__(self, "points", _frozen_f64(pts, "points"))
        w = _frozen_f64(w, "weights")
        if np.any(w <= 0):
            raise NonPositiveWeight("all weights must be strictly positive")
        object.__setattr__(self, "weights", w)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class KeypointPairing:
    """Matched index pairs ``[(i, j), ...]``: source index i goes with target index j.

    Indices are 0-based.  Source indices must be pairwise distinct, and so
    must target indices.  The pairing may be empty (no guidance).
    """

    pairs: tuple

    def __post_init__(self):
        norm = []
        for pair in self.pairs:
            i, j = pair
            if int(i) != i or int(j) != j or i < 0 or j < 0:
                raise IndexOutOfBounds(f"keypoint indices must be non-negative integers, got {pair!r}")
            norm.append((int(i), int(j)))
        src = [i for i, _ in norm]
        tgt = [j for _, j in norm]
        if len(set(src)) != len(src) or len(set(tgt)) != len(tgt):
            raise InvalidParameters("keypoint indices must be distinct on each side")
        object.__setattr__(self, "pairs", tuple(norm))

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def source_indices(self) -> tuple:
        return tuple(i for i, _ in self.pairs)

    @property
    def target_indices(self) -> tuple:
        return tuple(j for _, j in self.pairs)

    def validate_against(self, source: DiscreteDistribution, target: DiscreteDistribution) -> None:
        """Check index bounds and the per-pair mass equality p_i = q_j (1e-12)."""
        p, q = source.weights, target.weights
        for i, j in self.pairs:
            if i >= source.count or j >= target.count:
                raise IndexOutOfBounds(f"keypoint pair ({i}, {j}) out of bounds for sizes ({source.count}, {target.count})")
            if abs(p[i] - q[j]) > 1e-12:
                raise MassMismatchAtKeypoint(i, j, float(p[i]), float(q[j]))


@dataclass(frozen=True)
class CostMatrix:
    """Non-negative finite cost matrix; intra-domain ones are symmetric with zero diagonal."""

    values: np.ndarray
    intra: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeMismatch(f"cost matrix must be 2-D, got shape {v.shape}")
        v = _frozen_f64(v, "cost matrix")
        if np.any(v < 0):
            raise InvalidParameters("cost matrix entries must be >= 0")
        if self.intra:
            if v.shape[0] != v.shape[1]:
                raise ShapeMismatch("intra-domain cost matrix must be square")
            if not np.allclose(v, v.T, rtol=0.0, atol=1e-12):
                raise InvalidParameters("intra-domain cost matrix must be symmetric")
            if np.any(np.abs(np.diag(v)) > 0):
                raise InvalidParameters("intra-domain cost matrix must have a zero diagonal")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class MaskMatrix:
    """Binary admissibility mask built from a keypoint pairing.

    Structure: entry (i, j) is 1 exactly when (i, j) is a keypoint pair or
    neither i nor j belongs to any pair.  Construct via
    :func:`kpg_ot.masking.build_mask`; direct construction validates the
    same structure.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ShapeMismatch(f"mask must be 2-D, got shape {v.shape}")
        if not np.isin(v, (0, 1)).all():
            raise InvalidParameters("mask entries must be 0 or 1")
        v = _frozen_f64(v, "mask")
        _validate_mask_structure(v)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple:
        return self.values.shape


def _validate_mask_structure(v: np.ndarray) -> None:
    """Reject masks that cannot arise from a keypoint pairing."""
    m, n = v.shape
    row_ones = v.sum(axis=1)
    col_ones = v.sum(axis=0)
    if np.any(row_ones == 0) or np.any(col_ones == 0):
        raise InvalidParameters("mask has an all-zero row or column")
    kp_rows = np.flatnonzero(row_ones == 1)
    pairs = []
    for i in kp_rows:
        j = int(np.argmax(v[i]))
        if col_ones[j] == 1:
            pairs.append((int(i), j))
    kp_i = {i for i, _ in pairs}
    kp_j = {j for _, j in pairs}
    expected = np.zeros_like(v)
    free_r = [i for i in range(m) if i not in kp_i]
    free_c = [j for j in range(n) if j not in kp_j]
    if free_r and free_c:
        expected[np.ix_(free_r, free_c)] = 1.0
    for i, j in pairs:
        expected[i, j] = 1.0
    if not np.array_equal(v, expected):
        raise InvalidParameters(
            "mask does not have keypoint structure (isolated keypoint cells "
            "plus an all-ones block on the remaining rows and columns)"
        )


@dataclass(frozen=True)
class TransportPlan:
    """Solver output: the masked plan plus honestly recomputed diagnostics.

    ``row_marginal_error``/``col_marginal_error`` are max-norm deviations of
    the plan's marginals from the requested ones, recomputed from ``values``
    rather than trusted from the solver.  For partial plans they measure the
    untransported remainder.
    """

    values: np.ndarray
    row_marginal_error: float
    col_marginal_error: float
    objective: float
    solver_tag: SolverTag
    iterations: int
    converged: bool = True

    def __post_init__(self):
        v = _frozen_f64(np.asarray(self.values, dtype=np.float64), "plan")
        if v.ndim != 2:
            raise ShapeMismatch(f"plan must be 2-D, got shape {v.shape}")
        if np.any(v < 0):
            raise InvalidParameters("plan entries must be >= 0")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple:
        return self.values.shape


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by every solver; defaults follow the package-wide conventions.

    ``epsilon`` is an absolute regularization weight unless
    ``relative_epsilon`` is set, in which case solvers multiply it by the
    max entry of their objective matrix at solve time.
    """

    epsilon: float = 0.005
    rho: float = 0.1
    alpha: float = 0.5
    max_iterations: int = 10000
    tolerance: float = 1e-9
    divergence: Divergence = Divergence.JS
    seed: int = 0
    relative_epsilon: bool = False

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise InvalidParameters("epsilon must be > 0")
        if not (self.rho > 0):
            raise InvalidParameters("rho must be > 0")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidParameters("alpha must lie in (0, 1)")
        if self.max_iterations < 1:
            raise InvalidParameters("max_iterations must be >= 1")
        if not (self.tolerance > 0):
            raise InvalidParameters("tolerance must be > 0")
        if not isinstance(self.divergence, Divergence):
            raise InvalidParameters(f"unknown divergence {self.divergence!r}")


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def make_distribution(points, weights=None, normalize: bool = True) -> DiscreteDistribution:
    """Build a :class:`DiscreteDistribution` from raw arrays.

    Parameters
    ----------
    points : array-like, shape (count, dim)
    weights : array-like, shape (count,), optional
        Uniform when omitted.
    normalize : bool
        Rescale weights to total mass 1 (the default).  Pass ``False`` to
        keep raw masses, as unbalanced partial problems require.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ShapeMismatch(f"points must be (count, dim), got shape {pts.shape}")
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0]) if normalize else np.ones(pts.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64).copy()
        if not np.all(np.isfinite(w)):
            raise NonFiniteInput("weights contain non-finite entries")
        if np.any(w <= 0):
            raise NonPositiveWeight("all weights must be strictly positive")
        if normalize:
            w = w / w.sum()
    return DiscreteDistribution(points=pts, weights=w)


def pairwise_cost(a, b, metric: CostMetric = CostMetric.SQEUCLIDEAN) -> CostMatrix:
    """Pairwise ground costs between two point clouds.

    Each side may be a :class:`DiscreteDistribution` or a plain
    ``(count, dim)`` array.  ``pairwise_cost(a, a, .)`` is flagged as
    intra-domain (symmetric, zero diagonal).  Cross-domain clouds must
    share the ambient dimension.
    """
    pa = a.points if isinstance(a, DiscreteDistribution) else np.asarray(a, dtype=np.float64)
    pb = b.points if isinstance(b, DiscreteDistribution) else np.asarray(b, dtype=np.float64)
    if pa.ndim != 2 or pb.ndim != 2:
        raise ShapeMismatch(
            f"point clouds must be (count, dim), got shapes {pa.shape} and {pb.shape}"
        )
    if pa.shape[1] != pb.shape[1]:
        raise DimensionMismatch(
            f"point clouds live in different dimensions: {pa.shape[1]} vs {pb.shape[1]}"
        )
    if not isinstance(metric, CostMetric):
        raise InvalidParameters(f"unknown metric {metric!r}")
    vals = cdist(pa, pb, metric=metric.value)
    return CostMatrix(values=vals, intra=a is b)


def _finalize_plan(values, p, q, objective_values, mask_values, pairs, tag,
                   iterations, converged) -> TransportPlan:
    """Assemble a TransportPlan: clamp, zero off-mask cells, pin keypoint
    cells to their forced value p_i, and recompute diagnostics."""
    vals = np.maximum(np.asarray(values, dtype=np.float64), 0.0)
    vals = vals * mask_values  # exact zeros wherever the mask is 0
    if pairs:
        for i, j in pairs:
            vals[i, j] = p[i]
    row_err = float(np.max(np.abs(vals.sum(axis=1) - p)))
    col_err = float(np.max(np.abs(vals.sum(axis=0) - q)))
    objective = float(np.sum(vals * objective_values))
    return TransportPlan(
        values=vals,
        row_marginal_error=row_err,
        col_marginal_error=col_err,
        objective=objective,
        solver_tag=tag,
        iterations=int(iterations),
        converged=bool(converged),
    )
