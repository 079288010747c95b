"""Relation scores and the guiding matrix.

Each point is described by how it relates to its domain's keypoints: row k
of a relation matrix is a softmax over the negative intra-domain distances
from point k to the keypoints, at temperature tau = rho * max(intra cost).
Rows are therefore probability vectors, invariant to rescaling the ground
cost.  The guiding matrix compares source rows with target rows under a
row-wise divergence; matched points relate to corresponding keypoints in
the same way, so their guiding cost is small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .core import (
    CostMatrix,
    Divergence,
    EmptyKeypoints,
    IncompatibleMode,
    IndexOutOfBounds,
    InvalidParameters,
    NonSimplexRow,
    RelationMode,
    ShapeMismatch,
)

__all__ = ["RelationMatrix", "relation_scores", "guiding_matrix"]

# Divergence floor: keeps log arguments positive without visibly biasing
# scores that are far from underflow.
_CLAMP = 1e-300


@dataclass(frozen=True)
class RelationMatrix:
    """Rows of keypoint-relation scores for one domain.

    In SOFTMAX mode every row is a probability vector over the keypoints.
    In RAW_DIST mode rows hold the raw intra-domain distances to the
    keypoints; ``cost_scale`` keeps the max intra-cost entry so those rows
    can be normalized consistently when compared.
    """

    values: np.ndarray
    mode: RelationMode
    cost_scale: float

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ShapeMismatch(f"relation matrix must be (count, n_keypoints), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_keypoints(self) -> int:
        return self.values.shape[1]


def relation_scores(
    intra_cost: CostMatrix,
    keypoint_indices,
    rho: float = 0.1,
    mode: RelationMode = RelationMode.SOFTMAX,
) -> RelationMatrix:
    """Relation of every point to the domain's keypoints.

    Parameters
    ----------
    intra_cost : CostMatrix
        Square symmetric intra-domain cost.
    keypoint_indices : sequence of int
        This domain's side of the keypoint pairing, in pairing order.
    rho : float
        Temperature factor; tau = rho * max(intra_cost).  When the cost
        matrix is identically zero (all points coincide) tau falls back to
        rho, which makes every row uniform.
    mode : RelationMode
        SOFTMAX produces simplex rows; RAW_DIST keeps raw distances for
        the distance-ablation variant.
    """
    C = intra_cost.values
    if C.shape[0] != C.shape[1]:
        raise ShapeMismatch("intra-domain cost matrix must be square")
    if not np.allclose(C, C.T, rtol=0.0, atol=1e-12):
        raise InvalidParameters("intra-domain cost matrix must be symmetric")
    idx = [int(k) for k in keypoint_indices]
    if len(idx) == 0:
        raise EmptyKeypoints("at least one keypoint is required to compute relation scores")
    for k in idx:
        if k < 0 or k >= C.shape[0]:
            raise IndexOutOfBounds(f"keypoint index {k} out of bounds for {C.shape[0]} points")
    if not (rho > 0):
        raise InvalidParameters("rho must be > 0")
    cmax = float(C.max())
    dists = C[:, idx]
    if mode is RelationMode.SOFTMAX:
        tau = rho * cmax if cmax > 0 else rho
        vals = softmax(-dists / tau, axis=1)
    elif mode is RelationMode.RAW_DIST:
        vals = dists.copy()
    else:
        raise InvalidParameters(f"unknown relation mode {mode!r}")
    return RelationMatrix(values=vals, mode=mode, cost_scale=cmax)


def _check_simplex_rows(vals: np.ndarray, side: str) -> None:
    if np.any(vals < -1e-12):
        raise NonSimplexRow(f"{side} relation matrix has negative entries")
    sums = vals.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise NonSimplexRow(f"{side} relation matrix rows must sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.3e})")


def _kl_rows(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """KL(X_k || Y_l) for all row pairs, with 0*log(0) = 0 and a clamped floor."""
    Yc = np.maximum(Y[None, :, :], _CLAMP)
    Xb = X[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Xb > 0, Xb * (np.log(np.maximum(Xb, _CLAMP)) - np.log(Yc)), 0.0)
    return terms.sum(axis=2)


def _js_rows(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    Xb = X[:, None, :]
    Yb = Y[None, :, :]
    Mb = 0.5 * (Xb + Yb)
    logM = np.log(np.maximum(Mb, _CLAMP))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(Xb > 0, Xb * (np.log(np.maximum(Xb, _CLAMP)) - logM), 0.0)
        t2 = np.where(Yb > 0, Yb * (np.log(np.maximum(Yb, _CLAMP)) - logM), 0.0)
    return 0.5 * t1.sum(axis=2) + 0.5 * t2.sum(axis=2)


def guiding_matrix(
    source_relations: RelationMatrix,
    target_relations: RelationMatrix,
    divergence: Divergence = Divergence.JS,
) -> CostMatrix:
    """Pairwise divergence between source and target relation rows.

    JS, KL and L1 require SOFTMAX-mode inputs (simplex rows); L2 accepts
    either mode.  ``Divergence.RAW_DIST`` selects the distance ablation:
    RAW_DIST-mode rows are first divided by each domain's max intra-cost
    entry, then compared with the L2 distance.
    """
    Rs, Rt = source_relations, target_relations
    if Rs.n_keypoints != Rt.n_keypoints:
        raise ShapeMismatch(
            f"relation matrices disagree on the number of keypoints: {Rs.n_keypoints} vs {Rt.n_keypoints}"
        )
    if Rs.mode is not Rt.mode:
        raise IncompatibleMode(f"relation modes differ: {Rs.mode} vs {Rt.mode}")
    raw = Rs.mode is RelationMode.RAW_DIST
    if divergence is Divergence.RAW_DIST:
        if not raw:
            raise IncompatibleMode("Divergence.RAW_DIST applies to RAW_DIST-mode relation matrices")
        X = Rs.values / max(Rs.cost_scale, _CLAMP)
        Y = Rt.values / max(Rt.cost_scale, _CLAMP)
        G = np.sqrt(((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2))
        return CostMatrix(values=np.maximum(G, 0.0))
    if raw:
        if divergence is Divergence.L2:
            X, Y = Rs.values, Rt.values
            G = np.sqrt(((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2))
            return CostMatrix(values=np.maximum(G, 0.0))
        raise IncompatibleMode(
            f"{divergence} requires SOFTMAX-mode relation matrices; raw distances pair "
            "with Divergence.RAW_DIST or Divergence.L2"
        )

    X, Y = Rs.values, Rt.values
    _check_simplex_rows(X, "source")
    _check_simplex_rows(Y, "target")
    if divergence is Divergence.JS:
        G = _js_rows(X, Y)
    elif divergence is Divergence.KL_ST:
        G = _kl_rows(X, Y)
    elif divergence is Divergence.KL_TS:
        G = _kl_rows(Y, X).T
    elif divergence is Divergence.L1:
        G = np.abs(X[:, None, :] - Y[None, :, :]).sum(axis=2)
    elif divergence is Divergence.L2:
        G = np.sqrt(((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2))
    else:
        raise InvalidParameters(f"unknown divergence {divergence!r}")
    return CostMatrix(values=np.maximum(G, 0.0))
