"""Mask construction and feasibility checks for keypoint-constrained plans.

A keypoint pair (i, j) pins source point i to target point j: row i and
column j of the mask are zeroed except for the single admissible cell
(i, j).  All remaining rows and columns keep an all-ones block.  Any plan
in the masked polytope therefore satisfies plan[i, j] = p_i exactly, and
the polytope is nonempty iff each pair has equal masses and the leftover
row/column masses balance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DiscreteDistribution,
    IndexOutOfBounds,
    InfeasibleMask,
    KeypointPairing,
    MaskMatrix,
    MassMismatchAtKeypoint,
    ShapeMismatch,
)

__all__ = ["build_mask", "pairs_from_mask", "check_masked_feasibility", "MaskFeasibilityReport"]


def build_mask(m: int, n: int, keypoints: KeypointPairing) -> MaskMatrix:
    """Binary m-by-n mask for the given keypoint pairing.

    Zeroes every keypoint row and column, then re-opens the single cell of
    each pair.  The result does not depend on the order of the pairs.
    """
    for i, j in keypoints.pairs:
        if i >= m or j >= n:
            raise IndexOutOfBounds(f"keypoint pair ({i}, {j}) out of bounds for shape ({m}, {n})")
    mask = np.ones((m, n))
    src = list(keypoints.source_indices)
    tgt = list(keypoints.target_indices)
    mask[src, :] = 0.0
    mask[:, tgt] = 0.0
    for i, j in keypoints.pairs:
        mask[i, j] = 1.0
    return MaskMatrix(values=mask)


def _pairs_list(mask_values: np.ndarray) -> list:
    """Keypoint pairs encoded by a raw 0/1 mask array."""
    row_ones = mask_values.sum(axis=1)
    col_ones = mask_values.sum(axis=0)
    pairs = []
    for i in np.flatnonzero(row_ones == 1):
        j = int(np.argmax(mask_values[i]))
        if col_ones[j] == 1:
            pairs.append((int(i), j))
    return pairs


def pairs_from_mask(mask: MaskMatrix) -> KeypointPairing:
    """Recover the keypoint pairing encoded by a mask.

    A pair is a row with a single admissible cell whose column also has a
    single admissible cell.  (A lone 1x1 all-ones mask reads back as one
    pair, which constrains nothing extra.)
    """
    return KeypointPairing(pairs=tuple(_pairs_list(mask.values)))


@dataclass(frozen=True)
class MaskFeasibilityReport:
    """Successful feasibility check: the masked polytope is nonempty."""

    n_keypoints: int
    max_pair_mass_gap: float
    free_source_mass: float
    free_target_mass: float
    free_mass_gap: float


def check_masked_feasibility(
    source: DiscreteDistribution,
    target: DiscreteDistribution,
    mask: MaskMatrix,
    keypoints: KeypointPairing,
) -> MaskFeasibilityReport:
    """Verify the masked polytope is nonempty; raise on violation.

    Raises :class:`MassMismatchAtKeypoint` when some pair (i, j) has
    p_i != q_j (beyond 1e-12), and :class:`InfeasibleMask` when the masses
    left after removing keypoint rows/columns do not balance.  This check
    is sufficient because the non-keypoint block of the mask is all-ones.
    """
    p, q = source.weights, target.weights
    if mask.shape != (source.count, target.count):
        raise ShapeMismatch(
            f"mask shape {mask.shape} does not match distribution sizes ({source.count}, {target.count})"
        )
    keypoints.validate_against(source, target)
    return _check_feasibility_values(p, q, list(keypoints.pairs))


def _check_feasibility_values(p: np.ndarray, q: np.ndarray, pairs: list) -> MaskFeasibilityReport:
    """Array-level feasibility check shared by the solvers.

    Unlike the public entry point this tolerates zero weights, which the
    dummy rows/columns of augmented partial problems legitimately carry.
    """
    pair_gap = 0.0
    for i, j in pairs:
        gap = abs(float(p[i] - q[j]))
        if gap > 1e-12:
            raise MassMismatchAtKeypoint(i, j, float(p[i]), float(q[j]))
        pair_gap = max(pair_gap, gap)
    src_idx = set(i for i, _ in pairs)
    tgt_idx = set(j for _, j in pairs)
    free_p = float(sum(p[i] for i in range(p.shape[0]) if i not in src_idx))
    free_q = float(sum(q[j] for j in range(q.shape[0]) if j not in tgt_idx))
    gap = abs(free_p - free_q)
    if gap > 1e-12:
        raise InfeasibleMask(
            f"masses left after removing keypoint rows/columns do not balance: "
            f"{free_p!r} vs {free_q!r}"
        )
    return MaskFeasibilityReport(
        n_keypoints=len(pairs),
        max_pair_mass_gap=pair_gap,
        free_source_mass=free_p,
        free_target_mass=free_q,
        free_mass_gap=gap,
    )
