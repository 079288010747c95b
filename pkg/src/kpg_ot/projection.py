"""Turning plans into point maps and outlier flags.

The barycentric map sends each source point to the plan-weighted average of
the target points it is coupled with.  Received-mass screening flags the
target points that collect the least mass under a partial plan: planted
outliers receive (almost) nothing when the budget routes mass to inliers.
"""

from __future__ import annotations

import math

import numpy as np

from .core import IndexOutOfBounds, InvalidEta, ShapeMismatch, TransportPlan

__all__ = ["barycentric_map", "received_mass_outliers"]


def _plan_values(plan) -> np.ndarray:
    if isinstance(plan, TransportPlan):
        return plan.values
    return np.asarray(plan, dtype=np.float64)


def barycentric_map(plan, target_points: np.ndarray) -> np.ndarray:
    """Map source points into target space: row i goes to sum_j P_ij y_j / row mass.

    Rows carrying no mass have no image; they come back as all-NaN rows so
    the caller can tell "not mapped" from any legitimate coordinate.
    """
    P = _plan_values(plan)
    Y = np.ascontiguousarray(np.asarray(target_points, dtype=np.float64))
    if Y.ndim == 1:
        Y = Y[:, None]
    if P.ndim != 2 or Y.ndim != 2 or P.shape[1] != Y.shape[0]:
        raise ShapeMismatch(
            f"plan columns ({P.shape}) must match target points ({Y.shape})"
        )
    row_mass = P.sum(axis=1)
    out = np.full((P.shape[0], Y.shape[1]), np.nan)
    carried = row_mass > 0.0
    out[carried] = (P[carried] @ Y) / row_mass[carried, None]
    return out


def received_mass_outliers(plan, eta: float, labeled_indices=()) -> np.ndarray:
    """Indices of the unlabeled target points receiving the least mass.

    ``eta`` in [0, 1) is the assumed outlier fraction among the unlabeled
    target points; the ceil(eta * #unlabeled) columns with the smallest
    received mass are returned (ties to the lower index), sorted ascending.
    Labeled (keypoint) columns are never flagged.
    """
    P = _plan_values(plan)
    if P.ndim != 2:
        raise ShapeMismatch(f"plan must be 2-D, got shape {P.shape}")
    if not (0.0 <= eta < 1.0):
        raise InvalidEta(f"eta must lie in [0, 1), got {eta!r}")
    n = P.shape[1]
    labeled = set()
    for j in labeled_indices:
        if int(j) != j or not (0 <= j < n):
            raise IndexOutOfBounds(f"labeled index {j!r} outside [0, {n})")
        labeled.add(int(j))
    unlabeled = np.array(sorted(set(range(n)) - labeled), dtype=np.int64)
    k = math.ceil(eta * unlabeled.size)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    received = P.sum(axis=0)[unlabeled]
    order = np.argsort(received, kind="stable")
    flagged = unlabeled[order[:k]]
    return np.sort(flagged)
