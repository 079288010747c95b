"""Shared instance generators.

Random instances are built so keypoint pair masses match exactly (the
paired target weight is assigned the source weight bit-for-bit) and the
free mass balances exactly on both sides.
"""

from __future__ import annotations

import numpy as np
import pytest

from kpg_ot import (
    CostMatrix,
    DiscreteDistribution,
    KeypointPairing,
    build_mask,
    make_distribution,
)


def masked_instance(seed, m, n, n_kp, uniform=False):
    """Random weights + cost + keypoints with exactly feasible masses.

    Returns a dict with source/target distributions, a cross cost, the
    keypoint pairing, and the derived mask.
    """
    # mass can only balance with free rows AND free cols, or with none at all
    assert n_kp < min(m, n) or (n_kp == m == n)
    rng = np.random.default_rng(seed)
    if uniform:
        assert m == n
        p = np.full(m, 1.0 / m)
        q = np.full(n, 1.0 / n)
    else:
        p = rng.uniform(0.5, 1.5, size=m)
        q = rng.uniform(0.5, 1.5, size=n)
    rows = rng.permutation(m)[:n_kp]
    cols = rng.permutation(n)[:n_kp]
    pairs = tuple((int(i), int(j)) for i, j in zip(rows, cols))
    if not uniform:
        for i, j in pairs:
            q[j] = p[i]
        free_r = np.setdiff1d(np.arange(m), rows)
        free_c = np.setdiff1d(np.arange(n), cols)
        if free_c.size:
            q[free_c] *= p[free_r].sum() / q[free_c].sum()
        total = p.sum()
        p = p / total
        q = q / total
        # renormalization keeps each pair bit-identical: both sides divide
        # the same float by the same total
    source = make_distribution(rng.normal(size=(m, 2)), p, normalize=False)
    target = make_distribution(rng.normal(size=(n, 2)), q, normalize=False)
    cost = CostMatrix(rng.uniform(0.0, 1.0, size=(m, n)))
    keypoints = KeypointPairing(pairs)
    return {
        "source": source,
        "target": target,
        "cost": cost,
        "keypoints": keypoints,
        "mask": build_mask(m, n, keypoints),
    }


def points_instance(seed, m, n, n_kp, dim=2):
    """Point clouds + intra costs + keypoints, for the guidance pipeline."""
    from kpg_ot import pairwise_cost

    inst = masked_instance(seed, m, n, n_kp)
    src: DiscreteDistribution = inst["source"]
    tgt: DiscreteDistribution = inst["target"]
    inst["source_intra"] = pairwise_cost(src.points, src.points)
    inst["target_intra"] = pairwise_cost(tgt.points, tgt.points)
    return inst


@pytest.fixture
def small_instance():
    return masked_instance(0, 6, 7, 2)
