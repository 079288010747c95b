"""Synthetic mixture benchmarks for the guided solvers.

Both domains draw the same balanced Gaussian mixture, but each domain's
class means sit at an independently rotated set of positions on a circle,
so raw positions disagree across domains while within-domain structure is
identical.  Keypoints are the points nearest each class mean, paired by
rank between domains.  Accuracy is the fraction of transported mass that
lands on a target point of the same class.

The partial variant plants one unshared class per domain: the source's
extra class should stay untransported under the mass budget and the
target's extra class should receive (almost) nothing, which makes its
points recoverable by received-mass screening.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    CostMatrix,
    DiscreteDistribution,
    InvalidParameters,
    KeypointPairing,
    ShapeMismatch,
    SolverConfig,
    TransportPlan,
    make_distribution,
    pairwise_cost,
)
from .exact import Backend, lp_masked, solve_kpg_rl, solve_kpg_rl_kp
from .gromov import solve_kpg_rl_gw
from .masking import build_mask
from .partial import solve_partial_kpg_rl, solve_partial_masked

__all__ = [
    "Method",
    "ToyScenario",
    "MethodResult",
    "gen_mixture_scenario",
    "gen_partial_scenario",
    "subset_keypoints",
    "matching_accuracy",
    "run_comparison",
]


class Method(str, Enum):
    """Named pipelines compared by :func:`run_comparison`."""

    KP = "kp"
    GW = "gw"
    KPG_RL_LP = "kpg-rl-lp"
    KPG_RL_SINKHORN = "kpg-rl-sinkhorn"
    KPG_RL_KP = "kpg-rl-kp"
    KPG_RL_GW = "kpg-rl-gw"
    PARTIAL_KP = "partial-kp"
    PARTIAL_KPG_RL = "partial-kpg-rl"


_FULL_METHODS = (
    Method.KP,
    Method.GW,
    Method.KPG_RL_LP,
    Method.KPG_RL_SINKHORN,
    Method.KPG_RL_KP,
    Method.KPG_RL_GW,
)
_PARTIAL_METHODS = (Method.PARTIAL_KP, Method.PARTIAL_KPG_RL)


@dataclass(frozen=True)
class ToyScenario:
    """A generated instance: distributions, class labels, and keypoints.

    ``mass_budget``/``outlier_indices``/``eta`` are populated only by the
    partial generator; ``eta`` is sized so that received-mass screening
    flags exactly as many points as were planted.
    """

    source: DiscreteDistribution
    target: DiscreteDistribution
    source_labels: np.ndarray
    target_labels: np.ndarray
    keypoints: KeypointPairing
    description: str = ""
    seed: int = 0
    mass_budget: float = None
    outlier_indices: tuple = ()
    eta: float = None


@dataclass(frozen=True)
class MethodResult:
    method: Method
    accuracy: float
    objective: float
    iterations: int
    converged: bool
    wall_ms: float
    plan: TransportPlan


def _means_at(angles, phase: float, separation: float, dim: int) -> np.ndarray:
    theta = phase + np.asarray(angles, dtype=np.float64)
    means = np.zeros((theta.shape[0], dim))
    means[:, 0] = separation * np.cos(theta)
    if dim >= 2:
        means[:, 1] = separation * np.sin(theta)
    return means


def _class_means(n_slots: int, phase: float, separation: float, dim: int) -> np.ndarray:
    return _means_at(2.0 * np.pi * np.arange(n_slots) / n_slots, phase, separation, dim)


def _sample_domain(rng, class_ids, means, points_per_class, dim, cluster_std=1.0):
    blocks, labels = [], []
    for cid in class_ids:
        blocks.append(means[cid] + cluster_std * rng.standard_normal((points_per_class, dim)))
        labels.append(np.full(points_per_class, cid, dtype=np.int64))
    return np.concatenate(blocks, axis=0), np.concatenate(labels)


def _rank_keypoints(points, labels, means, class_ids, per_class):
    """Per class, the ``per_class`` points nearest the class mean, nearest first."""
    chosen = []
    for cid in class_ids:
        idx = np.flatnonzero(labels == cid)
        dists = np.linalg.norm(points[idx] - means[cid], axis=1)
        order = np.argsort(dists, kind="stable")
        chosen.extend(int(idx[o]) for o in order[:per_class])
    return chosen


def _gen_scenario(class_ids_source, class_ids_target, shared_ids, points_per_class,
                  keypoints_per_class, dim, separation, seed,
                  angles=None, cluster_std=1.0):
    if points_per_class < 1 or dim < 1:
        raise InvalidParameters("points_per_class and dim must be >= 1")
    if not (0 <= keypoints_per_class <= points_per_class):
        raise InvalidParameters(
            f"keypoints_per_class must lie in [0, points_per_class], got {keypoints_per_class!r}"
        )
    n_slots = max(max(class_ids_source), max(class_ids_target)) + 1
    rng = np.random.default_rng(seed)
    phase_s = rng.uniform(0.0, 2.0 * np.pi)
    phase_t = rng.uniform(0.0, 2.0 * np.pi)
    if angles is None:
        means_s = _class_means(n_slots, phase_s, separation, dim)
        means_t = _class_means(n_slots, phase_t, separation, dim)
    else:
        means_s = _means_at(angles, phase_s, separation, dim)
        means_t = _means_at(angles, phase_t, separation, dim)
    xs, ls = _sample_domain(rng, class_ids_source, means_s, points_per_class, dim, cluster_std)
    xt, lt = _sample_domain(rng, class_ids_target, means_t, points_per_class, dim, cluster_std)
    src_kp = _rank_keypoints(xs, ls, means_s, shared_ids, keypoints_per_class)
    tgt_kp = _rank_keypoints(xt, lt, means_t, shared_ids, keypoints_per_class)
    pairing = KeypointPairing(tuple(zip(src_kp, tgt_kp)))
    return (
        make_distribution(xs),
        make_distribution(xt),
        ls,
        lt,
        pairing,
    )


def gen_mixture_scenario(
    classes: int,
    points_per_class: int,
    keypoints_per_class: int = 1,
    dim: int = 2,
    separation: float = 8.0,
    seed: int = 0,
) -> ToyScenario:
    """Balanced mixture in both domains; every class is shared."""
    if classes < 2:
        raise InvalidParameters("classes must be >= 2")
    ids = list(range(classes))
    source, target, ls, lt, pairing = _gen_scenario(
        ids, ids, ids, points_per_class, keypoints_per_class, dim, separation, seed
    )
    return ToyScenario(
        source=source,
        target=target,
        source_labels=ls,
        target_labels=lt,
        keypoints=pairing,
        description=(
            f"{classes}-class Gaussian mixture, {points_per_class} points/class, "
            f"{keypoints_per_class} keypoints/class, separation {separation}"
        ),
        seed=seed,
    )


def gen_partial_scenario(
    points_per_class: int,
    keypoints_per_class: int = 1,
    dim: int = 2,
    separation: float = 8.0,
    seed: int = 0,
    cluster_std: float = 0.5,
    skew_degrees: float = 15.0,
) -> ToyScenario:
    """Two shared classes plus one unshared class on each side.

    Source classes are {0, 1, 2} and target classes are {0, 1, 3}; keypoints
    live in the shared classes {0, 1}.  The shared means sit 120 degrees
    apart and the two unshared means straddle the far bisector, offset by
    ``skew_degrees`` to opposite sides: each unshared class then leans
    toward a different keypoint, so the two are distinguishable to the
    guided solvers instead of colliding at the same affinity profile.
    ``cluster_std`` keeps within-class spread below that margin.

    The budget covers exactly the shared two thirds of the mass, the
    planted outliers are the target's class-3 points, and ``eta`` makes the
    screening threshold match their count.
    """
    if keypoints_per_class < 1:
        raise InvalidParameters("the partial scenario needs at least one keypoint per shared class")
    d = np.deg2rad(skew_degrees)
    base = 2.0 * np.pi / 3.0  # 120 degrees
    angles = (0.0, base, 2.0 * base - d, 2.0 * base + d)
    source, target, ls, lt, pairing = _gen_scenario(
        [0, 1, 2], [0, 1, 3], [0, 1], points_per_class, keypoints_per_class,
        dim, separation, seed, angles=angles, cluster_std=cluster_std,
    )
    n = target.count
    outliers = tuple(int(j) for j in np.flatnonzero(lt == 3))
    return ToyScenario(
        source=source,
        target=target,
        source_labels=ls,
        target_labels=lt,
        keypoints=pairing,
        description=(
            f"partial overlap: 2 shared + 1 unshared class per side, "
            f"{points_per_class} points/class, {keypoints_per_class} keypoints/class"
        ),
        seed=seed,
        mass_budget=2.0 * points_per_class / n,
        outlier_indices=outliers,
        eta=points_per_class / (n - 2 * keypoints_per_class),
    )


def subset_keypoints(keypoints: KeypointPairing, count: int) -> KeypointPairing:
    """The first ``count`` pairs (generation order: by class, then by rank)."""
    if not (1 <= count <= len(keypoints.pairs)):
        raise InvalidParameters(
            f"count must lie in [1, {len(keypoints.pairs)}], got {count!r}"
        )
    return KeypointPairing(keypoints.pairs[:count])


def matching_accuracy(plan, source_labels, target_labels) -> float:
    """Fraction of transported mass joining same-class points."""
    P = plan.values if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    ls = np.asarray(source_labels)
    lt = np.asarray(target_labels)
    if P.shape != (ls.shape[0], lt.shape[0]):
        raise ShapeMismatch(
            f"plan shape {P.shape} does not match label counts ({ls.shape[0]}, {lt.shape[0]})"
        )
    total = float(P.sum())
    if total <= 0.0:
        return float("nan")
    agree = ls[:, None] == lt[None, :]
    return float(P[agree].sum() / total)


def _normalized_cross_cost(scenario: ToyScenario) -> CostMatrix:
    cross = pairwise_cost(scenario.source.points, scenario.target.points)
    top = float(cross.values.max())
    if top > 0.0:
        return CostMatrix(cross.values / top)
    return cross


def _run_method(method: Method, scenario: ToyScenario, cfg: SolverConfig):
    src, tgt, kp = scenario.source, scenario.target, scenario.keypoints
    cs = pairwise_cost(src.points, src.points)
    ct = pairwise_cost(tgt.points, tgt.points)
    if method is Method.KP:
        mask = build_mask(src.count, tgt.count, kp)
        return lp_masked(src, tgt, _normalized_cross_cost(scenario), mask)
    if method is Method.GW:
        plan, _ = solve_kpg_rl_gw(src, tgt, cs, ct, KeypointPairing(()), alpha=1.0, cfg=cfg)
        return plan
    if method is Method.KPG_RL_LP:
        return solve_kpg_rl(src, tgt, cs, ct, kp, cfg, backend=Backend.LP)
    if method is Method.KPG_RL_SINKHORN:
        return solve_kpg_rl(src, tgt, cs, ct, kp, cfg, backend=Backend.SINKHORN)
    if method is Method.KPG_RL_KP:
        return solve_kpg_rl_kp(src, tgt, _normalized_cross_cost(scenario), cs, ct, kp, cfg)
    if method is Method.KPG_RL_GW:
        plan, _ = solve_kpg_rl_gw(src, tgt, cs, ct, kp, alpha=cfg.alpha, cfg=cfg)
        return plan
    if method in _PARTIAL_METHODS:
        if scenario.mass_budget is None:
            raise InvalidParameters(f"{method.value} needs a scenario with a mass budget")
        if method is Method.PARTIAL_KP:
            mask = build_mask(src.count, tgt.count, kp)
            return solve_partial_masked(
                src, tgt, _normalized_cross_cost(scenario), mask, kp, scenario.mass_budget, cfg
            )
        return solve_partial_kpg_rl(src, tgt, cs, ct, kp, scenario.mass_budget, cfg)
    raise InvalidParameters(f"unknown method {method!r}")


def run_comparison(
    scenario: ToyScenario,
    methods=None,
    cfg: SolverConfig = SolverConfig(),
) -> dict:
    """Run each method on the scenario; returns ``{Method: MethodResult}``.

    ``methods`` defaults to the six full-mass pipelines, plus the two
    budgeted ones when the scenario carries a mass budget.
    """
    if methods is None:
        methods = _FULL_METHODS + (_PARTIAL_METHODS if scenario.mass_budget is not None else ())
    results = {}
    for method in methods:
        method = Method(method)
        start = time.perf_counter()
        plan = _run_method(method, scenario, cfg)
        wall_ms = (time.perf_counter() - start) * 1000.0
        results[method] = MethodResult(
            method=method,
            accuracy=matching_accuracy(plan, scenario.source_labels, scenario.target_labels),
            objective=plan.objective,
            iterations=plan.iterations,
            converged=plan.converged,
            wall_ms=wall_ms,
            plan=plan,
        )
    return results
