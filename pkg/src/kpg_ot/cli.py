"""Command-line front end.

Exit codes: 0 success, 1 bad input or usage, 2 infeasible problem,
3 numerical failure or iteration budget exhausted (outputs are still
written when a plan exists).

``solve`` couples two point clouds from CSV files and writes the plan and a
JSON report.  ``toy`` generates a synthetic mixture scenario, runs a panel
of methods, and writes the scenario plus an accuracy table.  Reports are
byte-reproducible: wall-clock times are written as null unless ``--timing``
is passed.
"""

from __future__ import annotations

import os
import time

import click

from .core import (
    CostMatrix,
    CostMetric,
    Divergence,
    Infeasible,
    KeypointPairing,
    KpgOtError,
    MassMismatchAtKeypoint,
    NumericalUnderflow,
    SolverConfig,
    make_distribution,
    pairwise_cost,
)
from .dual import solve_dual
from .exact import Backend, _guidance, lp_masked, solve_kpg_rl, solve_kpg_rl_kp
from .fileio import (
    read_keypoints,
    read_points,
    write_keypoints,
    write_plan,
    write_points,
    write_report,
)
from .gromov import solve_kpg_rl_gw
from .harness import (
    Method,
    gen_mixture_scenario,
    gen_partial_scenario,
    run_comparison,
)
from .masking import build_mask
from .partial import solve_partial_kpg_rl
from .projection import received_mass_outliers

SOLVE_METHODS = (
    "kp",
    "gw",
    "kpg-rl",
    "kpg-rl-kp",
    "kpg-rl-gw",
    "partial-kpg-rl",
    "dual-kpg-rl",
)
SCENARIOS = ("mixture2", "mixture3", "partial")

_FMT = "%.17g"


def _choice(value: str, valid, what: str) -> str:
    if value not in valid:
        raise click.UsageError(f"unknown {what} {value!r}; valid: {', '.join(valid)}")
    return value


def _config(epsilon, rho, alpha, max_iterations, tolerance, divergence, seed, relative_epsilon):
    _choice(divergence, tuple(d.value for d in Divergence), "divergence")
    return SolverConfig(
        epsilon=epsilon,
        rho=rho,
        alpha=alpha,
        max_iterations=max_iterations,
        tolerance=tolerance,
        divergence=Divergence(divergence),
        seed=seed,
        relative_epsilon=relative_epsilon,
    )


_CONFIG_OPTIONS = [
    click.option("--epsilon", type=float, default=0.005, show_default=True,
                 help="Regularization weight (Sinkhorn / dual)."),
    click.option("--rho", type=float, default=0.1, show_default=True,
                 help="Softmax temperature as a fraction of the max intra-domain cost."),
    click.option("--alpha", type=float, default=0.5, show_default=True,
                 help="Blend weight for the -kp and -gw methods."),
    click.option("--max-iterations", type=int, default=10000, show_default=True),
    click.option("--tolerance", type=float, default=1e-9, show_default=True),
    click.option("--divergence", default="js", show_default=True,
                 help="Relation discrepancy: " + ", ".join(d.value for d in Divergence) + "."),
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--relative-epsilon", is_flag=True, default=False,
                 help="Scale epsilon by the max entry of the objective at solve time."),
]


def _with_config_options(fn):
    for opt in reversed(_CONFIG_OPTIONS):
        fn = opt(fn)
    return fn


@click.group()
def cli() -> None:
    """Keypoint-guided optimal transport."""


@cli.command()
@click.option("--source", "source_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Source points CSV (header x0,...,weight).")
@click.option("--target", "target_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Target points CSV.")
@click.option("--keypoints", "keypoints_path", type=click.Path(exists=True, dir_okay=False),
              help='Keypoints JSON ({"indexing": 0, "pairs": [[i, j], ...]}).')
@click.option("--method", default="kpg-rl", show_default=True,
              help="One of: " + ", ".join(SOLVE_METHODS) + ".")
@click.option("--backend", default="lp", show_default=True,
              help="Masked-transport backend for kpg-rl and partial-kpg-rl: lp or sinkhorn.")
@click.option("--metric", default="sqeuclidean", show_default=True,
              help="Ground metric: sqeuclidean or euclidean.")
@click.option("--mass-budget", type=float, default=None,
              help="Transported mass for partial-kpg-rl.")
@click.option("--normalize", is_flag=True, default=False,
              help="Rescale each side's weights to total mass 1 after loading.")
@click.option("--out-plan", default="plan.csv", show_default=True, type=click.Path(dir_okay=False))
@click.option("--out-report", default="report.json", show_default=True, type=click.Path(dir_okay=False))
@click.option("--timing", is_flag=True, default=False,
              help="Record wall-clock time in the report (breaks byte-reproducibility).")
@_with_config_options
def solve(source_path, target_path, keypoints_path, method, backend, metric, mass_budget,
          normalize, out_plan, out_report, timing, epsilon, rho, alpha, max_iterations,
          tolerance, divergence, seed, relative_epsilon) -> int:
    """Couple two point clouds and write plan.csv + report.json."""
    _choice(method, SOLVE_METHODS, "method")
    _choice(backend, ("lp", "sinkhorn"), "backend")
    _choice(metric, tuple(m.value for m in CostMetric), "metric")
    cfg = _config(epsilon, rho, alpha, max_iterations, tolerance, divergence, seed,
                  relative_epsilon)
    be = Backend.LP if backend == "lp" else Backend.SINKHORN

    xs, ws = read_points(source_path)
    xt, wt = read_points(target_path)
    source = make_distribution(xs, ws, normalize=normalize)
    target = make_distribution(xt, wt, normalize=normalize)
    keypoints = read_keypoints(keypoints_path) if keypoints_path else KeypointPairing(())
    keypoints.validate_against(source, target)
    met = CostMetric(metric)

    needs_budget = method == "partial-kpg-rl"
    if needs_budget and mass_budget is None:
        raise click.UsageError("partial-kpg-rl needs --mass-budget")

    dual_value = None
    start = time.perf_counter()
    if method == "kp":
        mask = build_mask(source.count, target.count, keypoints)
        cross = pairwise_cost(source.points, target.points, met)
        plan = lp_masked(source, target, cross, mask)
    elif method == "gw":
        cs = pairwise_cost(source.points, source.points, met)
        ct = pairwise_cost(target.points, target.points, met)
        plan, _ = solve_kpg_rl_gw(source, target, cs, ct, keypoints, alpha=1.0, cfg=cfg)
    elif method == "kpg-rl":
        cs = pairwise_cost(source.points, source.points, met)
        ct = pairwise_cost(target.points, target.points, met)
        plan = solve_kpg_rl(source, target, cs, ct, keypoints, cfg, backend=be)
    elif method == "kpg-rl-kp":
        cs = pairwise_cost(source.points, source.points, met)
        ct = pairwise_cost(target.points, target.points, met)
        cross = pairwise_cost(source.points, target.points, met)
        top = float(cross.values.max())
        if top > 0.0:
            cross = CostMatrix(cross.values / top)
        plan = solve_kpg_rl_kp(source, target, cross, cs, ct, keypoints, cfg, backend=be)
    elif method == "kpg-rl-gw":
        cs = pairwise_cost(source.points, source.points, met)
        ct = pairwise_cost(target.points, target.points, met)
        plan, _ = solve_kpg_rl_gw(source, target, cs, ct, keypoints, alpha=cfg.alpha, cfg=cfg)
    elif method == "partial-kpg-rl":
        cs = pairwise_cost(source.points, source.points, met)
        ct = pairwise_cost(target.points, target.points, met)
        plan = solve_partial_kpg_rl(source, target, cs, ct, keypoints, mass_budget, cfg,
                                    backend=be)
    else:  # dual-kpg-rl
        cs = pairwise_cost(source.points, source.points, met)
        ct = pairwise_cost(target.points, target.points, met)
        guide = _guidance(cs, ct, keypoints, cfg)
        mask = build_mask(source.count, target.count, keypoints)
        plan, potentials = solve_dual(source, target, guide, mask, cfg)
        dual_value = potentials.dual_objective
    wall_ms = (time.perf_counter() - start) * 1000.0

    write_plan(out_plan, plan.values)
    write_report(out_report, {
        "method": method,
        "solver_tag": plan.solver_tag.value,
        "shape": [int(plan.shape[0]), int(plan.shape[1])],
        "n_keypoints": len(keypoints.pairs),
        "objective": plan.objective,
        "row_marginal_error": plan.row_marginal_error,
        "col_marginal_error": plan.col_marginal_error,
        "transported_mass": float(plan.values.sum()),
        "iterations": plan.iterations,
        "converged": plan.converged,
        "dual_objective": dual_value,
        "wall_ms": wall_ms if timing else None,
        "parameters": {
            "epsilon": cfg.epsilon,
            "rho": cfg.rho,
            "alpha": cfg.alpha,
            "divergence": cfg.divergence.value,
            "mass_budget": mass_budget,
        },
    })
    if not plan.converged:
        click.echo(f"not converged after {plan.iterations} iterations; outputs written", err=True)
        return 3
    return 0


@cli.command()
@click.option("--scenario", default="mixture2", show_default=True,
              help="One of: " + ", ".join(SCENARIOS) + ".")
@click.option("--points-per-class", type=int, default=30, show_default=True)
@click.option("--keypoints-per-class", type=int, default=1, show_default=True)
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--separation", type=float, default=8.0, show_default=True)
@click.option("--methods", default=None,
              help="Comma-separated subset of: " + ", ".join(m.value for m in Method) + ".")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--timing", is_flag=True, default=False,
              help="Record wall-clock times in matching.csv.")
@_with_config_options
def toy(scenario, points_per_class, keypoints_per_class, dim, separation, methods, out_dir,
        timing, epsilon, rho, alpha, max_iterations, tolerance, divergence, seed,
        relative_epsilon) -> int:
    """Generate a synthetic scenario, run the method panel, write results."""
    _choice(scenario, SCENARIOS, "scenario")
    cfg = _config(epsilon, rho, alpha, max_iterations, tolerance, divergence, seed,
                  relative_epsilon)
    if scenario == "partial":
        sc = gen_partial_scenario(points_per_class, keypoints_per_class, dim, separation, seed)
    else:
        classes = 2 if scenario == "mixture2" else 3
        sc = gen_mixture_scenario(classes, points_per_class, keypoints_per_class, dim,
                                  separation, seed)

    method_list = None
    if methods is not None:
        valid = tuple(m.value for m in Method)
        method_list = tuple(
            Method(_choice(tok.strip(), valid, "method")) for tok in methods.split(",")
        )

    os.makedirs(out_dir, exist_ok=True)
    write_points(os.path.join(out_dir, "source.csv"), sc.source.points, sc.source.weights)
    write_points(os.path.join(out_dir, "target.csv"), sc.target.points, sc.target.weights)
    write_keypoints(os.path.join(out_dir, "keypoints.json"), sc.keypoints)

    results = run_comparison(sc, method_list, cfg)

    with open(os.path.join(out_dir, "matching.csv"), "w", newline="") as fh:
        fh.write("method,accuracy,objective,iterations,converged,wall_ms\n")
        for method, res in results.items():
            wall = (_FMT % res.wall_ms) if timing else ""
            fh.write(
                f"{method.value},{_FMT % res.accuracy},{_FMT % res.objective},"
                f"{res.iterations},{str(res.converged).lower()},{wall}\n"
            )

    if sc.mass_budget is not None:
        import json

        labeled = sc.keypoints.target_indices
        detected = {
            method.value: [int(j) for j in received_mass_outliers(res.plan, sc.eta, labeled)]
            for method, res in results.items()
            if method in (Method.PARTIAL_KP, Method.PARTIAL_KPG_RL)
        }
        doc = {
            "eta": sc.eta,
            "planted": [int(j) for j in sc.outlier_indices],
            "detected": detected,
        }
        with open(os.path.join(out_dir, "outliers.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")

    if any(not res.converged for res in results.values()):
        click.echo("at least one method hit its iteration budget", err=True)
        return 3
    return 0


def main(argv=None) -> int:
    """Entry point with explicit exit-code mapping."""
    try:
        rv = cli.main(args=argv, prog_name="kpg-ot", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except MassMismatchAtKeypoint as exc:
        # Mismatched keypoint masses are an input-file problem, not a
        # property of the transport polytope; report them as usage errors.
        click.echo(f"error: {exc}", err=True)
        return 1
    except Infeasible as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except NumericalUnderflow as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except KpgOtError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return int(rv) if isinstance(rv, int) else 0


if __name__ == "__main__":
    import sys

    sys.exit(main())
