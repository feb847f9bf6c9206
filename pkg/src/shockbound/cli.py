"""Command-line interface.

Every command is rerunnable bit-identically from its flags and seed: CSV
outputs start with a comment line carrying the tool version and a hash of
the effective configuration, and contain no wall-clock fields. The default
output directory comes from SHOCKBOUND_OUTDIR (falling back to the current
directory).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, ouq as ouq_mod, sampling
from .burgers import BurgersParams, SolveConfig, solve
from .errors import ShockboundError
from .optimize import DeConfig

TABLE1_V = (0.1, 0.05)
TABLE1_DELTAS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 0.0)


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _file_digest(path) -> str:
    # identify inputs by content, not by path, so reruns from different
    # directories hash identically
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]


def _comment(config: dict) -> str:
    return f"shockbound {__version__} config={_config_hash(config)}"


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows, config: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {_comment(config)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    # persist the effective configuration for exact reruns
    with open(path.with_suffix(path.suffix + ".config.json"), "w") as fh:
        json.dump(config, fh, indent=1, sort_keys=True)


def _out_dir(out_dir) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


out_dir_option = click.option(
    "--out-dir",
    envvar="SHOCKBOUND_OUTDIR",
    default=".",
    show_default=True,
    help="Output directory (env: SHOCKBOUND_OUTDIR).",
)


@click.group()
@click.version_option(version=__version__, prog_name="shockbound")
def main():
    """Transition-layer solves, Monte Carlo sampling, and optimal bounds."""


@main.command("solve")
@click.option("--v", type=float, required=True, help="Viscosity (> 0).")
@click.option("--delta", type=float, required=True, help="Boundary perturbation (>= 0).")
@click.option("--nbins", type=int, default=4, show_default=True)
@click.option("--ftol", type=float, default=1e-8, show_default=True)
@click.option("--accept-tol", type=float, default=1e-9, show_default=True)
def cmd_solve(v, delta, nbins, ftol, accept_tol):
    """Solve for the transition-layer location at one (v, delta)."""
    cfg = SolveConfig(nbins=nbins, ftol=ftol, accept_tol=accept_tol)
    try:
        sol = solve(BurgersParams(v=v, delta=delta), cfg)
    except ShockboundError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    click.echo(f"z_star={sol.z_star!r} a={sol.a!r} fit={sol.fit!r}")


@main.command("table1")
@out_dir_option
@click.option("--out", default="table1.csv", show_default=True, help="CSV filename.")
@click.option("--nbins", type=int, default=4, show_default=True)
@click.option("--ftol", type=float, default=1e-8, show_default=True)
@click.option("--accept-tol", type=float, default=1e-9, show_default=True)
def cmd_table1(out_dir, out, nbins, ftol, accept_tol):
    """Transition-layer locations over the reference (v, delta) grid."""
    cfg = SolveConfig(nbins=nbins, ftol=ftol, accept_tol=accept_tol)
    config = {
        "command": "table1", "nbins": nbins, "ftol": ftol,
        "accept_tol": accept_tol,
    }
    rows = []
    failures = 0
    for v in TABLE1_V:
        for delta in TABLE1_DELTAS:
            try:
                sol = solve(BurgersParams(v=v, delta=delta), cfg)
                rows.append((v, delta, sol.z_star, sol.a, sol.fit, "ok"))
            except ShockboundError:
                failures += 1
                rows.append((v, delta, float("nan"), float("nan"), float("nan"), "failed"))
    path = _out_dir(out_dir) / out
    _write_csv(path, ["v", "delta", "z_star", "a", "fit", "status"], rows, config)
    for row in rows:
        click.echo(f"v={row[0]} delta={row[1]} z_star={_fmt(row[2])} [{row[5]}]")
    click.echo(f"wrote {path}")
    if failures:
        click.echo(f"error: {failures} cell(s) failed to converge", err=True)
        sys.exit(1)


@main.command("mc-sample")
@out_dir_option
@click.option("--v", type=float, required=True)
@click.option("--eps", type=float, required=True)
@click.option("--n", type=int, default=10000, show_default=True)
@click.option("--dist", type=click.Choice(["uniform", "truncgauss"]), default="uniform",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--accept-tol", type=float, default=1e-9, show_default=True)
@click.option("--workers", type=int, default=-1, show_default=True,
              help="Worker processes; -1 uses all cores.")
@click.option("--out", default=None, help="CSV filename (default derived from params).")
def cmd_mc(out_dir, v, eps, n, dist, seed, accept_tol, workers, out):
    """Monte Carlo sampling of transition-layer locations."""
    import os

    if workers < 0:
        workers = os.cpu_count() or 1
    config = {
        "command": "mc-sample", "v": v, "eps": eps, "n": n, "dist": dist,
        "seed": seed, "accept_tol": accept_tol,
    }
    try:
        samples = sampling.mc_run(
            v, eps, n, dist=dist, accept_tol=accept_tol, seed=seed, workers=workers
        )
    except ShockboundError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    if out is None:
        out = f"mc_{dist}_v{v}_eps{eps}_n{n}_seed{seed}.csv"
    path = _out_dir(out_dir) / out
    sampling.save_sample_set(samples, path, comment=_comment(config))
    zm, zs = sampling.moments(samples.z)
    dm, ds = sampling.moments(samples.delta)
    click.echo(f"z_mean={zm!r} z_std={zs!r} d_mean={dm!r} d_std={ds!r} "
               f"misses={samples.miss_count}")
    click.echo(f"wrote {path} (+ sidecar {path.with_suffix('.json').name})")


@main.command("cdf")
@out_dir_option
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--column", type=click.Choice(["z", "delta"]), default="z", show_default=True)
@click.option("--n-subsample", type=int, default=None,
              help="Random subsample size (without replacement).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--lo", type=float, default=None)
@click.option("--hi", type=float, default=None)
@click.option("--out", default="cdf.csv", show_default=True)
def cmd_cdf(out_dir, input_path, column, n_subsample, seed, lo, hi, out):
    """Empirical CDF step points from a stored sample set."""
    config = {
        "command": "cdf", "input_sha": _file_digest(input_path), "column": column,
        "n_subsample": n_subsample, "seed": seed, "lo": lo, "hi": hi,
    }
    samples = sampling.load_sample_set(input_path)
    if n_subsample is not None:
        samples = sampling.subsample(samples, n_subsample, seed)
    values = samples.z if column == "z" else samples.delta
    try:
        xs, ys = sampling.cdf(values, lo=lo, hi=hi)
    except ShockboundError as err:
        click.echo(f"error: {err}", err=True)
        sys.exit(1)
    path = _out_dir(out_dir) / out
    _write_csv(path, ["x", "y"], list(zip(xs, ys)), config)
    mean, std = sampling.moments(values)
    click.echo(f"n={len(values)} mean={mean!r} std={std!r}")
    click.echo(f"wrote {path}")


@main.command("pof")
@out_dir_option
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--dx", "dx_list", type=int, multiple=True,
              help="Threshold scaling percent (repeatable; default 0..15).")
@click.option("--out", default="pof.csv", show_default=True)
def cmd_pof(out_dir, input_path, dx_list, out):
    """Monte Carlo probability of success from a stored sample set."""
    dx_values = list(dx_list) if dx_list else list(range(16))
    config = {"command": "pof", "input_sha": _file_digest(input_path), "dx": dx_values}
    samples = sampling.load_sample_set(input_path)
    rows = []
    for dx in dx_values:
        p = sampling.p_success(samples, dx)
        rows.append((dx, p))
        click.echo(f"P(success) at dx={dx}: {p!r}")
    path = _out_dir(out_dir) / out
    _write_csv(path, ["dx", "p_success"], rows, config)
    click.echo(f"wrote {path}")


@main.command("mc-bounds")
@out_dir_option
@click.option("--v", type=float, required=True)
@click.option("--eps", type=float, required=True)
@click.option("--n", type=int, default=2000, show_default=True)
@click.option("--dist", type=click.Choice(["uniform", "truncgauss"]), default="uniform",
              show_default=True)
@click.option("--repeats", type=int, default=50, show_default=True)
@click.option("--dx", "dx_list", type=int, multiple=True, default=(0,), show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=-1, show_default=True)
@click.option("--out", default="mc_bounds.csv", show_default=True)
def cmd_mc_bounds(out_dir, v, eps, n, dist, repeats, dx_list, seed, workers, out):
    """Sampled min/mean/max of P(success) over repeated runs."""
    import os

    if workers < 0:
        workers = os.cpu_count() or 1
    config = {
        "command": "mc-bounds", "v": v, "eps": eps, "n": n, "dist": dist,
        "repeats": repeats, "dx": list(dx_list), "seed": seed,
    }
    rows = []
    for dx in dx_list:
        est = sampling.mc_bound_estimate(
            v, eps, n, dist, repeats, dx, seed=seed, workers=workers
        )
        rows.append((dx, est.minimum, est.mean, est.maximum))
        click.echo(f"dx={dx}: min={est.minimum!r} mean={est.mean!r} max={est.maximum!r}")
    path = _out_dir(out_dir) / out
    _write_csv(path, ["dx", "min", "mean", "max"], rows, config)
    click.echo(f"wrote {path}")


def _ouq_job(args):
    problem, checkpoint_path = args
    try:
        return "ok", ouq_mod.solve_bound(problem, checkpoint_path=checkpoint_path)
    except ShockboundError as err:
        return "error", str(err)


@main.command("ouq")
@out_dir_option
@click.option("--v", type=float, required=True)
@click.option("--eps", type=float, required=True)
@click.option("--nx", type=int, default=3, show_default=True)
@click.option("--constraints", "variant",
              type=click.Choice(list(ouq_mod.VARIANTS)), default="mean_delta",
              show_default=True)
@click.option("--direction", type=click.Choice(["both", "upper", "lower"]),
              default="both", show_default=True)
@click.option("--dx", "dx_list", type=int, multiple=True, default=(0,), show_default=True)
@click.option("--targets-file", required=True, type=click.Path(exists=True),
              help="JSON with z_mean, z_std, d_mean, d_std, n "
                   "(an mc-sample sidecar works).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--npop", type=int, default=10, show_default=True)
@click.option("--maxiter", type=int, default=1000, show_default=True)
@click.option("--crossover", type=float, default=0.9, show_default=True)
@click.option("--scaling", type=float, default=0.4, show_default=True)
@click.option("--workers", type=int, default=-1, show_default=True,
              help="Parallel sweep entries; -1 uses all cores.")
@click.option("--out-prefix", default="ouq", show_default=True)
def cmd_ouq(out_dir, v, eps, nx, variant, direction, dx_list, targets_file,
            seed, npop, maxiter, crossover, scaling, workers, out_prefix):
    """Optimal lower/upper bounds on P(success) over constrained measures."""
    import os
    from concurrent.futures import ProcessPoolExecutor

    if workers < 0:
        workers = os.cpu_count() or 1
    with open(targets_file) as fh:
        targets = json.load(fh)
    constraint_set = ouq_mod.ConstraintSet.from_moments(
        variant,
        z_mean=targets["z_mean"],
        z_std=targets["z_std"],
        d_mean=targets["d_mean"],
        d_std=targets["d_std"],
        n=targets["n"],
    )
    solver = DeConfig(npop=npop, maxiter=maxiter, crossover=crossover,
                      scaling=scaling, seed=seed)
    problem = ouq_mod.OuqProblem(
        v=v, eps=eps, z_mean_ref=targets["z_mean"],
        constraint_set=constraint_set, nx=nx, solver=solver,
    )
    config = {
        "command": "ouq", "v": v, "eps": eps, "nx": nx, "constraints": variant,
        "direction": direction, "dx": list(dx_list), "seed": seed,
        "npop": npop, "maxiter": maxiter, "crossover": crossover,
        "scaling": scaling, "targets": targets,
    }
    base = _out_dir(out_dir)

    # independent (dx, direction) jobs with derived seeds; results are keyed,
    # so the output does not depend on the worker count
    directions = ("lower", "upper") if direction == "both" else (direction,)
    keys, jobs = [], []
    for dx in dx_list:
        for d in directions:
            sub = dataclasses.replace(
                problem, dx_percent=dx, direction=d,
                solver=dataclasses.replace(
                    solver, seed=ouq_mod._derived_seed(seed, dx, d)
                ),
            )
            keys.append((dx, d))
            jobs.append((sub, str(base / f"{out_prefix}_solver_dx{dx}_{d}.json")))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outcomes = list(pool.map(_ouq_job, jobs))
    else:
        outcomes = [_ouq_job(job) for job in jobs]

    failures = 0
    rows = []
    for dx in dx_list:
        row = [dx, float("nan"), float("nan"), 0, 0]
        for d in directions:
            status, result = outcomes[keys.index((dx, d))]
            if status == "error":
                click.echo(f"error at dx={dx} {d}: {result}", err=True)
                failures += 1
                continue
            mpath = base / f"{out_prefix}_measure_dx{dx}_{d}.json"
            with open(mpath, "w") as fh:
                json.dump(result.measure.to_dict(), fh, indent=1)
            if d == "lower":
                row[1], row[3] = result.value, result.evals
            else:
                row[2], row[4] = result.value, result.evals
            click.echo(
                f"dx={dx} {d}: P(success) bound={result.value!r} "
                f"feasible={result.feasible} evals={result.evals} "
                f"[{result.termination_reason}]"
            )
        rows.append(tuple(row))
    path = base / f"{out_prefix}_bounds.csv"
    _write_csv(path, ["dx", "lower", "upper", "evals_lower", "evals_upper"],
               rows, config)
    click.echo(f"wrote {path}")
    if failures:
        sys.exit(1)


if __name__ == "__main__":
    main()
