"""Command-line front end.

Each subcommand reads CSV inputs, calls the same service-layer operations
the HTTP endpoints use, writes its outputs, and drops a JSON run manifest
next to the primary output (``<out>.manifest.json``).  The manifest
records the resolved arguments and content digests of every input and
output, so any run can be replayed byte for byte; ``argv_from_manifest``
rebuilds the argument vector.

Exit codes: 0 on success, 1 when validation or numerics reject the
input (message ``<Code>: <detail>`` on stderr), 2 on usage errors.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .api import service
from .design import VARIANTS, validate_design
from .errors import HvError, NonProbabilityError
from .joint import DEFAULT_ENUM_CAP
from .montecarlo import ESTIMATORS, Scenario
from .populations import MODEL_NAMES, RECIPES, Population, PopulationConfig
from .tables import (
    build_manifest,
    manifest_path_for,
    read_population_csv,
    read_sample_csv,
    read_units_csv,
    write_distribution_csv,
    write_manifest,
    write_population_csv,
    write_profile_csv,
    write_report_csv,
    write_sample_csv,
)

_out_path = click.Path(dir_okay=False, writable=True)
_in_path = click.Path(exists=True, dir_okay=False)


def handle_errors(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except HvError as exc:
            click.echo(f"{exc.code}: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option(__version__)
def main():
    """Fixed-size unequal-probability sampling toolkit."""


def _load_design(pi_path: str, pps: int | None):
    ids, cols = read_units_csv(pi_path)
    if pps is not None:
        if "x" not in cols:
            raise NonProbabilityError(f"{pi_path}: --pps needs an x column")
        return ids, service.design_from_input(x=cols["x"], n=pps)
    if "pi" not in cols:
        raise NonProbabilityError(f"{pi_path}: missing column pi")
    return ids, validate_design(cols["pi"])


def _emit_manifest(subcommand, arguments, inputs, outputs, extra=None):
    manifest = build_manifest(
        subcommand, arguments, inputs, outputs, __version__, extra=extra
    )
    write_manifest(manifest_path_for(outputs[0]), manifest)


def argv_from_manifest(manifest: dict) -> list[str]:
    """Rebuild the argument vector a manifest's run used."""
    argv = [manifest["subcommand"]]
    for key, val in manifest["arguments"].items():
        if val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if key == "variance":
                argv.append("--variance" if val else "--no-variance")
            elif val:
                argv.append(flag)
        else:
            argv.extend([flag, str(val)])
    return argv


def _parse_grid(spec: str) -> tuple[int, ...]:
    try:
        if ":" in spec:
            start, stop, step = (int(v) for v in spec.split(":"))
            return tuple(range(start, stop + 1, step))
        if "," in spec:
            return tuple(int(v) for v in spec.split(","))
        return (int(spec),)
    except ValueError:
        raise click.UsageError(
            f"grid {spec!r} is not start:stop:step or a comma list"
        ) from None


@main.command()
@click.option("--pi", "pi_path", required=True, type=_in_path, help="Design CSV (unit_id, pi; or unit_id, x with --pps).")
@click.option("--pps", type=int, default=None, help="Sample size; reads the x column as sizes.")
@click.option("--seed", type=int, required=True, help="Stream seed; required, never time-based.")
@click.option("--stream-id", type=int, default=0, show_default=True)
@click.option("--variant", type=click.Choice(VARIANTS), default="sequential", show_default=True)
@click.option("--out", required=True, type=_out_path)
@handle_errors
def sample(pi_path, pps, seed, stream_id, variant, out):
    """Draw one sample; write per-unit pi, pi0 and membership."""
    ids, design = _load_design(pi_path, pps)
    sel = service.sample_op(design, seed, stream_id, variant)
    write_sample_csv(out, ids, sel)
    _emit_manifest(
        "sample",
        {
            "pi": pi_path,
            "pps": pps,
            "seed": seed,
            "stream_id": stream_id,
            "variant": variant,
            "out": out,
        },
        [pi_path],
        [out],
    )


@main.command()
@click.option("--pi", "pi_path", required=True, type=_in_path)
@click.option("--pps", type=int, default=None)
@click.option("--joint", "joint_kind", type=click.Choice(["conditional", "unconditional"]), default=None, help="Write pairwise probabilities instead of first-order ones.")
@click.option("--nprime", type=int, default=None, help="Working size for --joint conditional.")
@click.option("--work-budget", type=float, default=5e8, show_default=True, help="Warn when the unconditional computation exceeds n*N^2 of this.")
@click.option("--out", required=True, type=_out_path)
@handle_errors
def probs(pi_path, pps, joint_kind, nprime, work_budget, out):
    """Export first- or second-order inclusion probabilities."""
    ids, design = _load_design(pi_path, pps)
    if joint_kind is None:
        pi = service.first_order_op(design)
        with open(out, "w", newline="") as fh:
            fh.write("unit_id,pi\n")
            for k in range(design.size):
                fh.write(f"{ids[k]},{float(pi[k])!r}\n")
    else:
        work = design.n * design.size**2
        if joint_kind == "unconditional" and work > work_budget:
            click.echo(
                f"warning: unconditional joint needs ~{work:.2e} operations, "
                f"budget is {work_budget:.2e}",
                err=True,
            )
        jm = service.joint_op(design, joint_kind, nprime)
        inv = np.empty(design.size, dtype=int)
        inv[design.perm] = np.arange(design.size)
        vals = jm.values[np.ix_(inv, inv)]
        with open(out, "w", newline="") as fh:
            fh.write("row,col,value\n")
            for i in range(design.size):
                for j in range(design.size):
                    fh.write(f"{ids[i]},{ids[j]},{float(vals[i, j])!r}\n")
    _emit_manifest(
        "probs",
        {
            "pi": pi_path,
            "pps": pps,
            "joint": joint_kind,
            "nprime": nprime,
            "work_budget": work_budget,
            "out": out,
        },
        [pi_path],
        [out],
    )


def _seed_from_manifest(sample_path: str):
    mp = manifest_path_for(sample_path)
    if not os.path.exists(mp):
        return None
    try:
        with open(mp) as fh:
            manifest = json.load(fh)
        seed = manifest.get("arguments", {}).get("seed")
        return None if seed is None else int(seed)
    except (OSError, ValueError):
        return None


@main.command()
@click.option("--sample", "sample_path", required=True, type=_in_path, help="Sample CSV written by the sample subcommand.")
@click.option("--y", "y_path", required=True, type=_in_path, help="CSV with unit_id and a value column.")
@click.option("--y-column", default="y", show_default=True)
@click.option("--estimator", type=click.Choice(["ht", "cht"]), default="cht", show_default=True)
@click.option("--variance/--no-variance", default=False, help="Attach the squared-difference variance estimate (cht only).")
@click.option("--out", required=True, type=_out_path)
@handle_errors
def estimate(sample_path, y_path, y_column, estimator, variance, out):
    """Estimate a total from a written sample and a variable file."""
    _, pi, pi0, ind = read_sample_csv(sample_path)
    _, ycols = read_units_csv(y_path)
    if y_column not in ycols:
        raise NonProbabilityError(f"{y_path}: missing column {y_column}")
    result, selection = service.estimate_op(
        pi, pi0, ind, ycols[y_column], estimator, variance
    )
    record = {
        "estimator": result.estimator_kind,
        "total": result.total,
        "mean": result.mean,
        "variance_estimate": result.variance_estimate,
        "n_prime": selection.split.n_prime,
        "seed": _seed_from_manifest(sample_path),
    }
    with open(out, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit_manifest(
        "estimate",
        {
            "sample": sample_path,
            "y": y_path,
            "y_column": y_column,
            "estimator": estimator,
            "variance": variance,
            "out": out,
        },
        [sample_path, y_path],
        [out],
    )


@main.command()
@click.option("--pi", "pi_path", default=None, type=_in_path, help="Profile one design file.")
@click.option("--pps", type=int, default=None)
@click.option("--recipe", type=click.Choice(RECIPES), default=None, help="Profile recipe-generated designs along --grid.")
@click.option("--fraction", type=float, default=0.2, show_default=True)
@click.option("--grid", default=None, help="start:stop:step or comma list of sample sizes.")
@click.option("--population-seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=_out_path)
@handle_errors
def diagnostics(pi_path, pps, recipe, fraction, grid, population_seed, out):
    """Write gap indicators (d1, d2, d3) and the scaled-probability range."""
    if (pi_path is None) == (recipe is None):
        raise click.UsageError("give either --pi or --recipe with --grid")
    if pi_path is not None:
        _, design = _load_design(pi_path, pps)
        rows = [service.profile_op(design)]
        inputs = [pi_path]
    else:
        if grid is None:
            raise click.UsageError("--recipe needs --grid")
        rows = service.curve_op(recipe, fraction, _parse_grid(grid), population_seed)
        inputs = []
    write_profile_csv(out, rows)
    _emit_manifest(
        "diagnostics",
        {
            "pi": pi_path,
            "pps": pps,
            "recipe": recipe,
            "fraction": fraction,
            "grid": grid,
            "population_seed": population_seed,
            "out": out,
        },
        inputs,
        [out],
    )


@main.command()
@click.option("--recipe", required=True, type=click.Choice(RECIPES))
@click.option("--size", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", required=True, type=_out_path)
@handle_errors
def generate(recipe, size, seed, out):
    """Generate a synthetic population with four study variables."""
    config = PopulationConfig(size_distribution=recipe, size=size, seed=seed)
    pop = service.generate_op(config)
    write_population_csv(out, pop)
    _emit_manifest(
        "generate",
        {"recipe": recipe, "size": size, "seed": seed, "out": out},
        [],
        [out],
        extra={
            "population": {
                "config": dataclasses.asdict(config),
                "coefficients": pop.coefficients,
            }
        },
    )


@main.command()
@click.option("--population", "population_path", default=None, type=_in_path, help="Fixed population CSV (unit_id, x, y1..y4).")
@click.option("--recipe", type=click.Choice(RECIPES), default=None, help="Regenerate the population per grid point at constant fraction.")
@click.option("--fraction", type=float, default=0.2, show_default=True)
@click.option("--population-seed", type=int, default=0, show_default=True)
@click.option("--grid", required=True, help="start:stop:step or comma list of sample sizes.")
@click.option("--replicates", type=int, required=True)
@click.option("--estimators", default="HT,CHT", show_default=True)
@click.option("--variables", default=",".join(MODEL_NAMES), show_default=True)
@click.option("--variant", type=click.Choice(VARIANTS), default="sequential", show_default=True)
@click.option("--seed", type=int, required=True, help="Master seed for replicate streams.")
@click.option("--out", required=True, type=_out_path)
@handle_errors
def simulate(
    population_path,
    recipe,
    fraction,
    population_seed,
    grid,
    replicates,
    estimators,
    variables,
    variant,
    seed,
    out,
):
    """Replicated variance study; writes v_mc and rv_mc per cell."""
    if (population_path is None) == (recipe is None):
        raise click.UsageError("give either --population or --recipe")
    grid_values = _parse_grid(grid)
    est = tuple(e.strip().upper() for e in estimators.split(",") if e.strip())
    var_names = tuple(v.strip() for v in variables.split(",") if v.strip())
    if population_path is not None:
        _, x, y = read_population_csv(population_path)
        pop = Population(x=x, y=y, mu_x=float(x.mean()))
        scenario = Scenario(
            grid=grid_values,
            replicates=replicates,
            master_seed=seed,
            variant=variant,
            estimators=est,
            variables=var_names,
            population=pop,
        )
    else:
        scenario = service.scenario_from_recipe(
            grid_values,
            replicates,
            seed,
            recipe,
            fraction,
            population_seed,
            variant,
            est,
            var_names,
        )
    started = time.monotonic()
    report = service.simulate_op(scenario)
    wall = time.monotonic() - started
    write_report_csv(out, report)
    _emit_manifest(
        "simulate",
        {
            "population": population_path,
            "recipe": recipe,
            "fraction": fraction,
            "population_seed": population_seed,
            "grid": grid,
            "replicates": replicates,
            "estimators": estimators,
            "variables": variables,
            "variant": variant,
            "seed": seed,
            "out": out,
        },
        [population_path] if population_path else [],
        [out],
        extra={
            "scenario": {
                "grid": list(grid_values),
                "replicates": replicates,
                "master_seed": seed,
                "variant": variant,
                "estimators": list(est),
                "variables": list(var_names),
                "population": population_path,
                "recipe": recipe,
                "fraction": None if population_path else fraction,
                "population_seed": None if population_path else population_seed,
            },
            "wall_time_seconds": wall,
        },
    )


@main.command("enumerate")
@click.option("--pi", "pi_path", required=True, type=_in_path)
@click.option("--pps", type=int, default=None)
@click.option("--out", required=True, type=_out_path, help="Exact distribution CSV.")
@click.option("--report", "report_path", default=None, type=_out_path, help="Verification report JSON; defaults to <out>.report.json.")
@handle_errors
def enumerate_cmd(pi_path, pps, out, report_path):
    """Enumerate the exact sample distribution of both variants.

    Capped by HV_MAX_ENUM_N (default 12) since cost grows exponentially.
    """
    cap = int(os.environ.get("HV_MAX_ENUM_N", DEFAULT_ENUM_CAP))
    ids, design = _load_design(pi_path, pps)
    seq, _, report = service.enumerate_op(design, cap)
    write_distribution_csv(out, seq, ids, design)
    if report_path is None:
        report_path = out + ".report.json"
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _emit_manifest(
        "enumerate",
        {"pi": pi_path, "pps": pps, "out": out, "report": report_path},
        [pi_path],
        [out, report_path],
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .api.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
