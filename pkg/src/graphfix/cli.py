"""Command-line front end.

Subcommands: verify, iterate, bernstein, fbvp, sweep.  Global flags pick
the output directory, the seed recorded in reports, and the table format
(csv or json).  Exit codes partition outcomes: 0 success, 1 hypothesis or
validation failure, 2 input error, 3 budget exhausted.  Every report
embeds the run manifest (subcommand, input, parameters, seed) so a run
can be re-executed exactly.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field

import click
import numpy as np

from .bernstein import QParams, iterate_to_limit
from .engine import (
    Converged,
    HypothesisViolated,
    IterationConfig,
    IterationOutcome,
    MaxIterExceeded,
    run_coincidence_iteration,
)
from .errors import DomainError, HypothesisViolation, InputError
from .fbvp import FbvpProblem, picard_solve
from .metric import Gauge
from .problems import BUILTIN_NAMES, builtin_problem, load_problem
from .serialize import json_dump, json_dumps, write_table
from .verifier import verify_coincidence_hypotheses, verify_kamran_inequality

EXIT_OK = 0
EXIT_HYPOTHESIS = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


@dataclass
class RunManifest:
    """What was run: subcommand, input, parameters, output home, seed."""

    subcommand: str
    input: str | None
    params: dict = field(default_factory=dict)
    out: str = "."
    seed: int = 0
    format: str = "csv"

    def to_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "input": self.input,
            "params": self.params,
            "out": self.out,
            "seed": self.seed,
            "format": self.format,
        }


def _load(problem_ref: str, depth: int | None):
    if problem_ref in BUILTIN_NAMES:
        return builtin_problem(problem_ref, depth=depth)
    if os.path.exists(problem_ref):
        return load_problem(problem_ref)
    raise InputError(
        f"{problem_ref!r} is neither a builtin ({', '.join(BUILTIN_NAMES)}) "
        "nor an existing file"
    )


def _emit(manifest: RunManifest, name: str, payload: dict) -> dict:
    payload = {"manifest": manifest.to_dict(), **payload}
    os.makedirs(manifest.out, exist_ok=True)
    json_dump(payload, os.path.join(manifest.out, name))
    return payload


# ---------------------------------------------------------------------------
# Runners (shared by the click commands and the sweep executor)
# ---------------------------------------------------------------------------

def run_verify(manifest: RunManifest) -> int:
    params = manifest.params
    problem = _load(manifest.input, params.get("truncate"))
    report = verify_coincidence_hypotheses(
        problem.space,
        problem.f,
        problem.F,
        problem.edges,
        problem.gauge,
        truncated=problem.truncated,
    )
    payload = {"hypotheses": report.to_dict()}
    ok = report.all_ok
    if params.get("kamran"):
        kamran = verify_kamran_inequality(
            problem.space,
            problem.f,
            problem.F,
            Gauge.constant(params.get("kamran_sup", 0.999)),
            M=params.get("M", 0.0),
        )
        payload["kamran"] = kamran.to_dict()
        ok = ok and kamran.holds
    payload = _emit(manifest, "report.json", payload)
    click.echo(json_dumps(payload))
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def _trace_rows(outcome: IterationOutcome) -> list[list]:
    return [
        [r.n, r.w_label or "", r.fw_label or "", r.d, r.residual, r.bound, r.edge_ok]
        for r in outcome.trace.rows
    ]


_TRACE_HEADER = ["n", "w_label", "fw_label", "d_n", "D_n", "tail_bound_n", "edge_ok"]


def run_iterate(manifest: RunManifest) -> int:
    params = manifest.params
    problem = _load(manifest.input, params.get("truncate"))
    replacements = {}
    if params.get("w0") is not None:
        replacements["w0"] = params["w0"]
    if params.get("p0") is not None:
        replacements["p0"] = params["p0"]
    cfg = problem.config
    cfg_updates = {
        k: params[k]
        for k in ("tol", "residual_tol", "max_iter")
        if params.get(k) is not None
    }
    if cfg_updates:
        replacements["config"] = dataclasses.replace(cfg, **cfg_updates)
    if replacements:
        problem = dataclasses.replace(problem, **replacements)
    outcome = run_coincidence_iteration(problem)

    os.makedirs(manifest.out, exist_ok=True)
    ext = "json" if manifest.format == "json" else "csv"
    write_table(
        os.path.join(manifest.out, f"trace.{ext}"),
        _TRACE_HEADER,
        _trace_rows(outcome),
        manifest.format,
    )
    payload = _emit(manifest, "outcome.json", outcome.to_dict())
    click.echo(json_dumps(payload))
    if isinstance(outcome.status, Converged):
        return EXIT_OK
    if isinstance(outcome.status, MaxIterExceeded):
        return EXIT_BUDGET
    return EXIT_HYPOTHESIS


_PHI_BUILTINS = {
    "square": lambda a: a * a,
    "cube": lambda a: a**3,
    "sin": lambda a: math.sin(math.pi * a),
}


def _phi_from_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load phi samples from {path}: {exc}") from None
    pts = sorted((float(a), float(v)) for a, v in data)
    if not pts:
        raise InputError("phi sample file is empty")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    return lambda a: float(np.interp(a, xs, ys))


def run_bernstein(manifest: RunManifest) -> int:
    params = manifest.params
    phi_name = params["phi"]
    if phi_name == "file":
        if not params.get("phi_file"):
            raise InputError("--phi file needs --phi-file PATH")
        phi = _phi_from_file(params["phi_file"])
    elif phi_name in _PHI_BUILTINS:
        phi = _PHI_BUILTINS[phi_name]
    else:
        raise InputError(f"unknown phi {phi_name!r}")

    qp = QParams(params["n"], params["q"])
    result = iterate_to_limit(
        qp, phi, tol=params.get("tol", 1e-12), max_iter=params.get("max_iter", 200_000)
    )
    grid = np.linspace(0.0, 1.0, params.get("grid", 101))
    limit_vals = result.evaluate_grid(grid)
    interp_vals = result.interpolant(grid)
    rows = [
        [float(a), float(lv), float(iv), float(abs(lv - iv))]
        for a, lv, iv in zip(grid, limit_vals, interp_vals)
    ]
    os.makedirs(manifest.out, exist_ok=True)
    ext = "json" if manifest.format == "json" else "csv"
    write_table(
        os.path.join(manifest.out, f"bernstein.{ext}"),
        ["a", "limit", "interpolant", "abs_error"],
        rows,
        manifest.format,
    )
    payload = _emit(
        manifest,
        "summary.json",
        {
            "n": qp.n,
            "q": qp.q,
            "iterations": result.iterations,
            "final_displacement": result.final_displacement,
            "b_nq": result.b_nq,
            "converged": result.converged,
            "endpoint_nonneg": result.endpoint_nonneg,
        },
    )
    click.echo(json_dumps(payload))
    if result.converged:
        return EXIT_OK
    if isinstance(result.outcome.status, MaxIterExceeded):
        return EXIT_BUDGET
    return EXIT_HYPOTHESIS


_FORCING_BUILTINS = {
    "sin-pi": (lambda b, w: math.pi**2 * math.sin(math.pi * b), 0.0),
    "const": (lambda b, w: 1.0, 0.0),
    "linear-w": (lambda b, w: 0.5 * w + 1.0, 0.5),
}

_EVAL_NAMES = {
    name: getattr(math, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "atan", "asin", "acos",
        "sinh", "cosh", "tanh", "pi", "e",
    )
}


def _forcing_from_file(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load forcing from {path}: {exc}") from None
    if "expr" not in data:
        raise InputError("forcing file needs an 'expr' of b and w")
    code = compile(data["expr"], path, "eval")
    for name in code.co_names:
        if name not in _EVAL_NAMES and name not in ("b", "w"):
            raise InputError(f"forcing expression uses unknown name {name!r}")

    def g(b, w):
        return float(eval(code, {"__builtins__": {}}, {**_EVAL_NAMES, "b": b, "w": w}))

    return g, float(data.get("gauge_sup", 0.0))


def run_fbvp(manifest: RunManifest) -> int:
    params = manifest.params
    name = params["forcing"]
    if name == "file":
        if not params.get("forcing_file"):
            raise InputError("--forcing file needs --forcing-file PATH")
        g, default_sup = _forcing_from_file(params["forcing_file"])
    elif name in _FORCING_BUILTINS:
        g, default_sup = _FORCING_BUILTINS[name]
    else:
        raise InputError(f"unknown forcing {name!r}")
    gauge_sup = params.get("gauge_sup")
    gauge = Gauge.constant(default_sup if gauge_sup is None else gauge_sup)

    problem = FbvpProblem(
        beta=params["beta"],
        g=g,
        gauge=gauge,
        grid_m=params.get("m", 200),
        tol=params.get("tol", 1e-10),
        max_iter=params.get("max_iter", 10_000),
    )
    report = picard_solve(problem)
    rows = [
        [float(b), float(u)]
        for b, u in zip(problem.grid, report.solution.values)
    ]
    os.makedirs(manifest.out, exist_ok=True)
    ext = "json" if manifest.format == "json" else "csv"
    write_table(
        os.path.join(manifest.out, f"solution.{ext}"),
        ["b", "u_star"],
        rows,
        manifest.format,
    )
    payload = _emit(
        manifest,
        "report.json",
        {"beta": problem.beta, "m": problem.grid_m, **report.to_dict()},
    )
    click.echo(json_dumps(payload))
    if report.converged:
        return EXIT_OK
    if isinstance(report.outcome.status, MaxIterExceeded):
        return EXIT_BUDGET
    return EXIT_HYPOTHESIS


_RUNNERS = {
    "verify": run_verify,
    "iterate": run_iterate,
    "bernstein": run_bernstein,
    "fbvp": run_fbvp,
}


def run_sweep(manifest: RunManifest) -> int:
    try:
        with open(manifest.input) as fh:
            jobs = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read sweep file: {exc}") from None
    if not isinstance(jobs, list) or not jobs:
        raise InputError("sweep file must be a non-empty array of runs")

    def one(idx_job):
        idx, job = idx_job
        sub = job.get("subcommand")
        if sub not in _RUNNERS:
            raise InputError(f"sweep job {idx}: unknown subcommand {sub!r}")
        sub_manifest = RunManifest(
            subcommand=sub,
            input=job.get("input"),
            params=dict(job.get("params", {})),
            out=os.path.join(manifest.out, f"run-{idx:03d}"),
            seed=manifest.seed,
            format=manifest.format,
        )
        return idx, _RUNNERS[sub](sub_manifest)

    workers = max(1, int(manifest.params.get("jobs", 1)))
    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        for idx, code in pool.map(one, enumerate(jobs)):
            results[idx] = code
    payload = _emit(
        manifest,
        "sweep.json",
        {"runs": [{"index": i, "exit_code": results[i]} for i in sorted(results)]},
    )
    click.echo(json_dumps(payload))
    return max(results.values(), default=EXIT_OK)


# ---------------------------------------------------------------------------
# click wiring
# ---------------------------------------------------------------------------

def _dispatch(runner, manifest: RunManifest) -> None:
    try:
        code = runner(manifest)
    except (InputError, DomainError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except HypothesisViolation as exc:
        click.echo(f"hypothesis violated: {exc}", err=True)
        sys.exit(EXIT_HYPOTHESIS)
    sys.exit(code)


@click.group()
@click.option("--out", default=".", show_default=True, help="Output directory.")
@click.option("--seed", default=0, show_default=True, help="Seed recorded in reports.")
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["csv", "json"]),
    default="csv",
    show_default=True,
    help="Table output format.",
)
@click.pass_context
def main(ctx, out, seed, fmt):
    """Graph-constrained coincidence iteration toolkit."""
    ctx.obj = {"out": out, "seed": seed, "format": fmt}


def _manifest(ctx, subcommand, input_ref, params) -> RunManifest:
    return RunManifest(
        subcommand=subcommand,
        input=input_ref,
        params=params,
        out=ctx.obj["out"],
        seed=ctx.obj["seed"],
        format=ctx.obj["format"],
    )


@main.command()
@click.argument("problem")
@click.option("--kamran", is_flag=True, help="Also check the Hausdorff inequality.")
@click.option("--M", "m_const", type=float, default=0.0, show_default=True)
@click.option("--kamran-sup", type=float, default=0.999, show_default=True)
@click.option("--truncate", type=int, default=None, help="Builtin truncation depth.")
@click.pass_context
def verify(ctx, problem, kamran, m_const, kamran_sup, truncate):
    """Check the contraction/graph hypotheses of PROBLEM (builtin or file)."""
    params = {
        "kamran": kamran,
        "M": m_const,
        "kamran_sup": kamran_sup,
        "truncate": truncate,
    }
    _dispatch(run_verify, _manifest(ctx, "verify", problem, params))


@main.command()
@click.argument("problem")
@click.option("--w0", default=None, help="Start point override.")
@click.option("--p0", default=None, help="Start selection override.")
@click.option("--tol", type=float, default=None)
@click.option("--residual-tol", type=float, default=None)
@click.option("--max-iter", type=int, default=None)
@click.option("--truncate", type=int, default=None, help="Builtin truncation depth.")
@click.pass_context
def iterate(ctx, problem, w0, p0, tol, residual_tol, max_iter, truncate):
    """Run the coincidence iteration on PROBLEM; write trace and outcome."""
    params = {
        "w0": w0,
        "p0": p0,
        "tol": tol,
        "residual_tol": residual_tol,
        "max_iter": max_iter,
        "truncate": truncate,
    }
    _dispatch(run_iterate, _manifest(ctx, "iterate", problem, params))


@main.command()
@click.option("--n", type=int, required=True, help="Operator degree.")
@click.option("--q", type=float, required=True, help="Deformation parameter.")
@click.option(
    "--phi",
    type=click.Choice(["square", "cube", "sin", "file"]),
    default="square",
    show_default=True,
)
@click.option("--phi-file", default=None, help="JSON [[a, value], ...] samples.")
@click.option("--tol", type=float, default=1e-12, show_default=True)
@click.option("--max-iter", type=int, default=200_000, show_default=True)
@click.option("--grid", type=int, default=101, show_default=True)
@click.pass_context
def bernstein(ctx, n, q, phi, phi_file, tol, max_iter, grid):
    """Iterate the nonlinear q-Bernstein operator to its limit."""
    params = {
        "n": n,
        "q": q,
        "phi": phi,
        "phi_file": phi_file,
        "tol": tol,
        "max_iter": max_iter,
        "grid": grid,
    }
    _dispatch(run_bernstein, _manifest(ctx, "bernstein", None, params))


@main.command()
@click.option("--beta", type=float, required=True, help="Fractional order (> 1).")
@click.option(
    "--forcing",
    type=click.Choice(["sin-pi", "const", "linear-w", "file"]),
    default="sin-pi",
    show_default=True,
)
@click.option("--forcing-file", default=None, help="JSON {'expr': ..., 'gauge_sup': ...}.")
@click.option("--m", type=int, default=200, show_default=True, help="Grid panels (even).")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iter", type=int, default=10_000, show_default=True)
@click.option("--gauge-sup", type=float, default=None, help="Override the gauge bound.")
@click.pass_context
def fbvp(ctx, beta, forcing, forcing_file, m, tol, max_iter, gauge_sup):
    """Solve the fractional boundary problem by Picard iteration."""
    params = {
        "beta": beta,
        "forcing": forcing,
        "forcing_file": forcing_file,
        "m": m,
        "tol": tol,
        "max_iter": max_iter,
        "gauge_sup": gauge_sup,
    }
    _dispatch(run_fbvp, _manifest(ctx, "fbvp", None, params))


@main.command()
@click.argument("specfile")
@click.option("--jobs", type=int, default=1, show_default=True)
@click.pass_context
def sweep(ctx, specfile, jobs):
    """Fan out independent runs described in SPECFILE (JSON array)."""
    _dispatch(run_sweep, _manifest(ctx, "sweep", specfile, {"jobs": jobs}))


if __name__ == "__main__":
    main()
