"""Built-in problems, a random conforming-problem generator, and file I/O.

The ternary orbit problem is the package's reference instance: the space
{0, 1} cup {1/3^n}, f dividing by 3, and F hopping two rungs down with a
detour through 1/3.  Its graph (a 1/9-ball) excludes exactly the pairs
that would break the contraction bound, while the Hausdorff-based
inequality fails on the pair (0, 1) for every gauge, which is what the
comparison builtins demonstrate.

Truncation: the infinite tail is cut at depth N; successors that would
fall below the cut are clamped to 0 and their owner points are recorded
in ``truncated`` so hypothesis checks skip pairs that only exist as
truncation artifacts.  The iteration itself needs no skipping: the
clamped step satisfies the per-step inequalities and lands the orbit
exactly on 0.
"""

from __future__ import annotations

import json
import random
from typing import Mapping

from .engine import CoincidenceProblem, IterationConfig
from .errors import InputError
from .metric import (
    ClosedSet,
    EdgeStructure,
    FiniteMetricSpace,
    Gauge,
    edges_from_dict,
    gauge_from_dict,
    space_from_dict,
)

BUILTIN_NAMES = ("example-3-3", "example-3-5", "kamran-counterexample", "identity")


def ternary_orbit_problem(
    depth: int = 12, config: IterationConfig | None = None
) -> CoincidenceProblem:
    """The ternary orbit instance truncated at 1/3^depth (depth >= 3)."""
    if depth < 3:
        raise InputError("ternary orbit problem needs depth >= 3")
    labels = ["0", "1"] + [f"1/{3**n}" for n in range(1, depth + 1)]
    values = [0.0, 1.0] + [3.0**-n for n in range(1, depth + 1)]
    space = FiniteMetricSpace.from_coords(labels, values)

    def lab(n: int) -> str:
        return f"1/{3**n}"

    f = {"0": "0", "1": lab(1)}
    for n in range(1, depth):
        f[lab(n)] = lab(n + 1)
    f[lab(depth)] = "0"  # clamped: true image 1/3^(depth+1) is below the cut

    F = {"0": ClosedSet.finite(["0", lab(1)]), "1": ClosedSet.finite(["0"])}
    for n in range(1, depth - 1):
        F[lab(n)] = ClosedSet.finite([lab(1), lab(n + 2)])
    for n in (depth - 1, depth):
        F[lab(n)] = ClosedSet.finite([lab(1), "0"])  # clamped second member

    return CoincidenceProblem(
        space=space,
        f=f,
        F=F,
        edges=EdgeStructure.ball(space, 1.0 / 9.0),
        gauge=Gauge.constant(1.0 / 3.0),
        w0=lab(1),
        p0=lab(3),
        config=config or IterationConfig(),
        truncated=frozenset({lab(depth - 1), lab(depth)}),
    )


def identity_problem(config: IterationConfig | None = None) -> CoincidenceProblem:
    """Every point is a common fixed point: f = id, F(w) = {w}."""
    labels = ["0", "1/4", "1/2", "3/4", "1"]
    values = [0.0, 0.25, 0.5, 0.75, 1.0]
    space = FiniteMetricSpace.from_coords(labels, values)
    return CoincidenceProblem(
        space=space,
        f={s: s for s in labels},
        F={s: ClosedSet.finite([s]) for s in labels},
        edges=EdgeStructure.ball(space, 2.0),
        gauge=Gauge.constant(0.5),
        w0="0",
        p0="0",
        config=config or IterationConfig(),
    )


def builtin_problem(
    name: str, depth: int | None = None, config: IterationConfig | None = None
) -> CoincidenceProblem:
    """Look up an embedded problem by its public name."""
    if name == "example-3-3" or name == "example-3-5":
        # same truncated dataset; the second name flags the comparison use
        return ternary_orbit_problem(depth or 12, config)
    if name == "kamran-counterexample":
        # a small cut suffices: the violating pair (0, 1) survives any depth
        return ternary_orbit_problem(depth or 4, config)
    if name == "identity":
        return identity_problem(config)
    raise InputError(f"unknown builtin problem {name!r}; known: {BUILTIN_NAMES}")


def random_ladder_problem(
    rng: random.Random,
    max_points: int = 12,
    gauge_value: float | None = None,
) -> CoincidenceProblem:
    """Draw a conforming problem: a geometric ladder seen through a random
    relabeling f, with optional decoy members and either complete or
    metric-ball edges.

    The construction keeps D(f(w), F(w)) <= (r/(1-r)) d(f(v), f(w)) with a
    fixed margin, so every draw passes the hypothesis verifier; tests
    still run the verifier as the gate rather than trusting this.
    """
    L = rng.randint(3, max(3, max_points - 1))
    if gauge_value is not None:
        if not (0.1 < gauge_value < 1.0):
            raise InputError("gauge_value must lie in (0.1, 1)")
        k0 = gauge_value
    else:
        k0 = rng.uniform(0.25, 0.85)
    r_hi = (k0 - 0.02) / (1.0 + (k0 - 0.02))
    r = rng.uniform(min(0.1, r_hi / 2), r_hi)
    scale = 10.0 ** rng.uniform(-1.0, 1.0)

    rungs = [f"p{i}" for i in range(L)]
    labels = rungs + ["zero"]
    values = [scale * r**i for i in range(L)] + [0.0]
    space = FiniteMetricSpace.from_coords(labels, values)

    succ = {rungs[i]: rungs[i + 1] for i in range(L - 1)}
    succ[rungs[L - 1]] = "zero"
    succ["zero"] = "zero"

    shuffled = labels[:]
    rng.shuffle(shuffled)
    f = dict(zip(labels, shuffled))  # random bijection

    F = {}
    for w in labels:
        members = [succ[f[w]]]
        if rng.random() < 0.4 and "zero" not in members:
            members.append("zero")
        F[w] = ClosedSet.finite(members)

    gap0 = values[0] - values[1]
    if rng.random() < 0.5:
        edges = EdgeStructure.from_pairs(
            space, [(u, v) for u in labels for v in labels]
        )
    else:
        radius = rng.uniform(1.05 * gap0, 2.0 * values[0] + gap0)
        edges = EdgeStructure.ball(space, radius)

    inv_f = {v: k for k, v in f.items()}
    w0 = inv_f[rungs[0]]
    p0 = succ[rungs[0]]
    return CoincidenceProblem(
        space=space,
        f=f,
        F=F,
        edges=edges,
        gauge=Gauge.constant(k0),
        w0=w0,
        p0=p0,
        config=IterationConfig(tol=1e-12, residual_tol=1e-11, max_iter=10_000),
    )


# ---------------------------------------------------------------------------
# Problem files
# ---------------------------------------------------------------------------

def problem_to_dict(problem: CoincidenceProblem) -> dict:
    space = problem.space
    out = {
        "points": [{"label": s} for s in space.labels],
        "distances": [list(map(float, row)) for row in space.matrix],
        "edges": (
            {"mode": "ball", "radius": problem.edges.radius}
            if problem.edges.mode == "ball"
            else {"mode": "list", "pairs": sorted(map(list, problem.edges.pairs))}
        ),
        "gauge": (
            {
                "form": "constant",
                "value": problem.gauge.values[0],
                "sup": problem.gauge.certified_sup,
            }
            if problem.gauge.form == "constant"
            else {
                "form": "piecewise",
                "breakpoints": list(problem.gauge.breakpoints),
                "values": list(problem.gauge.values),
                "sup": problem.gauge.certified_sup,
            }
        ),
        "f": dict(problem.f),
        "F": {w: list(problem.F[w].members) for w in space.labels},
        "w0": problem.w0,
        "p0": problem.p0,
        "config": {
            "tol": problem.config.tol,
            "residual_tol": problem.config.residual_tol,
            "max_iter": problem.config.max_iter,
        },
    }
    if problem.truncated:
        out["truncated"] = sorted(problem.truncated)
    return out


def problem_from_dict(data: Mapping) -> CoincidenceProblem:
    space = space_from_dict(data)
    for key in ("edges", "gauge", "f", "F", "w0", "p0"):
        if key not in data:
            raise InputError(f"problem file needs a {key!r} section")
    edges = edges_from_dict(data["edges"], space)
    gauge = gauge_from_dict(data["gauge"])
    fmap = {str(k): str(v) for k, v in data["f"].items()}
    images = {
        str(k): ClosedSet.finite([str(m) for m in v]) for k, v in data["F"].items()
    }
    cfg = data.get("config", {})
    config = IterationConfig(
        tol=float(cfg.get("tol", 1e-9)),
        residual_tol=float(cfg.get("residual_tol", 1e-8)),
        max_iter=int(cfg.get("max_iter", 10_000)),
    )
    return CoincidenceProblem(
        space=space,
        f=fmap,
        F=images,
        edges=edges,
        gauge=gauge,
        w0=str(data["w0"]),
        p0=str(data["p0"]),
        config=config,
        truncated=frozenset(str(s) for s in data.get("truncated", ())),
    )


def load_problem(path) -> CoincidenceProblem:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    return problem_from_dict(data)


def save_problem(problem: CoincidenceProblem, path) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
