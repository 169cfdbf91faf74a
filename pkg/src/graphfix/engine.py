"""Graph-checked successor iteration with a geometric stopping certificate.

Two drivers share the machinery here.  ``run_coincidence_iteration``
walks a finite problem: from the pair (w_n, f(w_n)) it picks the nearest
member of F(w_n), pulls it back through f, and re-checks the contraction
and edge hypotheses at every step, so a conforming run terminates at a
coincidence point and a non-conforming problem is flagged with the exact
failing condition.  ``run_operator_iteration`` is the single-valued
specialization for operator iterates w <- T(w) on vectors under the sup
norm, with the displacement inequality

    ||Tw - T^2 w|| <= k(||w - Tw||) ||w - Tw||

checked each step.

The certificate: once the gauge is globally bounded by alpha < 1, step
distances shrink at least by sqrt(alpha) per step, so the distance from
f(w_n) to the limit is at most  B alpha^(n/2) / (1 - sqrt(alpha)) * d1
with B = alpha^(-1/2) (first step distance d1).  ``tail_bound`` evaluates
that closed form; the engine stops on whichever of the a-posteriori test
and the certificate fires first, both gated on the residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DomainError, HypothesisViolation, InputError
from .metric import (
    ClosedSet,
    EdgeStructure,
    FiniteMetricSpace,
    Gauge,
    gauge_eval,
    point_to_set_distance,
)

# Relative/absolute slack when re-checking contraction inequalities on floats.
_REL_SLACK = 1e-10
_ABS_SLACK = 1e-14


@dataclass(frozen=True)
class IterationConfig:
    """Stopping control: step tolerance, residual tolerance, step budget.

    ``max_iter`` counts successor selections; 0 is allowed so a budget
    probe can demonstrate exhaustion without running.
    """

    tol: float = 1e-9
    residual_tol: float = 1e-8
    max_iter: int = 10_000

    def __post_init__(self):
        if self.tol <= 0 or self.residual_tol <= 0:
            raise InputError("tolerances must be positive")
        if self.max_iter < 0:
            raise InputError("max_iter must be nonnegative")


@dataclass(frozen=True)
class ConvergenceCertificate:
    """Geometric tail certificate (rate alpha, prefactor B, onset index).

    With a globally certified gauge the onset is M_index = 1 and
    B = alpha^(-1/2); alpha = 0 degenerates to a one-step bound, handled
    by the 0^0 = 1 convention in :func:`tail_bound`.
    """

    alpha: float
    B: float
    M_index: int = 1

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise DomainError("certificate rate alpha must lie in [0, 1)")
        if self.B <= 0:
            raise DomainError("certificate prefactor B must be positive")

    @classmethod
    def from_gauge(cls, gauge: Gauge) -> "ConvergenceCertificate":
        alpha = gauge.certified_sup
        B = 1.0 if alpha == 0.0 else alpha ** -0.5
        return cls(alpha=alpha, B=B, M_index=1)


def tail_bound(cert: ConvergenceCertificate, d0: float, n: int) -> float:
    """Upper bound on d(f(w_n), f(w_{n+m})) for every m, hence to the limit.

    Evaluates B * alpha^(n/2) / (1 - sqrt(alpha)) * d0 where d0 is the
    first step distance.
    """
    if cert.alpha >= 1.0:
        raise DomainError("tail bound needs alpha < 1")
    if d0 < 0:
        raise InputError("d0 must be nonnegative")
    if n < 0:
        raise InputError("n must be nonnegative")
    return cert.B * cert.alpha ** (n / 2) / (1.0 - math.sqrt(cert.alpha)) * d0


@dataclass
class TraceRow:
    """One recorded step; labels are None for operator (vector) runs."""

    n: int
    w_label: str | None
    fw_label: str | None
    d: float
    residual: float
    bound: float
    edge_ok: bool


@dataclass
class IterationTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def step_distances(self) -> list[float]:
        return [r.d for r in self.rows if not math.isnan(r.d)]

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class Converged:
    w_star: object
    f_w_star: object


@dataclass
class HypothesisViolated:
    condition: str
    step: int


@dataclass
class MaxIterExceeded:
    last_point: object | None = None


@dataclass
class IterationOutcome:
    status: object
    trace: IterationTrace
    certificate: ConvergenceCertificate
    common_fixed_point: object | None = None

    @property
    def converged(self) -> bool:
        return isinstance(self.status, Converged)

    @property
    def iterations(self) -> int:
        """Successor selections performed (the start pair is step 1)."""
        if not self.trace.rows:
            return 0
        return max(self.trace.rows[-1].n - 1, 0)

    @property
    def final_residual(self) -> float:
        return self.trace.rows[-1].residual if self.trace.rows else float("nan")

    def to_dict(self) -> dict:
        if isinstance(self.status, Converged):
            status = "converged"
        elif isinstance(self.status, HypothesisViolated):
            status = "hypothesis-violated"
        else:
            status = "max-iter-exceeded"
        out = {
            "status": status,
            "w_star": getattr(self.status, "w_star", None),
            "fw_star": getattr(self.status, "f_w_star", None),
            "common_fixed_point": self.common_fixed_point,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
        }
        if isinstance(self.status, HypothesisViolated):
            out["condition"] = self.status.condition
            out["step"] = self.status.step
        return out


@dataclass(frozen=True)
class CoincidenceProblem:
    """A finite coincidence instance: (f, F, graph, gauge, start, config).

    ``f`` maps every label to a label; ``F`` maps every label to a finite
    closed set whose members must all lie in the range of f.  ``p0`` must
    belong to F(w0) with (f(w0), p0) an edge.  ``truncated`` marks points
    whose successor data was clamped when an infinite space was cut to a
    finite one; verifiers skip pairs owned by those points.
    """

    space: FiniteMetricSpace
    f: Mapping[str, str]
    F: Mapping[str, ClosedSet]
    edges: EdgeStructure
    gauge: Gauge
    w0: str
    p0: str
    config: IterationConfig = IterationConfig()
    truncated: frozenset = frozenset()

    def __post_init__(self):
        space = self.space
        fmap = {}
        for w in space.labels:
            if w not in self.f:
                raise InputError(f"f is not defined at {w!r}")
            space.index(self.f[w])
            fmap[w] = self.f[w]
        object.__setattr__(self, "f", fmap)
        images = {}
        f_range = set(fmap.values())
        for w in space.labels:
            if w not in self.F:
                raise InputError(f"F is not defined at {w!r}")
            Z = self.F[w]
            members = Z.members if isinstance(Z, ClosedSet) else tuple(Z)
            cs = ClosedSet.finite(members)
            for y in cs.members:
                space.index(y)
                if y not in f_range:
                    raise InputError(
                        f"range condition fails: {y!r} in F({w!r}) is not an f-image"
                    )
            images[w] = cs
        object.__setattr__(self, "F", images)
        object.__setattr__(self, "truncated", frozenset(self.truncated))
        space.index(self.w0)
        space.index(self.p0)
        if self.p0 not in images[self.w0]:
            raise InputError("p0 must belong to F(w0)")
        if not self.edges.contains(fmap[self.w0], self.p0):
            raise InputError("(f(w0), p0) must be an edge")

    def members(self, w: str) -> tuple[str, ...]:
        return self.F[w].members

    def preimage(self, y: str) -> str | None:
        """Lowest-index preimage of y under f, or None."""
        for w in self.space.labels:
            if self.f[w] == y:
                return w
        return None


def select_successor(
    prev_step: float,
    fw_n: str,
    Fw_n,
    gauge: Gauge,
    space: FiniteMetricSpace,
) -> str:
    """Pick the next image point out of F(w_n).

    On a finite set the nearest member (ties to the lowest label index)
    automatically satisfies the selection inequality
    d(fw_n, y) <= D(fw_n, F(w_n)) / sqrt(k(prev_step)), so the nearest
    member is always returned.  A zero gauge value with positive residual
    is impossible under the contraction hypothesis and raises
    :class:`HypothesisViolation`.
    """
    members = Fw_n.members if isinstance(Fw_n, ClosedSet) else tuple(Fw_n)
    if not members:
        raise DomainError("cannot select from an empty set")
    if prev_step < 0:
        raise InputError("prev_step must be nonnegative")
    best = min(members, key=lambda y: (space.distance(fw_n, y), space.index(y)))
    D = space.distance(fw_n, best)
    if D > 0 and (prev_step == 0 or gauge_eval(gauge, prev_step) == 0.0):
        raise HypothesisViolation(
            "i",
            detail="zero gauge with positive residual forces D = 0",
        )
    return best


def run_coincidence_iteration(problem: CoincidenceProblem) -> IterationOutcome:
    """Iterate the graph-checked successor selection until certified stop.

    Per step the engine checks that (a) the selected point lies in
    F(w_n), (b) consecutive image points are joined by an edge, (c) the
    step distances satisfy d_{n+1} <= sqrt(k(d_n)) d_n.  It stops when
    the step distance falls below ``tol`` and the residual
    D(f(w_n), F(w_n)) below ``residual_tol``, or when the tail bound
    certifies the distance to the limit is below ``tol`` (again residual
    gated, so a Converged outcome always has a small residual).  At the
    limit it also reports the common fixed point a = f(w*) whenever
    f(a) = a and f(a) in F(a).
    """
    space = problem.space
    f = problem.f
    gauge = problem.gauge
    cfg = problem.config
    cert = ConvergenceCertificate.from_gauge(gauge)
    trace = IterationTrace()

    def outcome(status, common=None):
        return IterationOutcome(status, trace, cert, common)

    w0 = problem.w0
    fw0 = f[w0]
    start_edge = problem.edges.contains(fw0, problem.p0)
    trace.append(
        TraceRow(
            0,
            w0,
            fw0,
            float("nan"),
            point_to_set_distance(fw0, problem.members(w0), space),
            float("nan"),
            start_edge,
        )
    )
    if not start_edge:
        return outcome(HypothesisViolated("edge", 0))

    w = problem.preimage(problem.p0)
    if w is None:
        return outcome(HypothesisViolated("range", 0))
    prev_fw = fw0
    fw = f[w]
    d1 = space.distance(fw0, problem.p0)
    d_n = d1
    d_prev = None
    n = 1

    while True:
        residual = point_to_set_distance(fw, problem.members(w), space)
        bound = tail_bound(cert, d1, n)
        edge_ok = problem.edges.contains(prev_fw, fw)
        trace.append(TraceRow(n, w, fw, d_n, residual, bound, edge_ok))
        if not edge_ok:
            return outcome(HypothesisViolated("edge", n))
        if d_prev is not None:
            limit = math.sqrt(gauge_eval(gauge, d_prev)) * d_prev
            if d_n > limit * (1 + _REL_SLACK) + _ABS_SLACK:
                return outcome(HypothesisViolated("i", n))
        if residual <= cfg.residual_tol and (d_n <= cfg.tol or bound <= cfg.tol):
            w_star, fw_star = w, fw
            common = None
            a = fw_star
            if f[a] == a and a in problem.members(a):
                common = a
            return outcome(Converged(w_star, fw_star), common)
        if n > cfg.max_iter:
            return outcome(MaxIterExceeded(w))
        try:
            y = select_successor(d_n, fw, problem.F[w], gauge, space)
        except HypothesisViolation as exc:
            return outcome(HypothesisViolated(exc.condition, n))
        if y not in problem.members(w):
            return outcome(HypothesisViolated("ii", n))
        w_next = problem.preimage(y)
        if w_next is None:
            return outcome(HypothesisViolated("range", n))
        d_next = space.distance(fw, y)
        prev_fw, w, fw = fw, w_next, f[w_next]
        d_prev, d_n = d_n, d_next
        n += 1


def run_operator_iteration(
    T: Callable[[np.ndarray], np.ndarray],
    w0,
    in_W0: Callable[[np.ndarray], bool],
    gauge: Gauge,
    config: IterationConfig,
) -> IterationOutcome:
    """Iterate w <- T(w) on vectors under the sup norm until displacement
    and residual drop below the configured tolerances.

    ``in_W0`` receives successive displacements w_n - w_{n+1} (and the
    total displacement w0 - limit at the end); it encodes the graph of
    the iterates theorem, e.g. "vanishes at both endpoints" for operators
    that interpolate the endpoint values.  Each step also re-checks the
    displacement contraction against the gauge; a macroscopic violation
    aborts with the failing condition.
    """
    cert = ConvergenceCertificate.from_gauge(gauge)
    trace = IterationTrace()

    def sup(vec) -> float:
        return float(np.max(np.abs(vec))) if np.size(vec) else 0.0

    w_cur = np.asarray(w0, dtype=float).copy()
    w_next = np.asarray(T(w_cur), dtype=float)
    if not in_W0(w_cur - w_next):
        trace.append(TraceRow(0, None, None, float("nan"), sup(w_cur - w_next),
                              float("nan"), False))
        return IterationOutcome(HypothesisViolated("edge", 0), trace, cert)

    ds = [sup(w_cur - w_next)]
    d1 = ds[0]
    n = 1
    status = None
    while True:
        w_after = np.asarray(T(w_next), dtype=float)
        resid = sup(w_next - w_after)
        trace.append(
            TraceRow(n, None, None, ds[-1], resid, tail_bound(cert, d1, n), True)
        )
        if ds[-1] <= config.tol and resid <= config.residual_tol:
            status = Converged(w_next, w_next)
            break
        if not in_W0(w_next - w_after):
            status = HypothesisViolated("edge", n)
            break
        d_prev, d_cur = ds[-1], resid
        limit = gauge_eval(gauge, d_prev) * d_prev
        if d_cur > limit * (1 + _REL_SLACK) + _ABS_SLACK:
            status = HypothesisViolated("i", n)
            break
        if n >= config.max_iter:
            status = MaxIterExceeded(w_next)
            break
        ds.append(d_cur)
        w_cur, w_next = w_next, w_after
        n += 1

    outcome = IterationOutcome(status, trace, cert)
    if isinstance(status, Converged):
        if not in_W0(np.asarray(w0, dtype=float) - status.w_star):
            outcome.status = HypothesisViolated("edge", n)
    return outcome
