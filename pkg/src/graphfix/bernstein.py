"""Nonlinear q-analogue Bernstein (Lupas-type) operator and its iterates.

The operator acts on a function phi through its samples at the nodes
t_i = [i]_q / [n]_q only:

    (L phi)(a) = sum_i |phi(t_i)| b_{n,i}(q, a),

with the rational basis

    b_{n,i}(q, a) = qbinom(n, i) q^(i(i-1)/2) a^i (1-a)^(n-i)
                    / prod_{j=0}^{n-1} (1 - a + q^j a).

The basis is a partition of unity and interpolates at the endpoints, so
constants with nonnegative endpoint values are fixed; the modulus makes
the operator nonlinear off the nonnegative cone.  Iterating contracts
interior displacement mass at rate at most 1 - b_{n,q} where

    b_{n,q} = (q^(n/2) / (1 + q^(n/2)))^(n-1) / max(1, q^((n-1)^2)),

and for phi with phi(0), phi(1) >= 0 the iterates converge to the line
phi(0)(1-a) + phi(1)a.

Basis evaluation runs in log space (all factors are positive), which
keeps degrees up to the hundreds finite for q far from 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .engine import (
    ConvergenceCertificate,
    IterationConfig,
    IterationOutcome,
    run_operator_iteration,
)
from .errors import InputError
from .metric import Gauge

# Switch q-binomial products to log space beyond this magnitude.
_OVERFLOW_GUARD = 1e250


@dataclass(frozen=True)
class QParams:
    """Operator degree n >= 1 and deformation parameter q > 0."""

    n: int
    q: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InputError("degree n must be a positive integer")
        if not (self.q > 0):
            raise InputError("q must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "q", float(self.q))


def q_integer(i: int, q: float) -> float:
    """[i]_q = 1 + q + ... + q^(i-1), with [0]_q = 0."""
    if i < 0:
        raise InputError("q-integer index must be nonnegative")
    if q <= 0:
        raise InputError("q must be positive")
    if i == 0:
        return 0.0
    if q == 1.0:
        return float(i)
    return (q**i - 1.0) / (q - 1.0)


def _log_q_integer(i: int, q: float) -> float:
    """log [i]_q for i >= 1, stable for q on either side of 1."""
    if q == 1.0:
        return math.log(i)
    lq = math.log(q)
    if q > 1.0:
        return i * lq + math.log1p(-math.exp(-i * lq)) - math.log(q - 1.0)
    return math.log(-math.expm1(i * lq)) - math.log1p(-q)


def q_binomial(n: int, i: int, q: float) -> float:
    """Gaussian binomial [n choose i]_q = [n]_q! / ([n-i]_q! [i]_q!)."""
    if not (0 <= i <= n):
        raise InputError("q-binomial needs 0 <= i <= n")
    if q <= 0:
        raise InputError("q must be positive")
    i = min(i, n - i)
    out = 1.0
    for k in range(1, i + 1):
        out *= q_integer(n - i + k, q) / q_integer(k, q)
        if out > _OVERFLOW_GUARD:
            return math.exp(_log_q_binomial(n, i, q))
    return out


def _log_q_binomial(n: int, i: int, q: float) -> float:
    i = min(i, n - i)
    return sum(
        _log_q_integer(n - i + k, q) - _log_q_integer(k, q) for k in range(1, i + 1)
    )


def nodes(params: QParams) -> np.ndarray:
    """Operator nodes t_i = [i]_q/[n]_q; t_0 = 0 and t_n = 1 exactly."""
    denom = q_integer(params.n, params.q)
    return np.array(
        [q_integer(i, params.q) / denom for i in range(params.n + 1)], dtype=float
    )


def _log_pochhammer_denominator(params: QParams, a: float) -> float:
    """log prod_{j=0}^{n-1} (1 - a + q^j a), each factor positive."""
    n, q = params.n, params.q
    lq = math.log(q)
    total = 0.0
    for j in range(n):
        t = j * lq + math.log(a) if a > 0 else -math.inf
        if t > 50.0:  # q^j a dominates: factor = q^j a (1 + (1-a)/(q^j a))
            total += t + math.log1p((1.0 - a) * math.exp(-t))
        else:
            total += math.log((1.0 - a) + (math.exp(t) if a > 0 else 0.0))
    return total


def basis(params: QParams, i: int, a: float) -> float:
    """Basis value b_{n,i}(q, a) for a in [0, 1]."""
    return float(basis_vector(params, a)[i])


def basis_vector(params: QParams, a: float) -> np.ndarray:
    """All n+1 basis values at a; they sum to 1 (Gauss identity)."""
    n, q = params.n, params.q
    if not (0.0 <= a <= 1.0):
        raise InputError("basis argument a must lie in [0, 1]")
    out = np.zeros(n + 1)
    if a == 0.0:
        out[0] = 1.0
        return out
    if a == 1.0:
        out[n] = 1.0
        return out
    lq = math.log(q)
    la, l1a = math.log(a), math.log1p(-a)
    logden = _log_pochhammer_denominator(params, a)
    for i in range(n + 1):
        lognum = (
            _log_q_binomial(n, i, q)
            + (i * (i - 1) / 2) * lq
            + i * la
            + (n - i) * l1a
        )
        out[i] = math.exp(lognum - logden)
    return out


def apply_operator(params: QParams, node_values, a: float) -> float:
    """(L phi)(a) = sum_i |values_i| b_{n,i}(q, a); the modulus is what
    makes the operator nonlinear."""
    vals = np.asarray(
        node_values.values if isinstance(node_values, NodeVector) else node_values,
        dtype=float,
    )
    if vals.shape != (params.n + 1,):
        raise InputError(f"expected {params.n + 1} node values")
    return float(basis_vector(params, a) @ np.abs(vals))


def operator_matrix(params: QParams) -> np.ndarray:
    """Matrix B with B[i, j] = b_{n,j}(q, t_i): one iterate is B @ |u|."""
    ts = nodes(params)
    return np.vstack([basis_vector(params, t) for t in ts])


def contraction_constant(params: QParams) -> float:
    """Lower bound b_{n,q} on b_{n,0} + b_{n,n} over [0, 1]; the iterates
    gauge is k = 1 - b_{n,q}.  Degree 1 gives exactly 1 (one-step
    convergence); q = 1 gives exactly (1/2)^(n-1).  For extreme (n, q)
    the true value drops below the smallest positive double and the
    result underflows to 0."""
    n, q = params.n, params.q
    if n == 1:
        return 1.0
    if q == 1.0:
        return 0.5 ** (n - 1)
    lq = math.log(q)
    s = (n / 2) * lq
    log_ratio = s - np.logaddexp(0.0, s)  # log( q^(n/2) / (1 + q^(n/2)) )
    log_b = (n - 1) * log_ratio - max(0.0, (n - 1) ** 2 * lq)
    return math.exp(log_b)


@dataclass(frozen=True)
class NodeVector:
    """n+1 real samples attached to the operator nodes."""

    params: QParams
    values: np.ndarray
    nodes: np.ndarray = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.params.n + 1,):
            raise InputError(f"expected {self.params.n + 1} node values")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "nodes", nodes(self.params))

    @classmethod
    def sample(cls, params: QParams, phi: Callable[[float], float]) -> "NodeVector":
        ts = nodes(params)
        return cls(params, np.array([float(phi(t)) for t in ts]))


@dataclass
class IterateResult:
    """Converged node vector plus an evaluator for the limit function."""

    params: QParams
    node_vector: NodeVector
    b_nq: float
    outcome: IterationOutcome
    endpoint_nonneg: bool

    @property
    def converged(self) -> bool:
        return self.outcome.converged

    @property
    def iterations(self) -> int:
        return self.outcome.iterations

    @property
    def final_displacement(self) -> float:
        rows = self.outcome.trace.rows
        return rows[-1].d if rows else float("nan")

    def evaluate(self, a: float) -> float:
        return apply_operator(self.params, self.node_vector.values, a)

    def evaluate_grid(self, grid) -> np.ndarray:
        return np.array([self.evaluate(a) for a in np.asarray(grid, dtype=float)])

    def interpolant(self, a):
        """The predicted limit line through the endpoint moduli."""
        v0 = abs(float(self.node_vector.values[0]))
        v1 = abs(float(self.node_vector.values[-1]))
        a = np.asarray(a, dtype=float)
        return v0 * (1.0 - a) + v1 * a


def iterate_to_limit(
    params: QParams,
    phi: Callable[[float], float],
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> IterateResult:
    """Iterate the node vector u <- B|u| until the sup-change drops to tol.

    For phi with nonnegative endpoint values the limit agrees with
    phi(0)(1-a) + phi(1)a; otherwise only the empirical limit is
    returned (the displacement-in-subspace check is dropped because the
    first application folds the values into the nonnegative cone, after
    which the endpoint values are no longer those of phi).
    """
    start = NodeVector.sample(params, phi)
    B = operator_matrix(params)
    b_nq = contraction_constant(params)
    gauge = Gauge.constant(1.0 - b_nq)
    endpoint_nonneg = start.values[0] >= 0.0 and start.values[-1] >= 0.0

    if endpoint_nonneg:
        def in_w0(delta) -> bool:
            return abs(delta[0]) <= 1e-12 and abs(delta[-1]) <= 1e-12
    else:
        def in_w0(delta) -> bool:
            return True

    outcome = run_operator_iteration(
        lambda u: B @ np.abs(u),
        start.values,
        in_w0,
        gauge,
        IterationConfig(tol=tol, residual_tol=tol, max_iter=max_iter),
    )
    if outcome.converged:
        final = NodeVector(params, outcome.status.w_star)
    elif getattr(outcome.status, "last_point", None) is not None:
        final = NodeVector(params, outcome.status.last_point)
    else:
        final = start
    return IterateResult(params, final, b_nq, outcome, endpoint_nonneg)
