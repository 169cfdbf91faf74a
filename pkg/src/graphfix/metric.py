"""Finite metric spaces, reflexive edge structures, gauges, and closed sets.

These are the primitives every solver in the package shares: a labeled
point set with a validated distance matrix, a directed reflexive graph
over it (explicit pairs or a metric ball), a gauge function
k : [0, inf) -> [0, 1) with a certified supremum strictly below 1, and
non-void closed sets (finite label sets, or opaque singletons for
function-space applications).

All types are immutable after construction and every operation is a pure
function, so instances can be shared freely across threads.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputError

# Triangle-inequality slack accepted when validating a distance matrix.
TRIANGLE_TOL = 1e-9

_NORM_ORDS = {"euclidean": 2, "manhattan": 1, "chebyshev": np.inf}


def norm_value(vec, norm: str = "euclidean") -> float:
    """Length of a coordinate vector under the named norm."""
    if norm not in _NORM_ORDS:
        raise InputError(f"unknown norm {norm!r}; expected one of {sorted(_NORM_ORDS)}")
    return float(np.linalg.norm(np.asarray(vec, dtype=float), ord=_NORM_ORDS[norm]))


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Labeled finite point set with a validated distance matrix.

    The matrix must be symmetric, nonnegative, zero on the diagonal and
    satisfy the triangle inequality within ``TRIANGLE_TOL``; violations
    raise :class:`InputError` at construction time.
    """

    labels: tuple[str, ...]
    matrix: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(set(labels)) != len(labels):
            raise InputError("point labels must be distinct")
        if not labels:
            raise InputError("a metric space needs at least one point")
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        n = len(labels)
        if m.shape != (n, n):
            raise InputError(f"distance matrix must be {n}x{n}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("distances must be finite")
        if np.any(m < 0):
            raise InputError("distances must be nonnegative")
        if np.any(np.diag(m) != 0.0):
            raise InputError("distance(i, i) must be 0")
        if not np.array_equal(m, m.T):
            raise InputError("distance matrix must be symmetric")
        for k in range(n):
            if np.any(m > m[:, [k]] + m[[k], :] + TRIANGLE_TOL):
                i, j = np.unravel_index(
                    np.argmax(m - (m[:, [k]] + m[[k], :])), m.shape
                )
                raise InputError(
                    f"triangle inequality fails: d({labels[i]},{labels[j]}) > "
                    f"d({labels[i]},{labels[k]}) + d({labels[k]},{labels[j]})"
                )
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(labels)})

    @classmethod
    def from_matrix(cls, labels: Sequence[str], matrix) -> "FiniteMetricSpace":
        return cls(tuple(labels), np.asarray(matrix, dtype=float))

    @classmethod
    def from_coords(
        cls, labels: Sequence[str], coords, norm: str = "euclidean"
    ) -> "FiniteMetricSpace":
        """Derive the distance matrix from per-label coordinates."""
        pts = np.asarray(coords, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if len(pts) != len(labels):
            raise InputError("one coordinate vector per label required")
        diffs = pts[:, None, :] - pts[None, :, :]
        ordv = _NORM_ORDS.get(norm)
        if ordv is None:
            raise InputError(f"unknown norm {norm!r}")
        m = np.linalg.norm(diffs, ord=ordv, axis=2)
        return cls(tuple(labels), m)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InputError(f"unknown point label {label!r}") from None

    def distance(self, u: str, v: str) -> float:
        return float(self.matrix[self.index(u), self.index(v)])


@dataclass(frozen=True)
class ClosedSet:
    """A non-void closed set: finitely many labels, or one opaque element.

    The finite kind models closed (bounded) subsets of a finite metric
    space; the singleton kind carries one element of a function space and
    is only a tag here (its geometry lives with the application modules).
    """

    members: tuple[str, ...] | None = None
    element: Any = None

    def __post_init__(self):
        if (self.members is None) == (self.element is None):
            raise InputError("a closed set is either finite or a singleton image")
        if self.members is not None:
            members = tuple(dict.fromkeys(str(s) for s in self.members))
            if not members:
                raise DomainError("a closed set must be non-empty")
            object.__setattr__(self, "members", members)

    @classmethod
    def finite(cls, members: Iterable[str]) -> "ClosedSet":
        return cls(members=tuple(members))

    @classmethod
    def singleton(cls, element: Any) -> "ClosedSet":
        return cls(element=element)

    @property
    def kind(self) -> str:
        return "finite" if self.members is not None else "singleton-image"

    def __contains__(self, label: str) -> bool:
        if self.members is None:
            raise InputError("membership test requires a finite closed set")
        return label in self.members


def _finite_members(Z) -> tuple[str, ...]:
    """Normalize a finite closed set given as ClosedSet or label iterable."""
    if isinstance(Z, ClosedSet):
        if Z.members is None:
            raise InputError("operation requires a finite closed set")
        return Z.members
    members = tuple(dict.fromkeys(str(s) for s in Z))
    if not members:
        raise DomainError("closed set must be non-empty")
    return members


def point_to_set_distance(u: str, Z, space: FiniteMetricSpace) -> float:
    """min over members z of Z of d(u, z); zero exactly when u belongs to Z."""
    members = _finite_members(Z)
    return min(space.distance(u, z) for z in members)


def hausdorff_distance(Y, Z, space: FiniteMetricSpace) -> float:
    """max of the two directed suprema of point-to-set distances."""
    ym = _finite_members(Y)
    zm = _finite_members(Z)
    fwd = max(point_to_set_distance(u, zm, space) for u in ym)
    bwd = max(point_to_set_distance(v, ym, space) for v in zm)
    return max(fwd, bwd)


@dataclass(frozen=True)
class EdgeStructure:
    """Directed reflexive graph over a finite metric space.

    Either a metric ball (edge iff d(u, v) < radius, strict) or an
    explicit pair list; the diagonal is always included, and the pair
    representation is a set, so there are no parallel edges.
    """

    space: FiniteMetricSpace
    radius: float | None = None
    pairs: frozenset | None = None

    def __post_init__(self):
        if (self.radius is None) == (self.pairs is None):
            raise InputError("edge structure is either a ball or a pair list")
        if self.radius is not None and self.radius < 0:
            raise InputError("ball radius must be nonnegative")

    @classmethod
    def ball(cls, space: FiniteMetricSpace, radius: float) -> "EdgeStructure":
        return cls(space=space, radius=float(radius))

    @classmethod
    def from_pairs(
        cls, space: FiniteMetricSpace, pairs: Iterable[Sequence[str]]
    ) -> "EdgeStructure":
        edge_set = set()
        for u, v in pairs:
            space.index(u)
            space.index(v)
            edge_set.add((str(u), str(v)))
        for s in space.labels:  # close under the diagonal
            edge_set.add((s, s))
        return cls(space=space, pairs=frozenset(edge_set))

    @classmethod
    def complete(cls, space: FiniteMetricSpace) -> "EdgeStructure":
        return cls.from_pairs(
            space, [(u, v) for u in space.labels for v in space.labels]
        )

    def contains(self, u: str, v: str) -> bool:
        self.space.index(u)
        self.space.index(v)
        if u == v:
            return True
        if self.radius is not None:
            return self.space.distance(u, v) < self.radius
        return (u, v) in self.pairs

    @property
    def mode(self) -> str:
        return "ball" if self.radius is not None else "list"


def is_edge(edges: EdgeStructure, u: str, v: str) -> bool:
    """True iff (u, v) is an edge; always true on the diagonal."""
    return edges.contains(u, v)


@dataclass(frozen=True)
class Gauge:
    """Piecewise-constant gauge k : [0, inf) -> [0, 1) with a certified sup.

    Intervals are left-closed/right-open: value ``values[i]`` applies on
    ``[breakpoints[i], breakpoints[i+1])`` and the last value extends to
    infinity. ``certified_sup`` is supplied by the user, must dominate
    every value and stay strictly below 1; it plays the role of the
    geometric rate in the convergence certificate.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    certified_sup: float

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "certified_sup", float(self.certified_sup))
        if not bp or len(bp) != len(vals):
            raise InputError("gauge needs matching breakpoints and values")
        if bp[0] != 0.0:
            raise InputError("first gauge breakpoint must be 0")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise InputError("gauge breakpoints must be strictly ascending")
        if any(not (0.0 <= v < 1.0) for v in vals):
            raise InputError("gauge values must lie in [0, 1)")
        if not (0.0 <= self.certified_sup < 1.0):
            raise InputError("certified_sup must lie in [0, 1)")
        if self.certified_sup < max(vals):
            raise InputError("certified_sup must dominate every gauge value")

    @classmethod
    def constant(cls, value: float, sup: float | None = None) -> "Gauge":
        return cls((0.0,), (float(value),), float(value if sup is None else sup))

    @classmethod
    def piecewise(
        cls, breakpoints: Sequence[float], values: Sequence[float], sup: float
    ) -> "Gauge":
        return cls(tuple(breakpoints), tuple(values), sup)

    def __call__(self, t: float) -> float:
        return self.eval(t)

    def eval(self, t: float) -> float:
        if t < 0:
            raise InputError("gauge argument must be nonnegative")
        idx = bisect.bisect_right(self.breakpoints, t) - 1
        return self.values[idx]

    @property
    def form(self) -> str:
        return "constant" if len(self.values) == 1 else "piecewise-constant"


def gauge_eval(k: Gauge, t: float) -> float:
    """Evaluate the gauge at t >= 0; the result is < 1 and <= certified_sup."""
    return k.eval(t)


# ---------------------------------------------------------------------------
# Problem-file ingestion (JSON)
# ---------------------------------------------------------------------------

def space_from_dict(data: Mapping) -> FiniteMetricSpace:
    """Build a space from the ``points`` (+ ``distances``/coords) file section."""
    try:
        points = data["points"]
    except KeyError:
        raise InputError("problem file needs a 'points' array") from None
    if not isinstance(points, list) or not points:
        raise InputError("'points' must be a non-empty array")
    labels = []
    coords = []
    for entry in points:
        if not isinstance(entry, Mapping) or "label" not in entry:
            raise InputError("every point needs a 'label'")
        labels.append(str(entry["label"]))
        coords.append(entry.get("coord"))
    have_coords = all(c is not None for c in coords)
    have_matrix = "distances" in data and data["distances"] is not None
    if have_matrix and have_coords:
        raise InputError("give either 'distances' or per-point 'coord', not both")
    if have_matrix:
        return FiniteMetricSpace.from_matrix(labels, data["distances"])
    if have_coords:
        return FiniteMetricSpace.from_coords(
            labels, coords, norm=data.get("norm", "euclidean")
        )
    raise InputError("points need 'coord' entries or a 'distances' matrix")


def edges_from_dict(data: Mapping, space: FiniteMetricSpace) -> EdgeStructure:
    if not isinstance(data, Mapping) or "mode" not in data:
        raise InputError("'edges' must be an object with a 'mode'")
    mode = data["mode"]
    if mode == "ball":
        if "radius" not in data:
            raise InputError("ball edges need a 'radius'")
        return EdgeStructure.ball(space, float(data["radius"]))
    if mode == "list":
        pairs = data.get("pairs")
        if not isinstance(pairs, list):
            raise InputError("list edges need a 'pairs' array")
        return EdgeStructure.from_pairs(space, pairs)
    raise InputError(f"unknown edge mode {mode!r}")


def gauge_from_dict(data: Mapping) -> Gauge:
    if not isinstance(data, Mapping) or "form" not in data:
        raise InputError("'gauge' must be an object with a 'form'")
    form = data["form"]
    if form == "constant":
        if "value" not in data:
            raise InputError("constant gauge needs a 'value'")
        return Gauge.constant(float(data["value"]), data.get("sup"))
    if form == "piecewise":
        try:
            return Gauge.piecewise(
                [float(b) for b in data["breakpoints"]],
                [float(v) for v in data["values"]],
                float(data["sup"]),
            )
        except KeyError as exc:
            raise InputError(f"piecewise gauge needs {exc}") from None
    raise InputError(f"unknown gauge form {form!r}")


def load_space_file(path) -> tuple[FiniteMetricSpace, EdgeStructure, Gauge]:
    """Load and validate the space/edges/gauge sections of a problem file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    space = space_from_dict(data)
    if "edges" not in data:
        raise InputError("problem file needs an 'edges' section")
    if "gauge" not in data:
        raise InputError("problem file needs a 'gauge' section")
    edges = edges_from_dict(data["edges"], space)
    gauge = gauge_from_dict(data["gauge"])
    return space, edges, gauge
