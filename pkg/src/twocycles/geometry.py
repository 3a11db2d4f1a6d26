"""Planar frameworks of the four-agent 2-cycles formation.

Edge convention (agent indices are 1-based in names, 0-based in arrays)::

    z1 = x2 - x1    z2 = x3 - x2    z3 = x1 - x3
    z4 = x3 - x4    z5 = x4 - x1

so that ``z1 + z2 + z3 = 0`` and ``z3 + z4 + z5 = 0``.  Targets are stored as
squared lengths ``s_i`` and the edge errors are ``e_i = z_i . z_i - s_i``.

The gauge chart puts agent 1 at the origin and agent 3 on the negative
vertical axis, ``x3 = (0, -ell3)``; a framework modulo rotations and
translations is then described by ``x2``, ``x4`` and ``ell3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

#: Relative slack below which a triangle inequality counts as tangential.
TANGENCY_TOL = 1e-10
#: Default relative tolerance for ``z1 x z5 = 0``.
PARALLEL_TOL = 1e-9

#: Edge adjacency of the 2-cycles: ``z' = A_e (u_i z_i)`` row by row.
EDGE_ADJACENCY = np.array([
    [-1, 1, 0, 0, -1],
    [0, -1, 1, 0, 0],
    [1, 0, -1, 0, 1],
    [0, 0, 1, -1, 0],
    [-1, 0, 0, 1, -1],
])
EDGE_ADJACENCY.setflags(write=False)


class GeometryError(ValueError):
    """Raised for targets or frameworks outside an operation's domain."""


class NotInL(GeometryError):
    """The squared targets do not satisfy both triangle inequalities."""


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class Framework:
    """Positions of agents 1..4 as a ``(4, 2)`` array."""

    pos: np.ndarray

    def __post_init__(self):
        pos = np.array(self.pos, dtype=float).reshape(4, 2)
        if not np.all(np.isfinite(pos)):
            raise GeometryError("framework positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "pos", pos)

    @classmethod
    def from_flat(cls, x) -> "Framework":
        return cls(np.asarray(x, dtype=float).reshape(4, 2))

    @property
    def flat(self) -> np.ndarray:
        return self.pos.reshape(8).copy()

    def transformed(self, angle: float = 0.0, offset=(0.0, 0.0)) -> "Framework":
        """Rotate about the origin by ``angle`` and then translate."""
        return Framework(self.pos @ rotation(angle).T + np.asarray(offset, float))

    def __repr__(self):
        return f"Framework({self.pos.tolist()})"


@dataclass(frozen=True, eq=False)
class TargetsSquared:
    """Squared target lengths ``(s1, ..., s5)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(5)
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise GeometryError(f"squared targets must be finite and >= 0, got {v}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_lengths(cls, lengths) -> "TargetsSquared":
        ell = np.asarray(lengths, dtype=float)
        if np.any(ell < 0):
            raise GeometryError("lengths must be >= 0")
        return cls(ell**2)

    @property
    def lengths(self) -> np.ndarray:
        return np.sqrt(self.values)

    def shifted(self, mu: float, edge: int = 3) -> "TargetsSquared":
        """Targets with ``mu`` added to the squared target of ``edge`` (1-based)."""
        v = self.values.copy()
        v[edge - 1] += mu
        return TargetsSquared(v)

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        out = np.asarray(self.values, dtype=dtype)
        return out.copy() if copy else out

    def __repr__(self):
        return f"TargetsSquared({self.values.tolist()})"


def as_targets(s) -> TargetsSquared:
    return s if isinstance(s, TargetsSquared) else TargetsSquared(s)


def edges(f) -> np.ndarray:
    """Edge vectors ``z1..z5`` as a ``(..., 5, 2)`` array.

    Accepts a :class:`Framework`, a ``(..., 4, 2)`` array or a flat
    ``(..., 8)`` array; leading axes broadcast.
    """
    x = f.pos if isinstance(f, Framework) else np.asarray(f, dtype=float)
    if x.shape[-1] == 8:
        x = x.reshape(x.shape[:-1] + (4, 2))
    x1, x2, x3, x4 = x[..., 0, :], x[..., 1, :], x[..., 2, :], x[..., 3, :]
    return np.stack([x2 - x1, x3 - x2, x1 - x3, x3 - x4, x4 - x1], axis=-2)


def errors_of(z, s) -> np.ndarray:
    """Edge errors ``e_i = z_i . z_i - s_i``."""
    z = np.asarray(z, dtype=float)
    return np.einsum("...ij,...ij->...i", z, z) - np.asarray(s, dtype=float)


@dataclass(frozen=True)
class GaugeChart:
    """Framework modulo SE(2): ``x1 = (0, 0)``, ``x3 = (0, -ell3)``."""

    x21: float
    x22: float
    x41: float
    x42: float
    ell3: float

    def __post_init__(self):
        vals = (self.x21, self.x22, self.x41, self.x42, self.ell3)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError("chart coordinates must be finite")
        if self.ell3 <= 0:
            raise GeometryError(f"ell3 must be positive, got {self.ell3}")
        for name, v in zip(("x21", "x22", "x41", "x42", "ell3"), vals):
            object.__setattr__(self, name, float(v))

    @property
    def x2(self) -> np.ndarray:
        return np.array([self.x21, self.x22])

    @property
    def x3(self) -> np.ndarray:
        return np.array([0.0, -self.ell3])

    @property
    def x4(self) -> np.ndarray:
        return np.array([self.x41, self.x42])

    def positions(self) -> np.ndarray:
        return np.array([[0.0, 0.0], self.x2, self.x3, self.x4])

    def framework(self, angle: float = 0.0, offset=(0.0, 0.0)) -> Framework:
        """Map back to agent coordinates (rotation ``angle``, then ``offset``)."""
        return Framework(self.positions()).transformed(angle, offset)

    def edges(self) -> np.ndarray:
        return edges(self.positions())

    def targets(self) -> TargetsSquared:
        """Squared edge lengths realised by this chart."""
        z = self.edges()
        return TargetsSquared(np.einsum("ij,ij->i", z, z))

    def as_array(self) -> np.ndarray:
        return np.array([self.x21, self.x22, self.x41, self.x42, self.ell3])

    def distance(self, other: "GaugeChart") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))


def gauge_fix(f: Framework) -> tuple[GaugeChart, float, np.ndarray]:
    """Return ``(chart, angle, offset)`` with ``f == chart.framework(angle, offset)``."""
    pos = f.pos if isinstance(f, Framework) else np.asarray(f, float).reshape(4, 2)
    offset = pos[0].copy()
    rel = pos - offset
    ell3 = float(np.hypot(*rel[2]))
    if ell3 <= 1e-14 * max(1.0, float(np.abs(rel).max())):
        raise GeometryError("agents 1 and 3 coincide; the gauge chart is undefined")
    # angle maps the chart direction (0, -1) onto the actual direction of x3 - x1
    angle = math.atan2(rel[2, 1], rel[2, 0]) + math.pi / 2
    back = rel @ rotation(-angle).T
    chart = GaugeChart(back[1, 0], back[1, 1], back[3, 0], back[3, 1], ell3)
    return chart, angle, offset


def triangle_slack(a: float, b: float, c: float) -> float:
    """Smallest relative slack of the three triangle inequalities."""
    scale = max(a + b + c, 1e-300)
    return min(a + b - c, a + c - b, b + c - a) / scale


def in_L(s, tol: float = TANGENCY_TOL) -> bool:
    """Both triangles ``(l1, l2, l3)`` and ``(l3, l4, l5)`` are realisable."""
    ell = as_targets(s).lengths
    return (triangle_slack(ell[0], ell[1], ell[2]) >= -tol
            and triangle_slack(ell[2], ell[3], ell[4]) >= -tol)


def in_L0(s, tol: float = TANGENCY_TOL) -> bool:
    """Strict triangle inequalities and all targets positive."""
    v = as_targets(s)
    ell = v.lengths
    return (bool(np.all(v.values > 0))
            and triangle_slack(ell[0], ell[1], ell[2]) > tol
            and triangle_slack(ell[2], ell[3], ell[4]) > tol)


@dataclass(frozen=True)
class Attachment:
    """Design charts attached to a target vector, ordered by ``(sign x21, sign x41)``."""

    charts: tuple = ()
    feasible: bool = True
    degenerate: bool = False
    diagnostic: str = ""

    def __iter__(self) -> Iterator[GaugeChart]:
        return iter(self.charts)

    def __len__(self) -> int:
        return len(self.charts)

    def __getitem__(self, i) -> GaugeChart:
        return self.charts[i]


def _apex(r_origin_sq: float, r_x3_sq: float, s3: float, ell3: float, tol: float):
    """Point at squared distance ``r_origin_sq`` from x1 and ``r_x3_sq`` from x3."""
    py = (r_x3_sq - r_origin_sq - s3) / (2.0 * ell3)
    ell_a, ell_b = math.sqrt(r_origin_sq), math.sqrt(r_x3_sq)
    tangent = triangle_slack(ell_a, ell_b, ell3) <= tol
    px = 0.0 if tangent else math.sqrt(max(r_origin_sq - py * py, 0.0))
    return px, py, tangent


def attach_frameworks(s, tol: float = TANGENCY_TOL) -> Attachment:
    """All frameworks (modulo SE(2)) whose squared edge lengths are ``s``.

    Four charts for generic targets, two when one triangle is flat, one when
    both are.  Order: ``(+, +), (+, -), (-, +), (-, -)`` in the signs of
    ``x21`` and ``x41``; coinciding charts of flat triangles are merged.
    """
    s = as_targets(s)
    v = s.values
    if v[2] <= 0:
        raise GeometryError("s3 = 0: agents 1 and 3 coincide")
    if not in_L(s, tol):
        return Attachment((), feasible=False, diagnostic="not in L: triangle inequality fails")
    ell3 = math.sqrt(v[2])
    a, b, flat2 = _apex(v[0], v[1], v[2], ell3, tol)
    c, d, flat4 = _apex(v[4], v[3], v[2], ell3, tol)
    charts = []
    for sg2, sg4 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        chart = GaugeChart(sg2 * a, b, sg4 * c, d, ell3)
        if not any(chart.distance(o) == 0.0 for o in charts):
            charts.append(chart)
    degenerate = flat2 or flat4
    diag = "tangential circle intersection" if degenerate else ""
    return Attachment(tuple(charts), feasible=True, degenerate=degenerate, diagnostic=diag)


def reflect_R1(c: GaugeChart) -> GaugeChart:
    """Mirror ``x2`` across the line of ``z3``; ``x4`` unchanged."""
    return GaugeChart(-c.x21, c.x22, c.x41, c.x42, c.ell3)


def reflect_R2(c: GaugeChart) -> GaugeChart:
    """Mirror ``x4`` across the line of ``z3``; ``x2`` unchanged."""
    return GaugeChart(c.x21, c.x22, -c.x41, c.x42, c.ell3)


def reflect_R3(c: GaugeChart) -> GaugeChart:
    """Mirror ``x2`` and ``x4`` across the line through ``x1`` perpendicular to ``z3``.

    Not an isometry of the framework: ``x3`` stays put, so ``s1``, ``s3``,
    ``s5`` and ``x2 . x4`` are kept while ``s2`` and ``s4`` change.
    """
    return GaugeChart(c.x21, -c.x22, c.x41, -c.x42, c.ell3)


def barycentric(p, a, b, c) -> Optional[np.ndarray]:
    """Barycentric coordinates of ``p`` in triangle ``abc`` (None if flat)."""
    m = np.array([[a[0] - c[0], b[0] - c[0]], [a[1] - c[1], b[1] - c[1]]])
    det = np.linalg.det(m)
    scale = max(np.abs(m).max() ** 2, 1e-300)
    if abs(det) <= 1e-14 * scale:
        return None
    l1, l2 = np.linalg.solve(m, np.asarray(p, float) - np.asarray(c, float))
    return np.array([l1, l2, 1.0 - l1 - l2])


def origin_in_hull(chart: GaugeChart, tol: float = 1e-12) -> bool:
    lam = barycentric((0.0, 0.0), chart.x2, chart.x3, chart.x4)
    return lam is not None and bool(np.all(lam >= -tol))


def in_Lc(s) -> bool:
    """Some attached framework has agent 1 in the closed hull of agents 2, 3, 4."""
    att = attach_frameworks(s)
    if not att.feasible:
        raise NotInL(att.diagnostic)
    return any(origin_in_hull(c) for c in att)


def is_aligned(chart: GaugeChart, tol: float = PARALLEL_TOL) -> bool:
    z = chart.edges()
    n1, n5 = np.linalg.norm(z[0]), np.linalg.norm(z[4])
    return abs(_cross(z[0], z[4])) <= tol * n1 * n5


def aligned_member(s, tol: float = PARALLEL_TOL) -> Optional[GaugeChart]:
    """An attached chart with ``z1`` parallel to ``z5``, if there is one."""
    att = attach_frameworks(s)
    if not att.feasible:
        raise NotInL(att.diagnostic)
    for chart in att:
        if is_aligned(chart, tol):
            return chart
    return None


def is_collinear(f, tol: float = 1e-9) -> bool:
    """All agents on one line (relative tolerance)."""
    pos = f.pos if isinstance(f, Framework) else np.asarray(f, float).reshape(4, 2)
    centred = pos - pos.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    return sv[1] <= tol * max(sv[0], 1e-300)
