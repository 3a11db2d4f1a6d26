"""Determinant factorization ``det J = q(gains) * p(chart)`` and orbit sign tables.

In the gauge chart ``x1 = (0, 0)``, ``x3 = (0, -l3)``::

    p1 = l3 x21
    p2 = l3 x41
    p3 = x21 x42 - x22 x41
    p4 = l3 (x41 l2^2 - x21 l4^2)
    q  = k2 k3 k4 (k11 k52 - k12 k51)

with ``det`` taken of the reduced Jacobian without its scale factor (the
scale contributes ``2**5``, which does not change any sign).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .control_laws import LocalGains
from .geometry import GaugeChart, _cross, reflect_R1, reflect_R3
from .linearization import reduced_jacobian_gains

ORBIT = ("id", "R1", "R3", "R1R3")
DEGENERATE_P = 1e-12


class DegenerateOrbit(ArithmeticError):
    """Some framework in the reflection orbit has ``p`` numerically zero."""


@dataclass(frozen=True)
class PFactors:
    p1: float
    p2: float
    p3: float
    p4: float

    @property
    def p(self) -> float:
        return self.p1 * self.p2 * self.p3 * self.p4

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p1, self.p2, self.p3, self.p4)


def p_factors(chart: GaugeChart) -> PFactors:
    x21, x22, x41, x42, l3 = chart.x21, chart.x22, chart.x41, chart.x42, chart.ell3
    l2sq = x21**2 + (x22 + l3) ** 2
    l4sq = x41**2 + (x42 + l3) ** 2
    return PFactors(
        l3 * x21,
        l3 * x41,
        x21 * x42 - x22 * x41,
        l3 * (x41 * l2sq - x21 * l4sq),
    )


def _perp(v):
    return np.array([-v[1], v[0]])


def ambient_determinants(chart: GaugeChart) -> tuple[float, float, float, float]:
    """``det A_i`` for the column matrices ``[z1 z3]``, ``[z1 z5]``, ``[z3 z4]`` and
    ``[[z1.z3p, z4.z3p], [z2.z2, z4.z4]]`` with ``z3p = (-z3y, z3x)``."""
    z = chart.edges()
    z3p = _perp(z[2])
    a4 = np.array([[z[0] @ z3p, z[3] @ z3p], [z[1] @ z[1], z[3] @ z[3]]])
    return (_cross(z[0], z[2]), _cross(z[0], z[4]), _cross(z[2], z[3]), float(np.linalg.det(a4)))


@dataclass(frozen=True)
class Reconciliation:
    """How each ``det A_i`` relates to the chart factors: ``(factor index, sign)``
    or ``None`` when it matches no ``+-p_j``."""

    matches: tuple
    ambient: tuple[float, ...]
    factors: tuple[float, ...]


def reconcile_ambient(chart: GaugeChart, rtol: float = 1e-9) -> Reconciliation:
    pf = p_factors(chart).as_tuple()
    amb = ambient_determinants(chart)
    matches = []
    for a in amb:
        found = None
        for j, pj in enumerate(pf):
            for sign in (1, -1):
                if abs(a - sign * pj) <= rtol * max(1.0, abs(a), abs(pj)):
                    found = (j + 1, sign)
                    break
            if found:
                break
        matches.append(found)
    return Reconciliation(tuple(matches), amb, pf)


def q_value(g: LocalGains) -> float:
    return g.k2 * g.k3 * g.k4 * (g.k11 * g.k52 - g.k12 * g.k51)


def verify_factorization(chart: GaugeChart, g: LocalGains) -> float:
    """Relative residual ``|det J - q p| / max(1, |det J|)``."""
    det = float(np.linalg.det(reduced_jacobian_gains(chart, g)))
    return abs(det - q_value(g) * p_factors(chart).p) / max(1.0, abs(det))


@dataclass(frozen=True)
class SignTable:
    """Signs of ``p`` over the orbit ``(id, R1, R3, R1R3)``.

    ``f`` (a function of the edge-1/5 data) is shared by ``{id, R3}`` and by
    ``{R1, R1R3}``; ``g`` (edge 2-4 data) by ``{id, R1}`` and by ``{R3, R1R3}``.
    """

    signs: tuple[int, int, int, int]
    p_values: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.signs) != 4 or any(v not in (1, -1) for v in self.signs):
            raise ValueError("signs must be four entries in {+1, -1}")

    @property
    def product(self) -> int:
        return int(np.prod(self.signs))

    def as_dict(self) -> dict:
        out = {"orbit": list(ORBIT), "signs": list(self.signs), "product": self.product}
        if self.p_values is not None:
            out["p"] = list(self.p_values)
        return out


def orbit_charts(chart: GaugeChart) -> tuple[GaugeChart, ...]:
    r1 = reflect_R1(chart)
    return (chart, r1, reflect_R3(chart), reflect_R3(r1))


def orbit_p_signs(chart: GaugeChart, tol: float = DEGENERATE_P) -> SignTable:
    values = tuple(p_factors(c).p for c in orbit_charts(chart))
    if any(abs(v) <= tol for v in values):
        raise DegenerateOrbit(f"orbit has p ~ 0: {values}")
    return SignTable(tuple(int(np.sign(v)) for v in values), values)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    witness: tuple | None  # (f_a, f_b, g_a, g_b) making every column negative
    cases_checked: int


def sign_table_feasible(t: SignTable) -> Feasibility:
    """Search the 16 sign choices of ``f`` and ``g`` for one making
    ``f * g * p < 0`` in every orbit column."""
    p_id, p_r1, p_r3, p_r1r3 = t.signs
    n = 0
    for fa, fb, ga, gb in itertools.product((1, -1), repeat=4):
        n += 1
        cols = (fa * ga * p_id, fb * ga * p_r1, fa * gb * p_r3, fb * gb * p_r1r3)
        if all(c < 0 for c in cols):
            return Feasibility(True, (fa, fb, ga, gb), n)
    return Feasibility(False, None, n)


def enumerate_sign_tables() -> list[tuple[SignTable, Feasibility]]:
    return [(t, sign_table_feasible(t))
            for t in (SignTable(signs) for signs in itertools.product((1, -1), repeat=4))]
