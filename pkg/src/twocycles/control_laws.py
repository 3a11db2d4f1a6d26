"""Decentralized feedback laws for the 2-cycles information flow.

Every edge feedback is a polynomial in the quantities its agent can sense:

* edges 2, 3, 4 (one co-leader): ``u_i(s_i, e_i)``
* edges 1, 5 (agent 1, two co-leaders): ``u_i(s1, s5, e1, e5, dot15)`` with
  ``dot15 = z1 . z5``

A law is *compatible* when each edge feedback vanishes whenever the errors it
reads vanish, i.e. every monomial carries an error factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SINGLE_VARS = ("s", "e")
DOUBLE_VARS = ("s1", "s5", "e1", "e5", "dot15")
#: Positions of the error variables among an edge's arguments.
ERROR_SLOTS = {1: (2, 3), 2: (1,), 3: (1,), 4: (1,), 5: (2, 3)}


def edge_var_names(edge: int) -> tuple[str, ...]:
    if edge in (1, 5):
        return DOUBLE_VARS
    return tuple(f"{v}{edge}" for v in SINGLE_VARS)


class Poly:
    """Sparse real polynomial ``sum c * prod(v_k ** n_k)`` over a fixed variable list."""

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        merged: dict[tuple[int, ...], float] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(n) for n in exps)
            if len(exps) != nvars or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent tuple {exps} for {nvars} variables")
            merged[exps] = merged.get(exps, 0.0) + float(coeff)
        self.terms = {k: v for k, v in sorted(merged.items()) if v != 0.0}
        if self.terms:
            self._exps = np.array(list(self.terms), dtype=float)
            self._coeffs = np.array(list(self.terms.values()))
        else:
            self._exps = np.zeros((0, nvars))
            self._coeffs = np.zeros(0)

    @classmethod
    def monomial(cls, nvars: int, exps, coeff: float = 1.0) -> "Poly":
        return cls(nvars, {tuple(exps): coeff})

    def __call__(self, *args):
        """Evaluate; arguments broadcast against each other."""
        if len(args) != self.nvars:
            raise TypeError(f"expected {self.nvars} arguments, got {len(args)}")
        vals = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
        out = np.zeros(vals[0].shape)
        for exps, coeff in zip(self._exps, self._coeffs):
            term = np.full(vals[0].shape, coeff)
            for v, n in zip(vals, exps):
                if n:
                    term = term * v**n
            out = out + term
        return out if out.ndim else float(out)

    def derivative(self, k: int) -> "Poly":
        terms = {}
        for exps, coeff in self.terms.items():
            if exps[k]:
                lowered = list(exps)
                lowered[k] -= 1
                terms[tuple(lowered)] = coeff * exps[k]
        return Poly(self.nvars, terms)

    def __add__(self, other: "Poly") -> "Poly":
        if other.nvars != self.nvars:
            raise ValueError("variable count mismatch")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0.0) + v
        return Poly(self.nvars, terms)

    def scaled(self, factor: float) -> "Poly":
        return Poly(self.nvars, {k: factor * v for k, v in self.terms.items()})

    def describe(self, names: Sequence[str], exps) -> str:
        parts = [n if p == 1 else f"{n}^{p}" for n, p in zip(names, exps) if p]
        return "*".join(parts) or "1"

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        return f"Poly({self.nvars}, {self.terms})"


class ControlLaw:
    """Base class; subclasses provide the five edge polynomials."""

    variant = "general"

    def edge_polys(self) -> tuple[Poly, ...]:
        raise NotImplementedError

    def feedback(self, s, e, dot15) -> np.ndarray:
        """All five edge feedbacks, shape ``e.shape``.

        ``s`` has shape ``(..., 5)`` or ``(5,)``, ``e`` shape ``(..., 5)`` and
        ``dot15`` shape ``(...)``.
        """
        s = np.broadcast_to(np.asarray(s, float), np.shape(e))
        e = np.asarray(e, float)
        polys = self.edge_polys()
        out = np.empty(e.shape)
        for i in (2, 3, 4):
            out[..., i - 1] = polys[i - 1](s[..., i - 1], e[..., i - 1])
        for i in (1, 5):
            out[..., i - 1] = polys[i - 1](s[..., 0], s[..., 4], e[..., 0], e[..., 4], dot15)
        return out

    def evaluate(self, edge: int, s, e, dot15: float = 0.0) -> float:
        if edge not in range(1, 6):
            raise ValueError(f"edge must be in 1..5, got {edge}")
        return float(self.feedback(np.asarray(s, float), np.asarray(e, float), dot15)[edge - 1])

    def as_general(self) -> "GeneralPoly":
        return GeneralPoly(self.edge_polys())


@dataclass(frozen=True)
class PerEdgeLinear(ControlLaw):
    """``u_i = k_i e_i`` on edges 2-4; ``u1 = k11 e1 + k12 e5``, ``u5 = k51 e1 + k52 e5``."""

    k2: float = 1.0
    k3: float = 1.0
    k4: float = 1.0
    k11: float = 1.0
    k12: float = 0.0
    k51: float = 0.0
    k52: float = 1.0
    variant = "per_edge_linear"

    def edge_polys(self):
        return (
            Poly(5, {(0, 0, 1, 0, 0): self.k11, (0, 0, 0, 1, 0): self.k12}),
            Poly(2, {(0, 1): self.k2}),
            Poly(2, {(0, 1): self.k3}),
            Poly(2, {(0, 1): self.k4}),
            Poly(5, {(0, 0, 1, 0, 0): self.k51, (0, 0, 0, 1, 0): self.k52}),
        )

    def feedback(self, s, e, dot15):
        e = np.asarray(e, float)
        out = e * np.array([self.k11, self.k2, self.k3, self.k4, self.k52])
        out[..., 0] += self.k12 * e[..., 4]
        out[..., 4] += self.k51 * e[..., 0]
        return out


@dataclass(frozen=True)
class SharedScalarPoly(ControlLaw):
    """One scalar law ``u(e) = c1 e + c2 e^2 + ...`` applied on every edge.

    Edge 1 uses ``u(e1)`` and edge 5 uses ``u(e5)``.
    """

    coefficients: tuple = (1.0,)
    variant = "shared_scalar_poly"

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def edge_polys(self):
        c = self.coefficients
        single = Poly(2, {(0, j + 1): cj for j, cj in enumerate(c)})
        p1 = Poly(5, {(0, 0, j + 1, 0, 0): cj for j, cj in enumerate(c)})
        p5 = Poly(5, {(0, 0, 0, j + 1, 0): cj for j, cj in enumerate(c)})
        return (p1, single, single, single, p5)

    def feedback(self, s, e, dot15):
        e = np.asarray(e, float)
        # Horner without a constant term
        out = np.zeros(e.shape)
        for cj in reversed(self.coefficients):
            out = (out + cj) * e
        return out

    def uprime0(self) -> float:
        return self.coefficients[0] if self.coefficients else 0.0


@dataclass(frozen=True)
class GeneralPoly(ControlLaw):
    """Arbitrary per-edge polynomials in the declared arguments."""

    polys: tuple = field(default_factory=tuple)
    variant = "general_poly"

    def __post_init__(self):
        polys = tuple(self.polys)
        if len(polys) != 5:
            raise ValueError("need five edge polynomials")
        for i, p in enumerate(polys, start=1):
            want = 5 if i in (1, 5) else 2
            if p.nvars != want:
                raise ValueError(f"edge {i} law must have {want} variables, has {p.nvars}")
        object.__setattr__(self, "polys", polys)

    def edge_polys(self):
        return self.polys


def linear_law(**gains) -> PerEdgeLinear:
    return PerEdgeLinear(**gains)


IDENTITY_LAW = SharedScalarPoly((1.0,))


@dataclass(frozen=True)
class Compatibility:
    violations: tuple = ()
    numeric_max: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_compatibility(law: ControlLaw, samples: int = 100, seed: int = 0,
                           tol: float = 1e-12) -> Compatibility:
    """Symbolic check that every monomial carries an error factor, plus a
    numeric spot check of ``|u| <= tol`` at zero error for random ``(s, dot15)``."""
    violations = []
    for edge, poly in enumerate(law.edge_polys(), start=1):
        names = edge_var_names(edge)
        slots = ERROR_SLOTS[edge]
        for exps in poly.terms:
            if not any(exps[k] for k in slots):
                mono = poly.describe(names, exps)
                violations.append(f"edge {edge}: monomial {mono} lacks error factor")
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.1, 4.0, size=(samples, 5))
    dot15 = rng.uniform(-4.0, 4.0, size=samples)
    u = law.feedback(s, np.zeros((samples, 5)), dot15)
    worst = float(np.abs(u).max())
    if worst > tol and not violations:
        violations.append(f"numeric check: |u| = {worst:.3g} at zero error")
    return Compatibility(tuple(violations), worst)


@dataclass(frozen=True)
class LocalGains:
    k2: float
    k3: float
    k4: float
    k11: float
    k12: float
    k51: float
    k52: float

    def as_array(self) -> np.ndarray:
        return np.array([self.k2, self.k3, self.k4, self.k11, self.k12, self.k51, self.k52])

    def matrix(self) -> np.ndarray:
        """``du/de`` at zero error as a 5x5 matrix (rows: feedback, cols: error)."""
        k = np.zeros((5, 5))
        k[0, 0], k[0, 4] = self.k11, self.k12
        k[4, 0], k[4, 4] = self.k51, self.k52
        k[1, 1], k[2, 2], k[3, 3] = self.k2, self.k3, self.k4
        return k

    @classmethod
    def from_array(cls, a) -> "LocalGains":
        return cls(*(float(v) for v in a))


class GainMismatch(ArithmeticError):
    pass


def _gain_args(s, dot15):
    s = np.asarray(s, float)
    single = {i: (s[i - 1], 0.0) for i in (2, 3, 4)}
    double = (s[0], s[4], 0.0, 0.0, dot15)
    return single, double


def analytic_gains(law: ControlLaw, s, dot15: float) -> LocalGains:
    polys = law.edge_polys()
    single, double = _gain_args(s, dot15)
    k = {i: polys[i - 1].derivative(1)(*single[i]) for i in (2, 3, 4)}
    k11 = polys[0].derivative(2)(*double)
    k12 = polys[0].derivative(3)(*double)
    k51 = polys[4].derivative(2)(*double)
    k52 = polys[4].derivative(3)(*double)
    return LocalGains(k[2], k[3], k[4], k11, k12, k51, k52)


def fd_gains(law: ControlLaw, s, dot15: float, h: float = 1e-6) -> LocalGains:
    """Central-difference gains from :meth:`ControlLaw.feedback` alone."""
    s = np.asarray(s, float)
    jac = np.empty((5, 5))
    for j in range(5):
        ep = np.zeros(5)
        ep[j] = h
        jac[:, j] = (law.feedback(s, ep, dot15) - law.feedback(s, -ep, dot15)) / (2 * h)
    return LocalGains(jac[1, 1], jac[2, 2], jac[3, 3], jac[0, 0], jac[0, 4], jac[4, 0], jac[4, 4])


def local_gains(law: ControlLaw, s, chart, design_tol: float = 1e-10,
                check_rtol: float = 1e-6) -> LocalGains:
    """First derivatives of the feedbacks at a design framework of ``s``.

    ``dot15`` is read from the chart (``x2 . x4``).  The analytic result is
    compared with central differences and :class:`GainMismatch` is raised if
    they disagree.
    """
    from .geometry import errors_of

    s = np.asarray(s, float)
    e = errors_of(chart.edges(), s)
    if np.max(np.abs(e)) > design_tol * max(1.0, float(np.max(s))):
        raise ValueError(f"chart is not a design framework for s (max |e| = {np.abs(e).max():.3g})")
    dot15 = float(chart.x2 @ chart.x4)
    g = analytic_gains(law, s, dot15)
    g_fd = fd_gains(law, s, dot15)
    a, b = g.as_array(), g_fd.as_array()
    if np.any(np.abs(a - b) > check_rtol * np.maximum(1.0, np.abs(a))):
        raise GainMismatch(f"analytic gains {a} disagree with finite differences {b}")
    return g


@dataclass(frozen=True)
class PerturbationSpec:
    epsilon: float
    seed: int = 0
    degree: int = 3
    bound: float = 1.0
    compatible_only: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")


def _monomials(nvars: int, degree: int):
    for exps in itertools.product(range(degree + 1), repeat=nvars):
        if sum(exps) <= degree:
            yield exps


def random_edge_poly(edge: int, rng: np.random.Generator, degree: int, bound: float,
                     compatible_only: bool) -> Poly:
    nvars = 5 if edge in (1, 5) else 2
    slots = ERROR_SLOTS[edge]
    monos = [m for m in _monomials(nvars, degree)
             if not compatible_only or any(m[k] for k in slots)]
    coeffs = rng.uniform(-bound, bound, size=len(monos))
    return Poly(nvars, dict(zip(monos, coeffs)))


def perturb(law: ControlLaw, spec: PerturbationSpec) -> ControlLaw:
    """``law + epsilon * u_tilde`` with ``u_tilde`` drawn from a PCG64 stream seeded by ``spec.seed``."""
    if spec.epsilon == 0:
        return law
    rng = np.random.default_rng(spec.seed)
    base = law.edge_polys()
    polys = []
    for edge in range(1, 6):
        extra = random_edge_poly(edge, rng, spec.degree, spec.bound, spec.compatible_only)
        polys.append(base[edge - 1] + extra.scaled(spec.epsilon))
    return GeneralPoly(tuple(polys))
