"""Equilibria of the 2-cycles: gauge-fixed Newton, aligned ancillary solutions,
continuation in ``mu``, transcritical (Sotomayor) checks, multi-start harvesting,
design/ancillary classification and robustness probes.

Gauge slice coordinates are ``y = (x21, x22, x32, x41, x42)`` with ``x1 = 0``
and ``x31 = 0``; ``ell3 = -x32``.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .control_laws import ControlLaw, PerturbationSpec, perturb
from .dynamics import IntegratorControls, field_flat, integrate_batch, shifted_targets
from .geometry import (
    Framework, GaugeChart, GeometryError, as_targets, attach_frameworks, errors_of,
    gauge_fix, is_aligned, is_collinear,
)
from .linearization import GaugeZeroMismatch, Spectrum, jacobian_x_fd, nontrivial_spectrum

log = logging.getLogger(__name__)

STABILITY_BAND = 1e-7
DESIGN_TOL = 1e-8
RESIDUAL_TOL = 1e-12
OMEGA_TOL = 1e-10
DEDUPE_TOL = 1e-6


class NewtonFailure(ArithmeticError):
    """Newton did not reach an accepted equilibrium."""


class NoAlignedSolution(ArithmeticError):
    pass


class CorankError(ArithmeticError):
    """More than one eigenvalue is numerically zero at a bifurcation point."""


# --- gauge slice -----------------------------------------------------------

def _positions(y):
    y = np.asarray(y, float)
    pos = np.zeros(y.shape[:-1] + (4, 2))
    pos[..., 1, 0] = y[..., 0]
    pos[..., 1, 1] = y[..., 1]
    pos[..., 2, 1] = y[..., 2]
    pos[..., 3, 0] = y[..., 3]
    pos[..., 3, 1] = y[..., 4]
    return pos


def chart_to_slice(chart: GaugeChart) -> np.ndarray:
    return np.array([chart.x21, chart.x22, -chart.ell3, chart.x41, chart.x42])


def slice_to_chart(y) -> GaugeChart:
    return GaugeChart(y[0], y[1], y[3], y[4], -y[2])


def _relative(y, s, law, mu):
    pos = _positions(y)
    f = field_flat(pos.reshape(pos.shape[:-2] + (8,)), s, law, mu).reshape(pos.shape)
    rel = f[..., 1:, :] - f[..., :1, :]
    arm = pos[..., 1:, :]
    rot = np.stack([-arm[..., 1], arm[..., 0]], axis=-1)
    return rel, rot


def bordered_residual(u, s, law: ControlLaw, mu: float = 0.0) -> np.ndarray:
    """Relative field of agents 2-4 plus ``omega`` times the rotation generator.

    ``u = (x21, x22, x32, x41, x42, omega)``; returns 6 components.
    """
    u = np.asarray(u, float)
    rel, rot = _relative(u[..., :5], s, law, mu)
    out = rel + u[..., 5, None, None] * rot
    return out.reshape(u.shape[:-1] + (6,))


def slice_field(y, s, law: ControlLaw, mu: float = 0.0) -> np.ndarray:
    """Vector field on the 5-dimensional gauge slice.

    The rotation needed to keep ``x3`` on the vertical axis is removed.
    """
    y = np.asarray(y, float)
    rel, rot = _relative(y, s, law, mu)
    omega = rel[..., 1, 0] / y[..., 2]  # -r3x / ell3
    g = rel + omega[..., None, None] * rot
    return np.stack([g[..., 0, 0], g[..., 0, 1], g[..., 1, 1], g[..., 2, 0], g[..., 2, 1]], axis=-1)


def _fd_jacobian(fun, x, h):
    n = x.size
    steps = np.eye(n) * h
    return ((fun(x + steps) - fun(x - steps)) / (2 * h)).T


# --- records ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EquilibriumRecord:
    chart: GaugeChart
    residual: float
    omega: float
    spectrum: Spectrum
    errors: np.ndarray
    klass: str  # "design" | "ancillary"
    stability: str  # "stable" | "unstable" | "marginal"
    degenerate: bool = False
    mu: float = 0.0
    iterations: int = 0

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def leading_real(self) -> float:
        return self.spectrum.max_real

    @property
    def aligned(self) -> bool:
        return is_aligned(self.chart, 1e-7)

    def framework(self) -> Framework:
        return self.chart.framework()

    def to_dict(self) -> dict:
        return {
            "chart": dict(zip(("x21", "x22", "x41", "x42", "ell3"), self.chart.as_array().tolist())),
            "mu": self.mu,
            "residual": self.residual,
            "omega": self.omega,
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            "errors": self.errors.tolist(),
            "class": self.klass,
            "stability": self.stability,
            "aligned": self.aligned,
            "degenerate": self.degenerate,
            "gauge_zeros": self.spectrum.gauge_zeros,
        }


def stability_of(max_real: float, band: float = STABILITY_BAND) -> str:
    if max_real < -band:
        return "stable"
    if max_real > band:
        return "unstable"
    return "marginal"


def _residual_tol(s) -> float:
    return RESIDUAL_TOL * max(1.0, float(np.max(np.abs(s)))) ** 1.5


def make_record(chart: GaugeChart, s, law: ControlLaw, mu: float = 0.0,
                omega: float = 0.0, iterations: int = 0) -> EquilibriumRecord:
    """Evaluate residual, errors and spectrum at ``chart``."""
    s_eff = shifted_targets(s, mu)
    fw = chart.framework()
    residual = float(np.max(np.abs(field_flat(fw.flat, s, law, mu))))
    z = chart.edges()
    e = errors_of(z, s_eff)
    j8 = jacobian_x_fd(fw, s, law, mu)
    try:
        spec = nontrivial_spectrum(j8, framework=fw, strict=False)
    except GaugeZeroMismatch:
        spec = nontrivial_spectrum(j8, strict=False)
    scale = max(1.0, float(np.abs(fw.pos).max()))
    degenerate = bool(np.min(np.linalg.norm(z, axis=1)) <= 1e-6 * scale or is_collinear(fw))
    klass = "design" if np.max(np.abs(e)) <= DESIGN_TOL * max(1.0, float(np.max(s_eff))) else "ancillary"
    return EquilibriumRecord(chart, residual, float(omega), spec, e, klass,
                             stability_of(spec.max_real), degenerate, float(mu), iterations)


def newton_equilibrium(start, s, law: ControlLaw, mu: float = 0.0, max_iter: int = 50,
                       accept: bool = True) -> EquilibriumRecord:
    """Bordered, damped Newton in the gauge chart.

    Unknowns ``(x21, x22, x32, x41, x42, omega)``; ``start`` is a Framework,
    a GaugeChart or a record.  Raises :class:`NewtonFailure` when the
    accepted-record conditions (full residual, ``|omega|``) are not met and
    ``accept`` is set.
    """
    if isinstance(start, EquilibriumRecord):
        start = start.chart
    if isinstance(start, GaugeChart):
        chart0 = start
    else:
        try:
            chart0, _, _ = gauge_fix(start)
        except GeometryError as exc:
            raise NewtonFailure(str(exc)) from exc
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    u = np.append(chart_to_slice(chart0), 0.0)

    def fun(v):
        return bordered_residual(v, s, law, mu)

    res = fun(u)
    norm = float(np.max(np.abs(res)))
    size = max(1.0, float(np.max(np.abs(u[:5]))))
    ftol = 1e-15 * size**3 * max(1.0, float(np.max(np.abs(s))))
    it = 0
    for it in range(1, max_iter + 1):
        if norm <= ftol:
            break
        h = 1e-7 * max(1.0, float(np.max(np.abs(u))))
        jac = _fd_jacobian(fun, u, h)
        try:
            du = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            du = np.linalg.lstsq(jac, -res, rcond=None)[0]
        lam = 1.0
        while lam >= 1.0 / 1024:
            trial = u + lam * du
            if trial[2] < 0:
                r_trial = fun(trial)
                n_trial = float(np.max(np.abs(r_trial)))
                if np.isfinite(n_trial) and n_trial < norm:
                    break
            lam /= 2
        else:
            break  # no decrease: stagnated at the attainable accuracy
        u, res, norm = trial, r_trial, n_trial
        if np.max(np.abs(lam * du)) <= 1e-15 * max(1.0, float(np.max(np.abs(u)))):
            break
    if u[2] >= 0:
        raise NewtonFailure("degenerate: agents 1 and 3 coincide")
    rec = make_record(slice_to_chart(u[:5]), s, law, mu, u[5], it)
    if accept and (rec.residual > _residual_tol(s) or abs(rec.omega) > OMEGA_TOL):
        raise NewtonFailure(
            f"not converged: residual {rec.residual:.3g}, omega {rec.omega:.3g} after {it} iterations")
    return rec


# --- aligned ancillary equilibria -------------------------------------------

def _aligned_phi(t2, s_eff, law, side, root):
    """Return ``(phi, t4, x3)`` for ``x2 = (t2, 0)``; ``phi = u1 t2 + u5 t4``."""
    s1, s2, s3, s4, s5 = s_eff
    x3x = (t2 * t2 + s3 - s2) / (2 * t2)
    rad3 = s3 - x3x * x3x
    if rad3 < 0:
        return math.nan, math.nan, None
    x3y = side * math.sqrt(rad3)
    rad4 = s4 - x3y * x3y
    if rad4 < 0:
        return math.nan, math.nan, None
    t4 = x3x + root * math.sqrt(rad4)
    e = np.array([t2 * t2 - s1, 0.0, 0.0, 0.0, t4 * t4 - s5])
    u = law.feedback(s_eff, e, t2 * t4)
    return float(u[0] * t2 + u[4] * t4), t4, np.array([x3x, x3y])


def aligned_roots(s, mu: float, law: ControlLaw, branch_sign: int, side: int = -1,
                  n_grid: int = 4000) -> list[GaugeChart]:
    """All aligned equilibria with ``x1 = 0``, ``x2 = (t2, 0)``, ``t2 > 0`` and
    ``sign(t4) = branch_sign`` (so ``z5 = (t4/t2) z1``).

    ``side`` picks the half-plane of ``x3``; the other side gives the mirror
    images.  Roots are found by scanning ``t2`` with bracketing, plus
    tangential (double) roots detected as near-zero local minima of ``|phi|``.
    """
    s_eff = shifted_targets(s, mu)
    if s_eff[2] <= 0:
        return []
    l2, l3 = math.sqrt(s_eff[1]), math.sqrt(s_eff[2])
    lo, hi = abs(l2 - l3), l2 + l3
    lo = max(lo, 1e-9 * hi)
    pad = 1e-12 * hi
    grid = np.linspace(lo + pad, hi - pad, n_grid)
    scale = max(1.0, float(np.max(np.abs(s_eff)))) ** 1.5
    found: list[tuple[float, float]] = []
    for root in (1, -1):
        def phi(t, root=root):
            val, t4, _ = _aligned_phi(t, s_eff, law, side, root)
            if not math.isfinite(val) or np.sign(t4) != branch_sign or abs(t4) < 1e-9:
                return math.nan
            return val

        vals = np.array([phi(t) for t in grid])
        for i in range(n_grid - 1):
            a, b = vals[i], vals[i + 1]
            if not (math.isfinite(a) and math.isfinite(b)):
                continue
            if a == 0.0:
                found.append((grid[i], root))
            elif a * b < 0:
                found.append((brentq(phi, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200), root))
        for i in range(1, n_grid - 1):
            a, b, c = np.abs(vals[i - 1:i + 2])
            if not np.all(np.isfinite([a, b, c])) or not (b <= a and b <= c):
                continue
            if vals[i - 1] * vals[i + 1] < 0:
                continue  # already bracketed
            opt = minimize_scalar(lambda t: abs(phi(t)), bounds=(grid[i - 1], grid[i + 1]),
                                  method="bounded", options={"xatol": 1e-14})
            if math.isfinite(opt.fun) and opt.fun <= 1e-10 * scale:
                found.append((float(opt.x), root))
    charts: list[GaugeChart] = []
    for t2, root in sorted(found):
        _, t4, x3 = _aligned_phi(t2, s_eff, law, side, root)
        pos = np.array([[0.0, 0.0], [t2, 0.0], x3, [t4, 0.0]])
        try:
            chart, _, _ = gauge_fix(Framework(pos))
        except GeometryError:
            continue
        if not any(chart.distance(c) <= 1e-9 * max(1.0, hi) for c in charts):
            charts.append(chart)
    return charts


def _aligned_record(chart, s, law, mu):
    rec = make_record(chart, s, law, mu)
    if rec.residual > _residual_tol(s):
        try:
            polished = newton_equilibrium(chart, s, law, mu)
            if is_aligned(polished.chart, 1e-6):
                return polished
        except NewtonFailure:
            pass
    return rec


def solve_ancillary_aligned(s, mu: float, law: ControlLaw, branch_sign: int = 1,
                            hint=None, side: int = -1) -> EquilibriumRecord:
    """Aligned equilibrium (``z5`` parallel to ``z1``) of the requested branch.

    ``branch_sign = +1`` when ``z1`` and ``z5`` point the same way.  With a
    ``hint`` (chart or record) the solution nearest to it is returned;
    otherwise the one with the smallest ``max(|e1|, |e5|)``.
    """
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    if isinstance(hint, EquilibriumRecord):
        hint = hint.chart
    if hint is not None:
        side = _side_of(hint)
    charts = aligned_roots(s, mu, law, branch_sign, side)
    if not charts:
        raise NoAlignedSolution(f"no aligned equilibrium with branch sign {branch_sign} at mu = {mu}")
    s_eff = shifted_targets(s, mu)
    if hint is not None:
        best = min(charts, key=lambda c: _chart_distance(c, hint))
    else:
        best = min(charts, key=lambda c: float(np.max(np.abs(errors_of(c.edges(), s_eff)[[0, 4]]))))
    return _aligned_record(best, s, law, mu)


def _side_of(chart: GaugeChart) -> int:
    """Orientation of the triangle ``(x1, x2, x3)``: sign of ``(x2 - x1) x (x3 - x1)``."""
    return 1 if -chart.ell3 * chart.x21 > 0 else -1


def aligned_equilibria(s, mu: float, law: ControlLaw) -> list[EquilibriumRecord]:
    """All aligned equilibria for both branch signs and both mirror sides."""
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    out = []
    for sign in (1, -1):
        for side in (1, -1):
            for chart in aligned_roots(s, mu, law, sign, side):
                out.append(_aligned_record(chart, s, law, mu))
    return out


# --- dedupe ----------------------------------------------------------------

def framework_distance(a, b) -> float:
    """Max-norm distance after the best rotation and translation (no reflection)."""
    pa = (a.framework() if isinstance(a, (GaugeChart, EquilibriumRecord)) else a)
    pb = (b.framework() if isinstance(b, (GaugeChart, EquilibriumRecord)) else b)
    pa = pa.pos if isinstance(pa, Framework) else np.asarray(pa, float).reshape(4, 2)
    pb = pb.pos if isinstance(pb, Framework) else np.asarray(pb, float).reshape(4, 2)
    ca, cb = pa - pa.mean(axis=0), pb - pb.mean(axis=0)
    cross = float(np.sum(ca[:, 0] * cb[:, 1] - ca[:, 1] * cb[:, 0]))
    dot = float(np.sum(ca * cb))
    th = math.atan2(cross, dot)
    c, s_ = math.cos(th), math.sin(th)
    rot = ca @ np.array([[c, s_], [-s_, c]])
    return float(np.max(np.abs(rot - cb)))


def _chart_distance(a: GaugeChart, b: GaugeChart) -> float:
    return framework_distance(a, b)


def dedupe(records: Sequence[EquilibriumRecord], tol: float = DEDUPE_TOL) -> list[EquilibriumRecord]:
    out: list[EquilibriumRecord] = []
    for r in records:
        scale = max(1.0, float(np.abs(r.chart.positions()).max()))
        if not any(framework_distance(r, o) <= tol * scale for o in out):
            out.append(r)
    return out


# --- continuation ----------------------------------------------------------

@dataclass
class Branch:
    label: str
    points: list = field(default_factory=list)  # (mu, EquilibriumRecord)
    terminated: Optional[str] = None

    @property
    def mus(self) -> np.ndarray:
        return np.array([m for m, _ in self.points])

    @property
    def records(self) -> list:
        return [r for _, r in self.points]

    def leading_real(self) -> np.ndarray:
        return np.array([r.leading_real for _, r in self.points])

    def at(self, mu: float, tol: float = 1e-12) -> EquilibriumRecord:
        for m, r in self.points:
            if abs(m - mu) <= tol:
                return r
        raise KeyError(mu)

    def __len__(self):
        return len(self.points)


def _design_step(prev: EquilibriumRecord, s, law, mu):
    att = attach_frameworks(shifted_targets(s, mu))
    if not att.feasible:
        raise NewtonFailure(att.diagnostic)
    chart = min(att.charts, key=lambda c: c.distance(prev.chart))
    return make_record(chart, s, law, mu)


def continue_branch(seed: EquilibriumRecord, s, law: ControlLaw, mu_range: tuple[float, float],
                    step: float = 0.01, method: str = "newton", branch_sign: int = 1,
                    min_step: float = 1e-6, label: str = "") -> Branch:
    """Natural-parameter continuation from ``seed`` (at ``seed.mu``) over ``mu_range``.

    ``method``: ``"newton"`` (bordered Newton, previous point as predictor),
    ``"design"`` (exact design charts via attachment) or ``"aligned"``
    (aligned ancillary solver).  Steps are halved on failure down to
    ``min_step``; the branch then stops and records why.
    """
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    lo, hi = mu_range
    if not lo <= seed.mu <= hi:
        raise ValueError("seed mu outside mu_range")

    def solve(prev, mu):
        if method == "design":
            return _design_step(prev, s, law, mu)
        if method == "aligned":
            return solve_ancillary_aligned(s, mu, law, branch_sign, hint=prev.chart)
        if method == "newton":
            rec = newton_equilibrium(prev.chart, s, law, mu)
            jump = framework_distance(rec, prev)
            if jump > 50 * abs(mu - prev.mu) * max(1.0, float(np.abs(prev.chart.positions()).max())):
                raise NewtonFailure(f"jumped {jump:.3g} to another branch")
            return rec
        raise ValueError(f"unknown continuation method {method!r}")

    branch = Branch(label or method)
    halves = {1: [], -1: []}
    for direction, end in ((1, hi), (-1, lo)):
        prev, mu, h = seed, seed.mu, step
        while direction * (end - mu) > 1e-15:
            target = round(mu + direction * h, 12)
            if direction * (target - end) > 0:
                target = end
            try:
                rec = solve(prev, target)
            except (NewtonFailure, NoAlignedSolution, GeometryError) as exc:
                h /= 2
                if h < min_step:
                    branch.terminated = f"stopped at mu = {mu:.6g}: {exc}"
                    break
                continue
            halves[direction].append((target, rec))
            prev, mu = rec, target
            h = min(step, 2 * h)
    branch.points = list(reversed(halves[-1])) + [(seed.mu, seed)] + halves[1]
    return branch


def branch_crossing(ancillary: Branch) -> tuple[float, float]:
    """``mu*`` where the aligned ancillary branch meets the design set.

    Located by linear interpolation of ``e1`` (zero exactly at a design
    framework).  Returns ``(mu_star, max |e| at the nearest point)``.
    """
    mus = ancillary.mus
    e1 = np.array([r.errors[0] for r in ancillary.records])
    for i in range(len(mus) - 1):
        if e1[i] == 0.0:
            return float(mus[i]), 0.0
        if e1[i] * e1[i + 1] < 0:
            t = e1[i] / (e1[i] - e1[i + 1])
            mu_star = float(mus[i] + t * (mus[i + 1] - mus[i]))
            j = i if abs(mus[i] - mu_star) <= abs(mus[i + 1] - mu_star) else i + 1
            return mu_star, float(np.max(np.abs(ancillary.records[j].errors)))
    j = int(np.argmin(np.abs(e1)))
    return float(mus[j]), float(np.max(np.abs(ancillary.records[j].errors)))


# --- Sotomayor conditions ---------------------------------------------------

@dataclass(frozen=True)
class SotomayorReport:
    lambda_min: complex
    w: np.ndarray
    v: np.ndarray
    b_mu: float
    a: float
    c: float
    c_raw: float
    others_negative: bool
    other_max_real: float
    verdict: str
    anchored: bool
    tolerances: dict

    def to_dict(self) -> dict:
        return {
            "lambda_min": [float(np.real(self.lambda_min)), float(np.imag(self.lambda_min))],
            "w": self.w.tolist(), "v": self.v.tolist(),
            "b_mu": self.b_mu, "a": self.a, "c": self.c, "c_raw": self.c_raw,
            "others_negative": self.others_negative, "other_max_real": self.other_max_real,
            "verdict": self.verdict, "anchored": self.anchored, "tolerances": self.tolerances,
        }


def _richardson(fn, h):
    return (4.0 * fn(h / 2) - fn(h)) / 3.0


def _unit(x):
    x = np.real_if_close(x, tol=1e6)
    x = np.real(x)
    n = np.linalg.norm(x)
    return x / n if n > 0 else x


def sotomayor_check(family: Callable, y0, mu0: float = 0.0, anchor: Optional[Callable] = None,
                    h: float = 1e-4, tol: Optional[float] = None, tol_b: float = 1e-6,
                    tol_a: float = 1e-6, tol_c: float = 1e-6) -> SotomayorReport:
    """Transcritical conditions for ``y' = family(y, mu)`` at ``(y0, mu0)``.

    ``b_mu = w . F_mu``, ``a = w . D2F(v, v)``, ``c = w . D_mu DF v``, all by
    central differences with one Richardson refinement.  ``b_mu`` is always
    reported in the original coordinates.  If ``anchor(mu)`` returns a known
    equilibrium branch through ``y0``, ``c`` is computed in coordinates
    ``eta = y - anchor(mu)`` (``c_raw`` keeps the unshifted value).
    """
    y0 = np.atleast_1d(np.asarray(y0, float))
    n = y0.size

    def F(y, mu):
        return np.atleast_1d(np.asarray(family(y, mu), float))

    def jac_at(hh):
        cols = [(F(y0 + hh * e, mu0) - F(y0 - hh * e, mu0)) / (2 * hh) for e in np.eye(n)]
        return np.column_stack(cols)

    jac = _richardson(jac_at, h)
    ev, vr = np.linalg.eig(jac)
    evl, vl = np.linalg.eig(jac.T)
    if tol is None:
        tol = 1e-6 * max(float(np.linalg.norm(jac, 2)), 1e-300)
    zero = np.abs(ev) <= tol
    if int(zero.sum()) >= 2:
        raise CorankError(f"{int(zero.sum())} eigenvalues within {tol:.3g} of zero: {ev}")
    k = int(np.argmin(np.abs(ev)))
    v = _unit(vr[:, k])
    w = _unit(vl[:, int(np.argmin(np.abs(evl)))])
    others = np.delete(ev, k)
    other_max = float(np.max(others.real)) if others.size else -math.inf
    b_mu = float(w @ _richardson(lambda hh: (F(y0, mu0 + hh) - F(y0, mu0 - hh)) / (2 * hh), h))
    a = float(w @ _richardson(
        lambda hh: (F(y0 + hh * v, mu0) - 2 * F(y0, mu0) + F(y0 - hh * v, mu0)) / hh**2, h))

    def mixed(G):
        return float(w @ _richardson(
            lambda hh: (G(hh * v, hh) - G(-hh * v, hh) - G(hh * v, -hh) + G(-hh * v, -hh)) / (4 * hh * hh),
            h))

    c_raw = mixed(lambda dy, dm: F(y0 + dy, mu0 + dm))
    if anchor is not None:
        c = mixed(lambda dy, dm: F(np.asarray(anchor(mu0 + dm), float) + dy, mu0 + dm))
    else:
        c = c_raw
    others_negative = bool(other_max < 0)
    if abs(ev[k]) <= tol and others_negative and abs(b_mu) <= tol_b and abs(a) >= tol_a and abs(c) >= tol_c:
        verdict = "transcritical"
    elif abs(ev[k]) <= tol and abs(b_mu) > tol_b and abs(a) >= tol_a:
        verdict = "saddle-node-like"
    else:
        verdict = "inconclusive"
    tols = {"tol": tol, "tol_b": tol_b, "tol_a": tol_a, "tol_c": tol_c, "h": h}
    return SotomayorReport(complex(ev[k]), w, v, b_mu, a, c, c_raw, others_negative, other_max,
                           verdict, anchor is not None, tols)


@dataclass(frozen=True)
class SliceFamily:
    """The 2-cycles on the gauge slice as a ``mu``-family."""

    s: np.ndarray
    law: ControlLaw

    def __call__(self, y, mu):
        return slice_field(y, self.s, self.law, mu)

    def design_anchor(self, chart: GaugeChart) -> Callable:
        """``mu -> slice point`` of the design branch through ``chart``."""
        s = self.s

        def anchor(mu):
            att = attach_frameworks(shifted_targets(s, mu))
            best = min(att.charts, key=lambda c: c.distance(chart))
            return chart_to_slice(best)

        return anchor


def sotomayor_for_record(rec: EquilibriumRecord, s, law: ControlLaw, **tols) -> SotomayorReport:
    """Sotomayor check of the 2-cycles at a record, anchored on the design
    branch when the record is a design equilibrium."""
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    fam = SliceFamily(s, law)
    anchor = fam.design_anchor(rec.chart) if rec.klass == "design" else None
    return sotomayor_check(fam, chart_to_slice(rec.chart), rec.mu, anchor=anchor, **tols)


# --- one-dimensional fixtures ------------------------------------------------

@dataclass(frozen=True)
class PolyFixture:
    """Scalar field ``x' = P_mu(x)``; ``coeffs(mu)`` returns highest degree first."""

    name: str
    coeffs: Callable[[float], Sequence[float]]

    def __call__(self, y, mu):
        return np.polyval(np.asarray(self.coeffs(mu), float), np.asarray(y, float))

    def equilibria(self, mu: float = 0.0, imag_tol: float = 1e-9) -> list["FixtureEquilibrium"]:
        c = np.asarray(self.coeffs(mu), float)
        d = np.polyder(c)
        roots = np.roots(c)
        xs = sorted({round(float(r.real), 12) for r in roots if abs(r.imag) <= imag_tol})
        return [FixtureEquilibrium(x, float(np.polyval(d, x))) for x in xs]


@dataclass(frozen=True)
class FixtureEquilibrium:
    x: float
    eigenvalue: float
    klass: str = "ancillary"

    @property
    def stability(self) -> str:
        return stability_of(self.eigenvalue)

    @property
    def leading_real(self) -> float:
        return self.eigenvalue

    def to_dict(self) -> dict:
        return {"x": self.x, "eigenvalue": self.eigenvalue, "class": self.klass,
                "stability": self.stability}


def logistic_fixture() -> PolyFixture:
    """``x' = x (mu - x)``."""
    return PolyFixture("logistic", lambda mu: (-1.0, mu, 0.0))


def saddle_node_fixture() -> PolyFixture:
    """``x' = mu - x^2``."""
    return PolyFixture("saddle-node", lambda mu: (-1.0, 0.0, mu))


def cubic_fixture(k: float) -> PolyFixture:
    """``x' = x (1 - k x^2)``."""
    return PolyFixture("cubic", lambda mu: (-k, 0.0, 1.0, 0.0))


def gradient_fixture(potential: Sequence[float]) -> PolyFixture:
    """``x' = -f'(x)`` for the polynomial potential ``f`` (highest degree first)."""
    d = tuple(-np.polyder(np.asarray(potential, float)))
    return PolyFixture("gradient", lambda mu: d)


def fixture_records(fx: PolyFixture, design: Sequence[float], mu: float = 0.0,
                    tol: float = 1e-9) -> list[FixtureEquilibrium]:
    return [dataclasses.replace(e, klass="design" if any(abs(e.x - d) <= tol for d in design)
                                else "ancillary")
            for e in fx.equilibria(mu)]


# --- harvesting ------------------------------------------------------------

@dataclass
class Harvest:
    records: list
    degenerate: list
    failures: int
    metadata: dict

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def harvest_equilibria(s, law: ControlLaw, n_starts: int = 200, seed: int = 0,
                       box: Optional[float] = None, mu: float = 0.0, t_end: float = 40.0,
                       controls: IntegratorControls = IntegratorControls(rtol=1e-7, atol=1e-10),
                       include_design: bool = True, include_aligned: bool = True) -> Harvest:
    """Empirical equilibrium set: integrate from random starts and polish.

    Starts are drawn uniformly from ``[-box, box]^8`` with a PCG64 generator
    seeded by ``seed``.  Attached design charts and aligned candidates are
    added so that unstable equilibria, which trajectories never reach, are
    also listed.  Deduplication is modulo rotation and translation only.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    s_eff = shifted_targets(s, mu)
    if box is None:
        box = 1.5 * float(np.sqrt(np.max(s_eff)))
    rng = np.random.default_rng(seed)
    y0 = rng.uniform(-box, box, size=(n_starts, 8))
    res = integrate_batch(lambda y: field_flat(y, s, law, mu), y0, t_end, controls)
    candidates: list[EquilibriumRecord] = []
    failures = 0
    for row, ok in zip(res.y, res.ok):
        if not ok:
            failures += 1
            continue
        try:
            candidates.append(newton_equilibrium(Framework.from_flat(row), s, law, mu))
        except (NewtonFailure, GeometryError):
            failures += 1
    if include_design:
        att = attach_frameworks(s_eff)
        candidates.extend(make_record(c, s, law, mu) for c in att.charts)
    if include_aligned:
        candidates.extend(r for r in aligned_equilibria(s, mu, law)
                          if r.residual <= _residual_tol(s))
    unique = dedupe(candidates)
    good = [r for r in unique if not r.degenerate]
    bad = [r for r in unique if r.degenerate]
    good.sort(key=lambda r: (r.klass != "design", r.leading_real))
    meta = {"n_starts": n_starts, "seed": seed, "box": box, "t_end": t_end, "mu": mu,
            "integration_failures": int(np.sum(~res.ok)), "prng": "numpy PCG64"}
    return Harvest(good, bad, failures, meta)


# --- classification -----------------------------------------------------------

@dataclass
class ClassificationVerdict:
    design: list
    ancillary: list
    stable: list
    unstable: list
    marginal: list
    expected_design: int
    feasible: bool
    typeA_empirical: bool
    strong_typeA_empirical: bool
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def dump(rs):
            return [r.to_dict() for r in rs]

        return {
            "design_found": len(self.design), "design_expected": self.expected_design,
            "design": dump(self.design), "ancillary": dump(self.ancillary),
            "stable_count": len(self.stable), "unstable_count": len(self.unstable),
            "marginal_count": len(self.marginal),
            "stable_ancillary": dump([r for r in self.stable if r.klass == "ancillary"]),
            "feasible": self.feasible, "typeA_empirical": self.typeA_empirical,
            "strong_typeA_empirical": self.strong_typeA_empirical,
            "metadata": self.metadata, "warnings": self.warnings,
        }


def classify_records(records: Sequence, expected_design: Optional[int] = None,
                     metadata: Optional[dict] = None) -> ClassificationVerdict:
    """Partition records and evaluate the type-A flags on the empirical sets."""
    design = [r for r in records if r.klass == "design"]
    ancillary = [r for r in records if r.klass != "design"]
    stable = [r for r in records if r.stability == "stable"]
    unstable = [r for r in records if r.stability == "unstable"]
    marginal = [r for r in records if r.stability == "marginal"]
    warnings = []
    if marginal:
        warnings.append(f"{len(marginal)} marginal record(s) excluded from E_s and E_u")
        log.warning(warnings[-1])
    feasible = bool(design)
    type_a = feasible and all(r.klass == "design" for r in stable)
    strong = type_a and all(r.stability == "stable" for r in design)
    return ClassificationVerdict(design, ancillary, stable, unstable, marginal,
                                 len(design) if expected_design is None else expected_design,
                                 feasible, type_a, strong, dict(metadata or {}), warnings)


def classify(s, law: ControlLaw, n_starts: int = 200, seed: int = 0, box: Optional[float] = None,
             mu: float = 0.0, **kwargs) -> ClassificationVerdict:
    h = harvest_equilibria(s, law, n_starts, seed, box, mu, **kwargs)
    expected = len(attach_frameworks(shifted_targets(np.asarray(as_targets(s).values), mu)))
    return classify_records(h.records, expected, h.metadata)


def classify_fixture(fx: PolyFixture, design: Sequence[float], mu: float = 0.0) -> ClassificationVerdict:
    recs = fixture_records(fx, design, mu)
    return classify_records(recs, len(design), {"fixture": fx.name, "mu": mu})


# --- robustness ------------------------------------------------------------

@dataclass
class ProbeResult:
    trials: int
    epsilon: float
    base: list
    exists: list  # per base record: number of trials where it persisted
    same_verdict: list  # per base record: trials with unchanged class and stability
    stable_aligned_ancillary: int  # trials with at least one such record
    verdicts_unchanged: int  # trials where every base record kept its verdict

    def to_dict(self) -> dict:
        return {
            "trials": self.trials, "epsilon": self.epsilon,
            "records": [
                {"record": r.to_dict(), "persisted": e, "same_verdict": v}
                for r, e, v in zip(self.base, self.exists, self.same_verdict)
            ],
            "stable_aligned_ancillary_trials": self.stable_aligned_ancillary,
            "verdicts_unchanged_trials": self.verdicts_unchanged,
        }


def _is_stable_aligned_ancillary(r: EquilibriumRecord) -> bool:
    return r.klass == "ancillary" and r.stability == "stable" and is_aligned(r.chart, 1e-6)


def robustness_probe(s, law: ControlLaw, spec: PerturbationSpec, trials: int = 20,
                     base: Optional[Sequence[EquilibriumRecord]] = None, mu: float = 0.0,
                     **harvest_kwargs) -> ProbeResult:
    """Re-solve the base records under seeded perturbations of ``law``.

    Trial ``k`` uses ``spec`` with seed ``spec.seed + k``.  A record persists
    when Newton from its chart converges to an accepted equilibrium nearby.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    s = np.asarray(as_targets(s).values if not isinstance(s, np.ndarray) else s, float)
    if base is None:
        base = harvest_equilibria(s, law, mu=mu, **harvest_kwargs).records
    base = list(base)
    exists = [0] * len(base)
    same = [0] * len(base)
    n_aligned = 0
    n_unchanged = 0
    for k in range(trials):
        pert = perturb(law, dataclasses.replace(spec, seed=spec.seed + k))
        found_aligned = False
        unchanged = True
        for i, r in enumerate(base):
            try:
                new = newton_equilibrium(r.chart, s, pert, mu)
            except (NewtonFailure, GeometryError):
                unchanged = False
                continue
            scale = max(1.0, float(np.abs(r.chart.positions()).max()))
            if framework_distance(new, r) > max(1e-3, 100 * spec.epsilon) * scale:
                unchanged = False
                continue
            exists[i] += 1
            if new.klass == r.klass and new.stability == r.stability:
                same[i] += 1
            else:
                unchanged = False
            found_aligned |= _is_stable_aligned_ancillary(new)
        n_aligned += found_aligned
        n_unchanged += unchanged
    return ProbeResult(trials, spec.epsilon, base, exists, same, n_aligned, n_unchanged)
