"""Scenario files, the ``twocycles`` command line and report/CSV output.

A scenario is a versioned JSON document (see ``scenarios/`` and README)::

    {"version": 1,
     "targets": {"values": [...], "convention": "squared" | "lengths"},
     "mu": 0.0,
     "law": {"variant": "shared_scalar_poly", "coefficients": [1.0]},
     "integrator": {...}, "search": {...}, "probe": {...}, "options": {...}}

Unknown fields anywhere are rejected.  Each run writes ``report.json`` and
zero or more CSV tables into the output directory, atomically.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .control_laws import (
    ControlLaw, GeneralPoly, PerEdgeLinear, PerturbationSpec, Poly, SharedScalarPoly,
    local_gains, validate_compatibility,
)
from .dynamics import IntegrationError, IntegratorControls, integrate
from .equilibria import (
    CorankError, NewtonFailure, NoAlignedSolution, branch_crossing, classify,
    continue_branch, harvest_equilibria, make_record, robustness_probe,
    solve_ancillary_aligned, sotomayor_for_record,
)
from .factorization import (
    DegenerateOrbit, orbit_p_signs, p_factors, q_value, reconcile_ambient,
    sign_table_feasible, verify_factorization,
)
from .geometry import (
    Framework, GaugeChart, GeometryError, TargetsSquared, aligned_member, attach_frameworks,
    gauge_fix, in_L, in_L0, in_Lc,
)
from .linearization import GaugeZeroMismatch, reduced_jacobian_gains

log = logging.getLogger(__name__)

SCENARIO_VERSION = 1
REPORT_SCHEMA = "twocycles.report/1"
COMMANDS = ("attach", "simulate", "equilibria", "spectrum", "factorize", "continue",
            "sotomayor", "classify", "probe")
EXIT_OK, EXIT_SCENARIO, EXIT_NUMERIC = 0, 2, 3


class ScenarioError(ValueError):
    """The scenario file is malformed or violates the schema."""


# --- scenario ----------------------------------------------------------------

def _check_keys(d: Any, allowed: set, where: str) -> dict:
    if not isinstance(d, dict):
        raise ScenarioError(f"{where}: expected an object")
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(extra)}")
    return d


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(f"{where}: expected an integer, got {v!r}")
    return v


def _bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise ScenarioError(f"{where}: expected true/false, got {v!r}")
    return v


def _vec(v, n: Optional[int], where: str) -> tuple:
    if not isinstance(v, list) or (n is not None and len(v) != n):
        raise ScenarioError(f"{where}: expected a list of {n} numbers")
    return tuple(_num(x, where) for x in v)


@dataclass(frozen=True)
class LawSpec:
    variant: str = "shared_scalar_poly"
    coefficients: tuple = (1.0,)
    gains: tuple = ()  # k2, k3, k4, k11, k12, k51, k52
    edges: tuple = ()  # per edge: tuple of (exponents..., coeff)

    GAIN_NAMES = ("k2", "k3", "k4", "k11", "k12", "k51", "k52")

    def build(self) -> ControlLaw:
        if self.variant == "shared_scalar_poly":
            return SharedScalarPoly(self.coefficients)
        if self.variant == "per_edge_linear":
            return PerEdgeLinear(*self.gains)
        polys = []
        for i, terms in enumerate(self.edges, start=1):
            nvars = 5 if i in (1, 5) else 2
            polys.append(Poly(nvars, {tuple(int(e) for e in t[:-1]): t[-1] for t in terms}))
        return GeneralPoly(tuple(polys))

    @classmethod
    def parse(cls, d) -> "LawSpec":
        d = _check_keys(d, {"variant", "coefficients", "gains", "edges"}, "law")
        variant = d.get("variant", "shared_scalar_poly")
        if variant == "shared_scalar_poly":
            _check_keys(d, {"variant", "coefficients"}, "law")
            return cls(variant, _vec(d.get("coefficients", [1.0]), None, "law.coefficients"))
        if variant == "per_edge_linear":
            _check_keys(d, {"variant", "gains"}, "law")
            g = _check_keys(d.get("gains", {}), set(cls.GAIN_NAMES), "law.gains")
            defaults = dict(zip(cls.GAIN_NAMES, (1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0)))
            defaults.update({k: _num(v, f"law.gains.{k}") for k, v in g.items()})
            return cls(variant, (), tuple(defaults[k] for k in cls.GAIN_NAMES))
        if variant == "general_poly":
            _check_keys(d, {"variant", "edges"}, "law")
            edges = d.get("edges")
            if not isinstance(edges, list) or len(edges) != 5:
                raise ScenarioError("law.edges: expected five term lists")
            out = []
            for i, terms in enumerate(edges, start=1):
                nvars = 5 if i in (1, 5) else 2
                if not isinstance(terms, list):
                    raise ScenarioError(f"law.edges[{i}]: expected a list of terms")
                out.append(tuple(_vec(t, nvars + 1, f"law.edges[{i}] term") for t in terms))
            return cls(variant, (), (), tuple(out))
        raise ScenarioError(f"law.variant: unknown variant {variant!r}")

    def emit(self) -> dict:
        if self.variant == "shared_scalar_poly":
            return {"variant": self.variant, "coefficients": list(self.coefficients)}
        if self.variant == "per_edge_linear":
            return {"variant": self.variant, "gains": dict(zip(self.GAIN_NAMES, self.gains))}
        return {"variant": self.variant, "edges": [[list(t) for t in terms] for terms in self.edges]}


@dataclass(frozen=True)
class Search:
    n_starts: int = 200
    seed: int = 0
    box: Optional[float] = None
    t_end: float = 40.0


@dataclass(frozen=True)
class Probe:
    epsilon: float = 1e-3
    seed: int = 0
    degree: int = 3
    bound: float = 1.0
    compatible_only: bool = True
    trials: int = 20


@dataclass(frozen=True)
class Options:
    initial: Optional[tuple] = None  # four (x, y) pairs
    T: float = 10.0
    chart: Optional[tuple] = None  # (x21, x22, x41, x42, ell3)
    mu_range: tuple = (-0.2, 0.2)
    step: float = 0.01
    branch_sign: int = 1


@dataclass(frozen=True)
class Scenario:
    targets: tuple
    convention: str = "squared"
    mu: float = 0.0
    law: LawSpec = LawSpec()
    integrator: IntegratorControls = IntegratorControls()
    search: Search = Search()
    probe: Probe = Probe()
    options: Options = Options()
    version: int = SCENARIO_VERSION

    @property
    def targets_squared(self) -> TargetsSquared:
        v = np.array(self.targets, float)
        return TargetsSquared.from_lengths(v) if self.convention == "lengths" else TargetsSquared(v)

    def emit(self) -> dict:
        integ = dataclasses.asdict(self.integrator)
        if math.isinf(integ["max_step"]):
            integ["max_step"] = None
        opts = dataclasses.asdict(self.options)
        opts["initial"] = None if self.options.initial is None else [list(p) for p in self.options.initial]
        opts["chart"] = None if self.options.chart is None else list(self.options.chart)
        opts["mu_range"] = list(self.options.mu_range)
        return {
            "version": self.version,
            "targets": {"values": list(self.targets), "convention": self.convention},
            "mu": self.mu,
            "law": self.law.emit(),
            "integrator": integ,
            "search": dataclasses.asdict(self.search),
            "probe": dataclasses.asdict(self.probe),
            "options": opts,
        }

    def dumps(self) -> str:
        return json.dumps(self.emit(), indent=2, sort_keys=True)

    def digest(self) -> str:
        canon = json.dumps(self.emit(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _parse_section(cls, d, where: str, conv: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    d = _check_keys(d, names, where)
    kwargs = {}
    for k, v in d.items():
        kwargs[k] = conv[k](v, f"{where}.{k}")
    return cls(**kwargs)


def parse_scenario(data: Any) -> Scenario:
    """Validate a decoded JSON object and build a :class:`Scenario`."""
    d = _check_keys(data, {"version", "targets", "mu", "law", "integrator", "search",
                           "probe", "options"}, "scenario")
    version = _int(d.get("version", None), "version") if "version" in d else None
    if version != SCENARIO_VERSION:
        raise ScenarioError(f"version: expected {SCENARIO_VERSION}, got {version!r}")
    if "targets" not in d:
        raise ScenarioError("targets: required")
    t = _check_keys(d["targets"], {"values", "convention"}, "targets")
    values = _vec(t.get("values"), 5, "targets.values")
    if any(v < 0 for v in values):
        raise ScenarioError("targets.values: must be nonnegative")
    convention = t.get("convention", "squared")
    if convention not in ("squared", "lengths"):
        raise ScenarioError(f"targets.convention: expected 'squared' or 'lengths', got {convention!r}")

    def opt_num(v, w):
        return None if v is None else _num(v, w)

    integ = _parse_section(IntegratorControls, d.get("integrator", {}), "integrator", {
        "rtol": _num, "atol": _num, "h0": _num, "dt": _num, "fixed_step": _bool,
        "max_step": lambda v, w: math.inf if v is None else _num(v, w)})
    search = _parse_section(Search, d.get("search", {}), "search", {
        "n_starts": _int, "seed": _int, "box": opt_num, "t_end": _num})
    probe = _parse_section(Probe, d.get("probe", {}), "probe", {
        "epsilon": _num, "seed": _int, "degree": _int, "bound": _num,
        "compatible_only": _bool, "trials": _int})

    def initial(v, w):
        if v is None:
            return None
        if not isinstance(v, list) or len(v) != 4:
            raise ScenarioError(f"{w}: expected four [x, y] pairs")
        return tuple(_vec(p, 2, w) for p in v)

    def sign(v, w):
        v = _int(v, w)
        if v not in (1, -1):
            raise ScenarioError(f"{w}: expected 1 or -1")
        return v

    options = _parse_section(Options, d.get("options", {}), "options", {
        "initial": initial, "T": _num, "step": _num, "branch_sign": sign,
        "chart": lambda v, w: None if v is None else _vec(v, 5, w),
        "mu_range": lambda v, w: _vec(v, 2, w)})
    if search.n_starts < 1 or probe.trials < 1:
        raise ScenarioError("search.n_starts and probe.trials must be >= 1")
    if probe.epsilon < 0:
        raise ScenarioError("probe.epsilon must be >= 0")
    if options.T <= 0:
        raise ScenarioError("options.T must be positive")
    lo, hi = options.mu_range
    if not lo <= 0.0 <= hi:
        raise ScenarioError("options.mu_range must contain 0")
    return Scenario(values, convention, _num(d.get("mu", 0.0), "mu"),
                    LawSpec.parse(d.get("law", {"variant": "shared_scalar_poly"})),
                    integ, search, probe, options, version)


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc}") from exc
    return parse_scenario(data)


# --- reports -----------------------------------------------------------------

@dataclass
class Report:
    command: str
    scenario: Scenario
    result: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "tool_version": __version__,
            "command": self.command,
            "scenario_digest": self.scenario.digest(),
            "scenario": self.scenario.emit(),
            "targets_convention": self.scenario.convention,
            "targets_squared": self.scenario.targets_squared.values.tolist(),
            "result": self.result,
            "tables": sorted(f"{name}.csv" for name in self.tables),
            "wall_time": self.wall_time,
        }


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def emit_plots_data(report: Report, out_dir) -> list[Path]:
    """Write every table of ``report`` as ``<name>.csv`` in ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    for name, (header, rows) in sorted(report.tables.items()):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        path = out_dir / f"{name}.csv"
        _atomic_write(path, buf.getvalue())
        written.append(path)
    return written


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_report(report: Report, out_dir) -> Path:
    out_dir = Path(out_dir)
    emit_plots_data(report, out_dir)
    path = out_dir / "report.json"
    _atomic_write(path, json.dumps(_jsonable(report.to_dict()), indent=2, sort_keys=True) + "\n")
    return path


# --- commands ----------------------------------------------------------------

def _chart_dict(c: GaugeChart) -> dict:
    return dict(zip(("x21", "x22", "x41", "x42", "ell3"), c.as_array().tolist()))


def _charts_of(sc: Scenario) -> list[GaugeChart]:
    if sc.options.chart is not None:
        return [GaugeChart(*sc.options.chart)]
    att = attach_frameworks(sc.targets_squared.shifted(sc.mu))
    if not att.feasible:
        raise GeometryError(f"no design framework: {att.diagnostic}")
    return list(att.charts)


def _record_row(label, rec):
    return [label, rec.mu, rec.leading_real, rec.klass, rec.stability,
            *rec.chart.as_array().tolist(), rec.errors[0], rec.errors[4]]


BRANCH_HEADER = ["branch", "mu", "leading_real", "class", "stability",
                 "x21", "x22", "x41", "x42", "ell3", "e1", "e5"]


def cmd_attach(sc: Scenario) -> tuple[dict, dict]:
    s = sc.targets_squared.shifted(sc.mu)
    att = attach_frameworks(s)
    out = {"feasible": att.feasible, "degenerate": att.degenerate, "diagnostic": att.diagnostic,
           "in_L": in_L(s), "in_L0": in_L0(s), "charts": [_chart_dict(c) for c in att]}
    if att.feasible:
        out["in_Lc"] = in_Lc(s)
        member = aligned_member(s)
        out["aligned_member"] = None if member is None else _chart_dict(member)
    return out, {}


def cmd_simulate(sc: Scenario) -> tuple[dict, dict]:
    s = sc.targets_squared.values
    if sc.options.initial is not None:
        f0 = Framework(np.array(sc.options.initial))
    else:
        f0 = _charts_of(sc)[0].framework()
    traj = integrate(f0, s, sc.law.build(), sc.mu, sc.options.T, sc.integrator)
    header = ["t"] + [f"{a}{i}" for i in range(1, 5) for a in ("x", "y")] + [f"e{i}" for i in range(1, 6)]
    rows = [[float(t), *map(float, p.ravel()), *map(float, e)]
            for t, p, e in zip(traj.times, traj.positions, traj.errors)]
    chart, _, _ = gauge_fix(traj.final)
    result = {"samples": len(traj), "T": sc.options.T, "final_positions": traj.positions[-1],
              "final_errors": traj.errors[-1], "final_chart": _chart_dict(chart),
              "fixed_step": sc.integrator.fixed_step}
    return result, {"trajectory": (header, rows)}


def cmd_equilibria(sc: Scenario) -> tuple[dict, dict]:
    h = harvest_equilibria(sc.targets_squared.values, sc.law.build(), sc.search.n_starts,
                           sc.search.seed, sc.search.box, sc.mu, sc.search.t_end, sc.integrator)
    result = {"records": [r.to_dict() for r in h.records],
              "degenerate": [r.to_dict() for r in h.degenerate],
              "newton_or_integration_failures": h.failures, "search": h.metadata}
    rows = [_record_row(f"eq{i}", r) for i, r in enumerate(h.records)]
    return result, {"equilibria": (BRANCH_HEADER, rows)}


def cmd_spectrum(sc: Scenario) -> tuple[dict, dict]:
    s, law = sc.targets_squared.values, sc.law.build()
    recs = [make_record(c, s, law, sc.mu) for c in _charts_of(sc)]
    return {"records": [r.to_dict() for r in recs]}, {}


def cmd_factorize(sc: Scenario) -> tuple[dict, dict]:
    s, law = sc.targets_squared.values, sc.law.build()
    entries, rows = [], []
    for i, chart in enumerate(_charts_of(sc)):
        g = local_gains(law, s, chart)
        pf = p_factors(chart)
        det = float(np.linalg.det(reduced_jacobian_gains(chart, g)))
        entry = {"chart": _chart_dict(chart), "p": list(pf.as_tuple()), "p_product": pf.p,
                 "q": q_value(g), "gains": g.as_array(), "det_J": det,
                 "residual": verify_factorization(chart, g)}
        rec = reconcile_ambient(chart)
        entry["ambient_det"] = list(rec.ambient)
        entry["ambient_match"] = [None if m is None else {"factor": m[0], "sign": m[1]} for m in rec.matches]
        try:
            table = orbit_p_signs(chart)
            feas = sign_table_feasible(table)
            entry["orbit"] = table.as_dict()
            entry["orbit_feasible"] = feas.feasible
            entry["orbit_witness"] = feas.witness
            for name, sign, p in zip(("id", "R1", "R3", "R1R3"), table.signs, table.p_values):
                rows.append([f"chart{i}", name, p, sign])
        except DegenerateOrbit as exc:
            entry["orbit"] = {"degenerate": str(exc)}
        entries.append(entry)
    compat = validate_compatibility(law)
    return ({"charts": entries, "law_compatible": compat.ok, "violations": list(compat.violations)},
            {"sign_table": (["chart", "orbit_element", "p", "sign"], rows)})


def _seed_chart(sc: Scenario) -> GaugeChart:
    if sc.options.chart is not None:
        return GaugeChart(*sc.options.chart)
    member = aligned_member(sc.targets_squared)
    if member is None:
        raise GeometryError("targets admit no framework with z1 parallel to z5; give options.chart")
    return member


def cmd_continue(sc: Scenario) -> tuple[dict, dict]:
    s, law, o = sc.targets_squared.values, sc.law.build(), sc.options
    seed = make_record(_seed_chart(sc), s, law, 0.0)
    design = continue_branch(seed, s, law, o.mu_range, o.step, method="design", label="design")
    anc_seed = solve_ancillary_aligned(s, 0.0, law, o.branch_sign, hint=seed.chart)
    anc = continue_branch(anc_seed, s, law, o.mu_range, o.step, method="aligned",
                          branch_sign=o.branch_sign, label="aligned_ancillary")
    mu_star, gap = branch_crossing(anc)
    paired = []
    for mu, rec in anc.points:
        try:
            d = design.at(mu, 1e-12)
        except KeyError:
            continue
        paired.append([mu, d.leading_real, rec.leading_real, d.leading_real * rec.leading_real])
    exchange = [m for m, _, _, prod in paired if prod < 0 and m != 0.0]
    result = {
        "mu_star": mu_star, "errors_at_crossing": gap,
        "design": {"points": len(design), "terminated": design.terminated},
        "aligned_ancillary": {"points": len(anc), "terminated": anc.terminated,
                              "mu_min": float(anc.mus.min()), "mu_max": float(anc.mus.max())},
        "exchange_interval": [min(exchange), max(exchange)] if exchange else None,
        "leading_product": paired,
    }
    rows = [_record_row(b.label, r) for b in (design, anc) for _, r in b.points]
    return result, {"bifurcation": (BRANCH_HEADER, rows)}


def cmd_sotomayor(sc: Scenario) -> tuple[dict, dict]:
    s, law = sc.targets_squared.values, sc.law.build()
    rec = make_record(_seed_chart(sc), s, law, sc.mu)
    rep = sotomayor_for_record(rec, s, law)
    return {"record": rec.to_dict(), "report": rep.to_dict()}, {}


def cmd_classify(sc: Scenario) -> tuple[dict, dict]:
    v = classify(sc.targets_squared.values, sc.law.build(), sc.search.n_starts, sc.search.seed,
                 sc.search.box, sc.mu, t_end=sc.search.t_end, controls=sc.integrator)
    rows = [_record_row(f"eq{i}", r) for i, r in enumerate(v.design + v.ancillary)]
    return v.to_dict(), {"equilibria": (BRANCH_HEADER, rows)}


def cmd_probe(sc: Scenario) -> tuple[dict, dict]:
    p = sc.probe
    spec = PerturbationSpec(p.epsilon, p.seed, p.degree, p.bound, p.compatible_only)
    res = robustness_probe(sc.targets_squared.values, sc.law.build(), spec, p.trials, mu=sc.mu,
                           n_starts=sc.search.n_starts, seed=sc.search.seed, box=sc.search.box,
                           t_end=sc.search.t_end, controls=sc.integrator)
    return res.to_dict(), {}


HANDLERS = {
    "attach": cmd_attach, "simulate": cmd_simulate, "equilibria": cmd_equilibria,
    "spectrum": cmd_spectrum, "factorize": cmd_factorize, "continue": cmd_continue,
    "sotomayor": cmd_sotomayor, "classify": cmd_classify, "probe": cmd_probe,
}

NUMERIC_ERRORS = (ArithmeticError, IntegrationError, GeometryError, NewtonFailure,
                  NoAlignedSolution, CorankError, GaugeZeroMismatch, np.linalg.LinAlgError)


def execute(command: str, sc: Scenario) -> Report:
    if command not in HANDLERS:
        raise ScenarioError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    start = time.perf_counter()
    result, tables = HANDLERS[command](sc)
    return Report(command, sc, result, tables, time.perf_counter() - start)


def apply_overrides(sc: Scenario, seed: Optional[int] = None, fixed_step: bool = False) -> Scenario:
    if seed is not None:
        sc = dataclasses.replace(sc, search=dataclasses.replace(sc.search, seed=seed),
                                 probe=dataclasses.replace(sc.probe, seed=seed))
    if fixed_step:
        sc = dataclasses.replace(sc, integrator=dataclasses.replace(sc.integrator, fixed_step=True))
    return sc


def run(command: str, scenario_path, out_dir, seed_override: Optional[int] = None,
        fixed_step: bool = False) -> int:
    """Run one command; returns the process exit code."""
    try:
        sc = apply_overrides(load_scenario(scenario_path), seed_override, fixed_step)
        if command not in HANDLERS:
            raise ScenarioError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    try:
        report = execute(command, sc)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure in {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        diag = {"command": command, "error": type(exc).__name__, "message": str(exc),
                "scenario_digest": sc.digest()}
        if isinstance(exc, IntegrationError):
            diag["t"] = exc.t
        _atomic_write(Path(out_dir) / "failure.json", json.dumps(diag, indent=2) + "\n")
        return EXIT_NUMERIC
    path = write_report(report, out_dir)
    print(f"{command}: wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twocycles", description="2-cycles formation laboratory")
    p.add_argument("--scenario", required=True, type=Path, help="scenario JSON file")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--seed-override", type=int, default=None,
                   help="replace the search and probe seeds")
    p.add_argument("--fixed-step", action="store_true",
                   help="use the fixed-step RK4 integrator (byte-reproducible output)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.command, args.scenario, args.out, args.seed_override, args.fixed_step)


if __name__ == "__main__":
    sys.exit(main())
