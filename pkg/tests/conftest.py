from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from twocycles.control_laws import IDENTITY_LAW  # noqa: E402
from twocycles.equilibria import harvest_equilibria  # noqa: E402
from twocycles.geometry import GaugeChart, TargetsSquared  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# Aligned design chart: x4 = 2 x2, so z5 = 2 z1.
S0 = np.array([0.45, 0.85, 1.0, 1.6, 1.8])
S0_CHART = GaugeChart(0.6, -0.3, 1.2, -0.6, 1.0)
SQUARE = np.array([1.0, 1.0, 2.0, 1.0, 1.0])
# The mixed-hull example: lengths, with edges 4 and 5 in the order that
# reproduces its qualitative picture (see the decision log).
HULL_LENGTHS = (2.0, 2.6, 2.0, 3.3, 1.4)
HULL_PRINTED = (2.0, 2.6, 2.0, 1.4, 3.3)


def random_chart(rng, lo=0.3, hi=2.0) -> GaugeChart:
    """Random gauge chart with both apexes well away from the z3 axis."""
    x21 = rng.choice([-1, 1]) * rng.uniform(lo, hi)
    x41 = rng.choice([-1, 1]) * rng.uniform(lo, hi)
    return GaugeChart(x21, rng.uniform(-hi, hi), x41, rng.uniform(-hi, hi), rng.uniform(lo, hi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hull_targets():
    return TargetsSquared.from_lengths(HULL_LENGTHS).values


@pytest.fixture(scope="session")
def hull_harvest(hull_targets):
    return harvest_equilibria(hull_targets, IDENTITY_LAW, n_starts=200, seed=0)


def label_hull_records(records):
    """Split a hull harvest into the stable design (D1), unstable design (D2)
    and stable ancillary records with two complex pairs (A1)."""
    out = {"D1": [], "D2": [], "A1": [], "other": []}
    for r in records:
        n_complex = int(np.sum(np.abs(r.eigenvalues.imag) > 1e-6))
        if r.klass == "design":
            out["D1" if r.stability == "stable" else "D2"].append(r)
        elif r.stability == "stable" and n_complex == 4:
            out["A1"].append(r)
        else:
            out["other"].append(r)
    return out


@pytest.fixture(scope="session")
def s0_branches():
    """Design and aligned-ancillary branches through the aligned chart of S0."""
    from twocycles.equilibria import continue_branch, make_record, solve_ancillary_aligned

    seed = make_record(S0_CHART, S0, IDENTITY_LAW)
    design = continue_branch(seed, S0, IDENTITY_LAW, (-0.2, 0.2), 0.01, method="design")
    anc0 = solve_ancillary_aligned(S0, 0.0, IDENTITY_LAW, 1, hint=S0_CHART)
    anc = continue_branch(anc0, S0, IDENTITY_LAW, (-0.2, 0.2), 0.01, method="aligned",
                          branch_sign=1)
    return design, anc


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
