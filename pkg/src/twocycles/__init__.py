"""Numerical laboratory for the 4-agent directed "2-cycles" formation."""

from __future__ import annotations

__version__ = "0.1.0"

from .control_laws import (  # noqa: E402
    IDENTITY_LAW, GeneralPoly, LocalGains, PerEdgeLinear, PerturbationSpec, Poly,
    SharedScalarPoly, local_gains, perturb, validate_compatibility,
)
from .dynamics import IntegratorControls, integrate, vector_field_x, vector_field_z  # noqa: E402
from .geometry import (  # noqa: E402
    Framework, GaugeChart, TargetsSquared, attach_frameworks, edges, errors_of, gauge_fix,
)

__all__ = [
    "Framework", "GaugeChart", "TargetsSquared", "attach_frameworks", "edges", "errors_of",
    "gauge_fix", "IDENTITY_LAW", "GeneralPoly", "LocalGains", "PerEdgeLinear",
    "PerturbationSpec", "Poly", "SharedScalarPoly", "local_gains", "perturb",
    "validate_compatibility", "IntegratorControls", "integrate", "vector_field_x",
    "vector_field_z", "__version__",
]
