"""Jacobians of the 2-cycles: finite-difference ground truth and analytic forms.

The finite-difference Jacobian of the agent-coordinate field is the reference;
the closed forms below are checked against it.  At a design framework the
nontrivial spectrum equals the spectrum of the 5x5 reduced Jacobian::

    J = 2 * (A_e o G) K,     G_ij = z_i . z_j

with ``K`` the local gain matrix.  The factor 2 comes from ``de_i = 2 z_i . dz_i``
and is :data:`JACOBIAN_SCALE`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control_laws import ControlLaw, LocalGains
from .dynamics import field_flat
from .geometry import EDGE_ADJACENCY, Framework, GaugeChart, edges

#: ``d(z.z)/dz = 2 z``; calibrated against finite differences, see tests.
JACOBIAN_SCALE = 2.0

# agent -> edge incidence: z = B x (per coordinate)
_INCIDENCE = np.array([
    [-1, 1, 0, 0],
    [0, -1, 1, 0],
    [1, 0, -1, 0],
    [0, 0, 1, -1],
    [-1, 0, 0, 1],
])
# edge terms -> agent velocities: x1' = w1 + w5, x2' = w2, x3' = w3, x4' = w4
_COLLECT = np.array([
    [1, 0, 0, 0, 1],
    [0, 1, 0, 0, 0],
    [0, 0, 1, 0, 0],
    [0, 0, 0, 1, 0],
])


class GaugeZeroMismatch(ArithmeticError):
    """The symmetry zeros of an equilibrium Jacobian could not be isolated."""


def _z(zlike) -> np.ndarray:
    if isinstance(zlike, GaugeChart):
        return zlike.edges()
    if isinstance(zlike, Framework):
        return edges(zlike)
    z = np.asarray(zlike, dtype=float)
    return z.reshape(5, 2) if z.size == 10 else edges(z)


def z_matrix(z) -> np.ndarray:
    """5x10 block-diagonal matrix with rows ``z_i^T``."""
    z = _z(z)
    out = np.zeros((5, 10))
    for i in range(5):
        out[i, 2 * i:2 * i + 2] = z[i]
    return out


def rigidity_matrix(z) -> np.ndarray:
    """5x8 rigidity matrix with rows ``(z1,-z1,0,0)``, ``(0,z2,-z2,0)``,
    ``(-z3,0,z3,0)``, ``(0,0,z4,-z4)``, ``(z5,0,0,-z5)``."""
    z = _z(z)
    pattern = np.array([
        [1, -1, 0, 0],
        [0, 1, -1, 0],
        [-1, 0, 1, 0],
        [0, 0, 1, -1],
        [1, 0, 0, -1],
    ])
    return np.einsum("ia,ik->iak", pattern, z).reshape(5, 8)


def rigidity_rank(z, rtol: float = 1e-10) -> int:
    sv = np.linalg.svd(rigidity_matrix(z), compute_uv=False)
    return int(np.sum(sv > rtol * max(sv[0], 1e-300)))


def jacobian_x_fd(f, s, law: ControlLaw, mu: float = 0.0, h: float | None = None) -> np.ndarray:
    """8x8 central-difference Jacobian of the agent-coordinate field."""
    x = f.flat if isinstance(f, Framework) else np.asarray(f, float).reshape(8)
    if h is None:
        h = max(1e-6, 1e-8 * float(np.linalg.norm(x)))
    steps = np.eye(8) * h
    plus = field_flat(x[None, :] + steps, s, law, mu)
    minus = field_flat(x[None, :] - steps, s, law, mu)
    return ((plus - minus) / (2 * h)).T


def jacobian_x_design(f, gains: LocalGains) -> np.ndarray:
    """Analytic 8x8 Jacobian at a design framework from the local gains.

    ``dx' = C^(2) diag(z_i) K de`` with ``de = 2 Z B^(2) dx``.
    """
    z = _z(f)
    zm = z_matrix(z)
    collect = np.kron(_COLLECT, np.eye(2))
    incidence = np.kron(_INCIDENCE, np.eye(2))
    return collect @ zm.T @ gains.matrix() @ (JACOBIAN_SCALE * zm @ incidence)


def symmetry_generators(f) -> np.ndarray:
    """Orthonormal basis (8x3) of the two translations and the rotation at ``f``."""
    pos = f.pos if isinstance(f, Framework) else np.asarray(f, float).reshape(4, 2)
    tx = np.tile([1.0, 0.0], 4)
    ty = np.tile([0.0, 1.0], 4)
    rot = np.column_stack([-pos[:, 1], pos[:, 0]]).reshape(8)
    q, _ = np.linalg.qr(np.column_stack([tx, ty, rot]))
    return q


def _sort_eigs(ev):
    ev = np.asarray(ev, dtype=complex)
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    corank: int
    tol_zero: float
    gauge_zeros: int = 3

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @property
    def leading(self) -> complex:
        return complex(self.eigenvalues[np.argmax(self.eigenvalues.real)])

    def determinant(self) -> float:
        return float(np.prod(self.eigenvalues).real)

    def __len__(self):
        return len(self.eigenvalues)


def nontrivial_spectrum(j8: np.ndarray, tol_zero: float | None = None,
                        framework=None, strict: bool = True) -> Spectrum:
    """The five eigenvalues left after removing the three SE(2) zeros.

    With ``framework`` given, the symmetry generators are checked to lie in
    the kernel and the spectrum is read from the induced map on their
    orthogonal complement, which stays exact even when another eigenvalue is
    close to zero.  Without it the three smallest-magnitude eigenvalues are
    dropped.  ``strict`` raises :class:`GaugeZeroMismatch` unless exactly
    three eigenvalues lie within ``tol_zero`` (default ``1e-6 * ||J||``).
    """
    j8 = np.asarray(j8, dtype=float)
    norm = float(np.linalg.norm(j8, 2))
    if tol_zero is None:
        tol_zero = 1e-6 * max(norm, 1e-300)
    full = np.linalg.eigvals(j8)
    n_zero = int(np.sum(np.abs(full) <= tol_zero))
    if framework is not None:
        gens = symmetry_generators(framework)
        leak = float(np.linalg.norm(j8 @ gens, 2))
        if leak > tol_zero:
            raise GaugeZeroMismatch(f"symmetry generators not annihilated (|J g| = {leak:.3g})")
        q, _ = np.linalg.qr(np.column_stack([gens, np.eye(8)]))
        comp = q[:, 3:]
        ev = np.linalg.eigvals(comp.T @ j8 @ comp)
    else:
        ev = full[np.argsort(np.abs(full))][3:]
    if strict and n_zero != 3:
        raise GaugeZeroMismatch(f"expected 3 near-zero eigenvalues, found {n_zero}")
    ev = _sort_eigs(ev)
    corank = int(np.sum(np.abs(ev) <= tol_zero))
    return Spectrum(ev, corank, tol_zero, n_zero - corank)


def gram(z) -> np.ndarray:
    z = _z(z)
    return z @ z.T


def reduced_jacobian_restricted(z, uprime: float, scale: float = JACOBIAN_SCALE) -> np.ndarray:
    """``scale * u'(0) * Z A_e^(2) Z^T`` for the shared law; entry ``(i, j)`` is
    ``scale * u'(0) * A_e[i, j] * z_i . z_j``."""
    return scale * uprime * EDGE_ADJACENCY * gram(z)


def reduced_jacobian_gains(chart: GaugeChart, g: LocalGains) -> np.ndarray:
    """5x5 reduced Jacobian in the gauge chart, entry by entry, without the
    factor :data:`JACOBIAN_SCALE` (``d`` stands for the length ``ell3``)."""
    x21, x22, x41, x42, d = chart.x21, chart.x22, chart.x41, chart.x42, chart.ell3
    k2, k3, k4 = g.k2, g.k3, g.k4
    k11, k12, k51, k52 = g.k11, g.k12, g.k51, g.k52
    a1 = k11 * x21 + k51 * x41
    a2 = k11 * x22 + k51 * x42
    b1 = k52 * x41 + k12 * x21
    b2 = k52 * x42 + k12 * x22
    return np.array([
        [-x21 * a1 - x22 * a2, -k2 * x21**2 - k2 * x22 * (x22 + d), 0.0, 0.0,
         -x21 * b1 - x22 * b2],
        [0.0, -k2 * x21**2 - k2 * (x22 + d) ** 2, -d * k3 * (x22 + d), 0.0, 0.0],
        [d * a2, 0.0, -d**2 * k3, 0.0, d * b2],
        [0.0, 0.0, -d * k3 * (x42 + d), -k4 * x41**2 - k4 * (x42 + d) ** 2, 0.0],
        [-x41 * a1 - x42 * a2, 0.0, 0.0, -k4 * x41**2 - k4 * x42 * (x42 + d),
         -x41 * b1 - x42 * b2],
    ])


def reduced_jacobian_from_gains(z, g: LocalGains, scale: float = 1.0) -> np.ndarray:
    """Matrix form ``scale * (A_e o G) K``, valid in any frame."""
    return scale * (EDGE_ADJACENCY * gram(z)) @ g.matrix()


def jacobian_z_restricted(z, uprime: float) -> np.ndarray:
    """10x10 ``dF/dz`` of the shared-law edge field at a design framework:
    block ``(i, j)`` is ``2 u'(0) A_e[i, j] z_j z_j^T``."""
    z = _z(z)
    out = np.zeros((10, 10))
    for i in range(5):
        for j in range(5):
            out[2 * i:2 * i + 2, 2 * j:2 * j + 2] = EDGE_ADJACENCY[i, j] * np.outer(z[j], z[j])
    return JACOBIAN_SCALE * uprime * out


def d_jacobian_restricted(z, uprime: float) -> np.ndarray:
    """10x5 ``dF/ds`` at a design framework: block ``(i, j)`` is ``-u'(0) A_e[i, j] z_j``."""
    z = _z(z)
    out = np.zeros((10, 5))
    for i in range(5):
        for j in range(5):
            out[2 * i:2 * i + 2, j] = EDGE_ADJACENCY[i, j] * z[j]
    return -uprime * out


def chain_rule_residual(z, uprime: float) -> float:
    """``max |dF/ds (de/dz)(ds/de) - dF/dz|`` with ``de/dz = 2Z`` and ``de/ds = -1``,
    i.e. the residual of ``dF/dz = dF/ds (-2 Z)``."""
    zm = z_matrix(z)
    lhs = d_jacobian_restricted(z, uprime) @ (-JACOBIAN_SCALE * zm)
    return float(np.max(np.abs(lhs - jacobian_z_restricted(z, uprime))))


def left_null_vectors(m: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of ``{w : w^T m = 0}``."""
    u, sv, _ = np.linalg.svd(m)
    rank = int(np.sum(sv > rtol * max(sv[0], 1e-300))) if sv.size else 0
    return u[:, rank:]


def corank(j: np.ndarray, tol: float = 1e-8) -> tuple[int, np.ndarray]:
    """Number of singular values ``<= tol * sigma_max``, with the singular values."""
    sv = np.linalg.svd(np.asarray(j, dtype=float), compute_uv=False)
    return int(np.sum(sv <= tol * max(sv[0], 1e-300))), sv
