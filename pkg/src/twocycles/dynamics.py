"""Closed-loop vector field of the 2-cycles and a deterministic ODE integrator.

Agent coordinates::

    x1' = u1 z1 + u5 z5,   x2' = u2 z2,   x3' = u3 z3,   x4' = u4 z4

The bifurcation parameter ``mu`` is added to the squared target of edge 3.
All field functions broadcast over leading axes of flat ``(..., 8)`` states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .control_laws import ControlLaw
from .geometry import EDGE_ADJACENCY, Framework, edges, errors_of, is_collinear

BLOWUP_RADIUS = 1e6


def shifted_targets(s, mu: float = 0.0, edge: int = 3) -> np.ndarray:
    s = np.asarray(s, dtype=float).copy()
    s[edge - 1] += mu
    return s


def edge_terms(z: np.ndarray, s, law: ControlLaw, mu: float = 0.0) -> np.ndarray:
    """``u_i z_i`` stacked as ``(..., 5, 2)``."""
    s_eff = shifted_targets(s, mu)
    e = errors_of(z, s_eff)
    dot15 = np.einsum("...j,...j->...", z[..., 0, :], z[..., 4, :])
    u = law.feedback(s_eff, e, dot15)
    return u[..., :, None] * z


def field_flat(x: np.ndarray, s, law: ControlLaw, mu: float = 0.0) -> np.ndarray:
    """Vector field on flat ``(..., 8)`` states."""
    x = np.asarray(x, dtype=float)
    w = edge_terms(edges(x), s, law, mu)
    out = np.empty(x.shape[:-1] + (4, 2))
    out[..., 0, :] = w[..., 0, :] + w[..., 4, :]
    out[..., 1, :] = w[..., 1, :]
    out[..., 2, :] = w[..., 2, :]
    out[..., 3, :] = w[..., 3, :]
    return out.reshape(x.shape)


def vector_field_x(f, s, law: ControlLaw, mu: float = 0.0) -> np.ndarray:
    """Velocities of agents 1..4 as a flat length-8 array."""
    x = f.flat if isinstance(f, Framework) else np.asarray(f, float).reshape(8)
    return field_flat(x, s, law, mu)


def vector_field_z(z, s, law: ControlLaw, mu: float = 0.0) -> np.ndarray:
    """Edge-coordinate field ``z' = A_e (u_i z_i)`` as a ``(5, 2)`` array."""
    z = np.asarray(z, dtype=float)
    return np.einsum("ij,...jk->...ik", EDGE_ADJACENCY, edge_terms(z, s, law, mu))


@dataclass(frozen=True)
class MuFamily:
    """Base targets plus a shift ``mu`` of the squared target of ``edge``."""

    base: np.ndarray
    mu: float = 0.0
    edge: int = 3

    def targets(self) -> np.ndarray:
        return shifted_targets(self.base, self.mu, self.edge)


# --- integration ---------------------------------------------------------

_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array(_A[6] + [0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(RuntimeError):
    """Integration aborted; ``t`` is the time reached."""

    def __init__(self, message: str, t: float, trajectory=None):
        super().__init__(f"{message} at t = {t:.6g}")
        self.t = t
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorControls:
    rtol: float = 1e-9
    atol: float = 1e-12
    h0: float = 1e-3
    max_step: float = math.inf
    fixed_step: bool = False
    dt: float = 1e-3


def _dp_step(fun, y, k1, h):
    """One Dormand-Prince stage sweep; ``h`` has shape ``(N, 1)``."""
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k) if a)
        k.append(fun(yi))
    y_new = y + h * sum(b * kj for b, kj in zip(_B5, k) if b)
    err = h * sum(e * kj for e, kj in zip(_E, k) if e)
    return y_new, err, k[6]


def _err_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    return np.sqrt(np.mean((err / scale) ** 2, axis=-1))


def _step_factor(en):
    with np.errstate(divide="ignore"):
        f = 0.9 * np.where(en > 0, en, 1e-10) ** -0.2
    return np.clip(f, 0.2, 5.0)


def rk4_step(fun, y, h):
    k1 = fun(y)
    k2 = fun(y + 0.5 * h * k1)
    k3 = fun(y + 0.5 * h * k2)
    k4 = fun(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class BatchResult:
    y: np.ndarray
    t: np.ndarray
    ok: np.ndarray
    message: list = field(default_factory=list)


def integrate_batch(fun: Callable, y0: np.ndarray, t_end: float,
                    controls: IntegratorControls = IntegratorControls(),
                    max_iter: int = 200_000) -> BatchResult:
    """Integrate independent rows of ``y0`` to ``t_end``, each with its own step size.

    Rows that blow up or underflow are frozen and flagged in ``ok``.
    """
    y = np.array(y0, dtype=float, ndmin=2)
    n = y.shape[0]
    t = np.zeros(n)
    ok = np.ones(n, dtype=bool)
    msg = [""] * n
    if controls.fixed_step:
        steps = int(math.ceil(t_end / controls.dt))
        h = t_end / steps
        for _ in range(steps):
            y[ok] = rk4_step(fun, y[ok], h)
            bad = ok & ~np.all(np.abs(y) < BLOWUP_RADIUS, axis=1)
            for i in np.flatnonzero(bad):
                msg[i] = "blow-up"
            ok &= ~bad
            t[ok] += h
        t[ok] = t_end
        return BatchResult(y, t, ok, msg)

    h = np.full(n, min(controls.h0, controls.max_step, t_end))
    k1 = np.zeros_like(y)
    active = np.ones(n, dtype=bool)
    k1[active] = fun(y[active])
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        hs = np.minimum(np.minimum(h[idx], t_end - t[idx]), controls.max_step)
        y_new, err, k7 = _dp_step(fun, y[idx], k1[idx], hs[:, None])
        en = _err_norm(err, y[idx], y_new, controls.rtol, controls.atol)
        finite = np.all(np.isfinite(y_new), axis=1) & np.isfinite(en)
        acc = finite & (en <= 1.0)
        fac = np.where(finite, _step_factor(en), 0.2)
        fac = np.where(acc, fac, np.minimum(fac, 1.0))
        ia = idx[acc]
        y[ia] = y_new[acc]
        k1[ia] = k7[acc]
        t[ia] += hs[acc]
        h[idx] = hs * fac
        blown = ia[~np.all(np.abs(y[ia]) < BLOWUP_RADIUS, axis=1)]
        unfinished = t[idx] < t_end * (1 - 1e-15)
        tiny = idx[unfinished & (h[idx] < 1e-14 * np.maximum(1.0, np.abs(t[idx])))]
        for i in blown:
            msg[i] = "blow-up"
        for i in tiny:
            msg[i] = msg[i] or "step-size underflow"
        ok[blown] = False
        ok[tiny] = False
        done = t >= t_end * (1 - 1e-15)
        active = ok & ~done
    else:
        for i in np.flatnonzero(active):
            msg[i] = "iteration limit"
        ok &= ~active
    return BatchResult(y, t, ok, msg)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (n, 4, 2)
    errors: np.ndarray  # (n, 5)

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> Framework:
        return Framework(self.positions[-1])


def _trajectory(ts, ys, s_eff):
    pos = np.array(ys).reshape(-1, 4, 2)
    return Trajectory(np.array(ts), pos, errors_of(edges(pos), s_eff))


def integrate(f0, s, law: ControlLaw, mu: float = 0.0, T: float = 1.0,
              controls: IntegratorControls = IntegratorControls()) -> Trajectory:
    """Integrate the closed loop from ``f0`` over ``[0, T]``.

    Samples are recorded at every accepted step (every step in fixed-step
    mode).  Raises :class:`IntegrationError` on blow-up (``|x| > 1e6``) or
    step-size underflow; the partial trajectory is attached.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    x = (f0.flat if isinstance(f0, Framework) else np.asarray(f0, float).reshape(8))[None, :]
    s_eff = shifted_targets(s, mu)

    def fun(y):
        return field_flat(y, s, law, mu)

    ts, ys = [0.0], [x[0].copy()]
    if controls.fixed_step:
        steps = int(math.ceil(T / controls.dt))
        h = T / steps
        for i in range(steps):
            x = rk4_step(fun, x, h)
            ts.append((i + 1) * h)
            ys.append(x[0].copy())
            if not np.all(np.abs(x) < BLOWUP_RADIUS):
                raise IntegrationError("blow-up", ts[-1], _trajectory(ts, ys, s_eff))
        return _trajectory(ts, ys, s_eff)

    t = 0.0
    h = min(controls.h0, controls.max_step, T)
    k1 = fun(x)
    while t < T * (1 - 1e-15):
        hs = min(h, T - t, controls.max_step)
        y_new, err, k7 = _dp_step(fun, x, k1, np.array([[hs]]))
        en = float(_err_norm(err, x, y_new, controls.rtol, controls.atol)[0])
        if np.all(np.isfinite(y_new)) and en <= 1.0:
            t += hs
            x, k1 = y_new, k7
            ts.append(t)
            ys.append(x[0].copy())
            if not np.all(np.abs(x) < BLOWUP_RADIUS):
                raise IntegrationError("blow-up", t, _trajectory(ts, ys, s_eff))
            h = hs * float(_step_factor(np.array(en)))
        else:
            fac = float(_step_factor(np.array(en))) if np.isfinite(en) else 0.2
            h = hs * min(fac, 1.0)
        if t < T * (1 - 1e-15) and h < 1e-14 * max(1.0, t):
            raise IntegrationError("step-size underflow", t, _trajectory(ts, ys, s_eff))
    return _trajectory(ts, ys, s_eff)


def trajectory_is_collinear(traj: Trajectory, tol: float = 1e-9) -> bool:
    return all(is_collinear(p, tol) for p in traj.positions)
