"""Continuous machines: vector fields on Euclidean state spaces.

Ports carry ``EuclideanSpace`` types; a tuple of port values is the
concatenation of their coordinates in declaration order, so routing
is coordinate gathering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .wiring import (Box, EuclideanSpace, OuterIn, WiringDiagram, WiringError, require_valid,
                     tensor_boxes)


def _dims(ports) -> list[int]:
    out = []
    for p in ports:
        if not isinstance(p.type, EuclideanSpace):
            raise WiringError(f"port {p.name!r} is not Euclidean")
        out.append(p.type.dim)
    return out


def coordinate_gathers(phi: WiringDiagram) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays for the routing maps at the level of coordinates.

    The first applies to ``concat(y, x_out)``, the second to ``x_out``.
    """
    ydims, xdims = _dims(phi.outer.inputs), _dims(phi.inner.outputs)
    off, a = {}, 0
    for p, d in zip(phi.outer.inputs, ydims):
        off[("y", p.name)] = (a, d)
        a += d
    for p, d in zip(phi.inner.outputs, xdims):
        off[("x", p.name)] = (a, d)
        a += d
    ny = sum(ydims)
    pin = phi.phi_in_map
    gi = []
    for p in phi.inner.inputs:
        r = pin[p.name]
        key = ("y", r.port) if isinstance(r, OuterIn) else ("x", r.port)
        s, d = off[key]
        gi.extend(range(s, s + d))
    pout = phi.phi_out_map
    go = []
    for p in phi.outer.outputs:
        s, d = off[("x", pout[p.name])]
        go.extend(range(s - ny, s - ny + d))
    return np.array(gi, dtype=int), np.array(go, dtype=int)


@dataclass(frozen=True)
class PolyField:
    """Polynomial map ``(a, s) -> R^k``.

    ``terms[i]`` lists ``(coefficient, exponents)`` for output coordinate
    i, with exponents over the variables ``a`` then ``s``.
    """
    nvars: int
    terms: tuple

    def __call__(self, a, s):
        z = np.concatenate([np.asarray(a, float), np.asarray(s, float)])
        out = np.zeros(len(self.terms))
        for i, row in enumerate(self.terms):
            acc = 0.0
            for c, ex in row:
                t = c
                for zj, k in zip(z, ex):
                    if k:
                        t *= zj ** k
                acc += t
            out[i] = acc
        return out


@dataclass(frozen=True)
class OdeMachine:
    """``ds/dt = dyn(a, s)``, output ``rdt(s)``, inhabiting ``box``."""
    box: Box
    state_dim: int
    dyn: Callable
    rdt: Callable
    poly: PolyField | None = None

    @property
    def input_dim(self) -> int:
        return sum(_dims(self.box.inputs))

    @property
    def output_dim(self) -> int:
        return sum(_dims(self.box.outputs))


def _check_dims(m_box: Box, inner: Box):
    if _dims(m_box.inputs) != _dims(inner.inputs) or _dims(m_box.outputs) != _dims(inner.outputs):
        raise WiringError("dimension mismatch between machine and diagram")


def cds_apply(phi: WiringDiagram, m: OdeMachine) -> OdeMachine:
    require_valid(phi)
    _check_dims(m.box, phi.inner)
    gi, go = coordinate_gathers(phi)
    f_dyn, f_rdt = m.dyn, m.rdt

    def dyn(y, s):
        z = np.concatenate([np.asarray(y, float), np.asarray(f_rdt(s), float)])
        return f_dyn(z[gi], s)

    def rdt(s):
        return np.asarray(f_rdt(s), float)[go]

    return OdeMachine(phi.outer, m.state_dim, dyn, rdt)


@dataclass(frozen=True)
class ContinuousMoore:
    box: Box
    state_dim: int
    upd: Callable
    rdt: Callable


def euler_discretize(m: OdeMachine, eps: float) -> ContinuousMoore:
    if not eps > 0:
        raise ValueError("eps must be positive")
    f = m.dyn

    def upd(a, s):
        s = np.asarray(s, float)
        return s + eps * np.asarray(f(a, s), float)

    return ContinuousMoore(m.box, m.state_dim, upd, m.rdt)


def cmoore_apply(phi: WiringDiagram, m: ContinuousMoore) -> ContinuousMoore:
    """The discrete rewiring formula, applied to real-vector machines."""
    require_valid(phi)
    _check_dims(m.box, phi.inner)
    gi, go = coordinate_gathers(phi)
    f_upd, f_rdt = m.upd, m.rdt

    def upd(y, s):
        z = np.concatenate([np.asarray(y, float), np.asarray(f_rdt(s), float)])
        return f_upd(z[gi], s)

    def rdt(s):
        return np.asarray(f_rdt(s), float)[go]

    return ContinuousMoore(phi.outer, m.state_dim, upd, rdt)


def ode_tensor(*ms: OdeMachine) -> OdeMachine:
    """Uncoupled parallel machines; states and ports are concatenated."""
    ks = [m.state_dim for m in ms]
    ns = [m.input_dim for m in ms]
    sk = np.cumsum([0] + ks)
    sn = np.cumsum([0] + ns)

    def dyn(a, s):
        a, s = np.asarray(a, float), np.asarray(s, float)
        return np.concatenate([np.asarray(m.dyn(a[sn[i]:sn[i + 1]], s[sk[i]:sk[i + 1]]), float)
                               for i, m in enumerate(ms)] or [np.zeros(0)])

    def rdt(s):
        s = np.asarray(s, float)
        return np.concatenate([np.asarray(m.rdt(s[sk[i]:sk[i + 1]]), float)
                               for i, m in enumerate(ms)] or [np.zeros(0)])

    return OdeMachine(tensor_boxes([m.box for m in ms]), int(sk[-1]), dyn, rdt)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    step: float
    blowup_time: float | None = None
    status: str = "ok"

    @property
    def blew_up(self) -> bool:
        return self.blowup_time is not None

    def value_at(self, t: float) -> np.ndarray:
        i = int(round(t / self.step))
        return self.states[i]


def _advance(f, method, t, s, h):
    if method == "euler":
        return s + h * f(t, s)
    k1 = f(t, s)
    k2 = f(t + h / 2, s + h / 2 * k1)
    k3 = f(t + h / 2, s + h / 2 * k2)
    k4 = f(t + h, s + h * k3)
    return s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(m: OdeMachine, input_signal: Callable, s0, T: float, step: float,
              method: str = "rk4", blowup: float = 1e6, max_growth: float = 1.15,
              min_substep: float = 1e-14) -> Trajectory:
    """Fixed-grid integration that reports blow-up instead of raising.

    Each grid step is taken whole unless the state norm would grow by
    more than ``max_growth`` in it; then it is split in halves, down to
    ``min_substep``.  This lets a finite-time singularity be detected
    before it is stepped over.  Blow-up means a non-finite state or a
    norm above ``blowup``; the trajectory stops at the last good grid
    point and ``blowup_time`` holds the time the bound was crossed.
    """
    if not step > 0 or T < 0:
        raise ValueError("need step > 0 and T >= 0")
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    dyn = m.dyn

    def f(t, s):
        return np.asarray(dyn(np.asarray(input_signal(t), float), s), float)

    n = int(round(T / step))
    s = np.asarray(s0, float).reshape(m.state_dim)
    times, states = [0.0], [s.copy()]
    with np.errstate(all="ignore"):
        for k in range(n):
            t0 = k * step
            t, rem, h = t0, step, step
            while rem > 1e-12 * step:
                h = min(h, rem)
                nxt = _advance(f, method, t, s, h)
                norm0 = float(np.max(np.abs(s))) if s.size else 0.0
                norm1 = float(np.max(np.abs(nxt))) if nxt.size else 0.0
                bad = not np.all(np.isfinite(nxt))
                grew = norm1 > max_growth * max(norm0, 1.0)
                if (bad or grew) and h > min_substep:
                    h /= 2
                    continue
                if bad or norm1 > blowup:
                    return Trajectory(np.array(times), np.array(states), step, t + h, "blowup")
                s, t, rem = nxt, t + h, rem - h
            times.append((k + 1) * step)
            states.append(s.copy())
    return Trajectory(np.array(times), np.array(states), step)


class GridError(ValueError):
    pass


def residual_check(traj: Trajectory, m: OdeMachine, input_signal: Callable, tol: float):
    """Largest centered-difference residual at interior grid points.

    Returns ``(max_residual, passed)``.
    """
    ts, xs = traj.times, traj.states
    if len(ts) < 3:
        raise GridError("need at least 3 grid points")
    dt = np.diff(ts)
    h = float(dt[0])
    if not np.allclose(dt, h, rtol=1e-9, atol=0):
        raise GridError("grid is not uniform")
    worst = 0.0
    for i in range(1, len(ts) - 1):
        d = (xs[i + 1] - xs[i - 1]) / (2 * h)
        r = d - np.asarray(m.dyn(np.asarray(input_signal(ts[i]), float), xs[i]), float)
        worst = max(worst, float(np.max(np.abs(r))) if r.size else 0.0)
    return worst, worst <= tol


def sampled(times: Sequence[float], fn: Callable, step: float) -> Trajectory:
    """Trajectory from a closed-form solution sampled on a grid."""
    ts = np.asarray(times, float)
    return Trajectory(ts, np.array([np.atleast_1d(np.asarray(fn(t), float)) for t in ts]), step)


def grid(T: float, step: float, t0: float = 0.0) -> np.ndarray:
    n = int(round((T - t0) / step))
    return t0 + step * np.arange(n + 1)


def scalar_machine(dyn: Callable, label: str = "F", input_dim: int = 0) -> OdeMachine:
    """One-dimensional state, readout the state itself."""
    ins = [("a", EuclideanSpace(input_dim))] if input_dim else []
    return OdeMachine(Box(ins, [("y", EuclideanSpace(1))], label), 1, dyn, lambda s: np.asarray(s, float))


def sqrt_field() -> OdeMachine:
    """ds/dt = 2 sqrt(|s|): not Lipschitz at 0, so solutions branch."""
    return scalar_machine(lambda a, s: 2 * np.sqrt(np.abs(np.asarray(s, float))), "Sqrt")


def square_field() -> OdeMachine:
    """ds/dt = s^2: finite-time blow-up."""
    return scalar_machine(lambda a, s: np.asarray(s, float) ** 2, "Square")


def no_input(t):
    return np.zeros(0)

