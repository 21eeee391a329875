"""One-dimensional mover dynamics along the transport axis.

Net force is drive minus friction minus electromagnetic drag, with both
resistive terms opposing the direction of motion. The gap (vertical)
axis is not integrated here; it is held by the levitation loop in
:mod:`maglev_conveyor.control`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


class IntegrationError(RuntimeError):
    def __init__(self, message: str, tick: int | None = None, t: float | None = None):
        super().__init__(message)
        self.tick = tick
        self.t = t


@dataclass(frozen=True)
class ForceBalance:
    """Drive force and the magnitudes of the two resistive forces, all in newtons."""

    f_em: float
    f_f: float = 0.0
    f_b: float = 0.0

    def __post_init__(self):
        for name in ("f_em", "f_f", "f_b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.f_f < 0 or self.f_b < 0:
            raise ValueError("resistive force magnitudes must be non-negative")


@dataclass(frozen=True)
class MoverState:
    position: float
    velocity: float
    mass: float
    gap: float = 1e-3
    lev_current: float = 0.0
    drive_iq: float = 0.0

    def __post_init__(self):
        for name in ("position", "velocity", "mass", "gap", "lev_current", "drive_iq"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.gap <= 0:
            raise ValueError("gap must be positive")


ForceModel = Callable[[MoverState], ForceBalance]


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def net_acceleration(
    fb: ForceBalance, mass: float, velocity_sign: int, static_threshold: float = 0.0
) -> float:
    """Acceleration from the force balance.

    While moving, friction and drag oppose ``velocity_sign``. At rest a drive
    no larger than ``static_threshold`` is held by static friction; above it
    the resistive terms oppose the drive and can at most cancel it.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    resist = fb.f_f + fb.f_b
    if velocity_sign:
        return (fb.f_em - velocity_sign * resist) / mass
    if abs(fb.f_em) <= static_threshold:
        return 0.0
    direction = _sign(fb.f_em)
    return direction * max(abs(fb.f_em) - resist, 0.0) / mass


def closed_form(v0: float, a: float, t: float) -> tuple[float, float]:
    """Constant-acceleration kinematics: (v0 + a t, v0 t + a t^2 / 2)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return v0 + a * t, v0 * t + 0.5 * a * t * t


def constant_force(f_em: float, f_f: float = 0.0, c_b: float = 0.0) -> ForceModel:
    """Force model with fixed drive and friction and drag c_b*|v|."""

    def force(state: MoverState) -> ForceBalance:
        return ForceBalance(f_em, f_f, c_b * abs(state.velocity))

    return force


def _checked_acceleration(
    state: MoverState, force: ForceModel, static_threshold: float, tick: int | None, t: float
) -> tuple[float, ForceBalance]:
    try:
        fb = force(state)
    except ValueError as exc:
        raise IntegrationError(f"bad force sample at tick {tick} (t={t!r}): {exc}", tick, t) from exc
    return net_acceleration(fb, state.mass, _sign(state.velocity), static_threshold), fb


def step(
    state: MoverState,
    force: ForceModel,
    dt: float,
    *,
    static_threshold: float = 0.0,
    tick: int | None = None,
    t: float = 0.0,
) -> MoverState:
    """One semi-implicit Euler step: velocity first, then position with the new velocity.

    Resistance alone never reverses the direction of travel; a mover that
    would overshoot zero speed under friction/drag stops at zero instead.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    a, fb = _checked_acceleration(state, force, static_threshold, tick, t)
    v = state.velocity
    v_new = v + a * dt
    if v != 0.0 and v_new * v < 0.0 and fb.f_em * v >= 0.0:
        v_new = 0.0
    return replace(state, velocity=v_new, position=state.position + v_new * dt)


@dataclass
class Trajectory:
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray

    def __len__(self) -> int:
        return len(self.t)


def step_count(t_end: float, dt: float) -> tuple[int, float]:
    """Number of whole steps in [0, t_end] and the leftover tail length.

    Ratios within 1e-9 of an integer count as whole, so 3.0/1e-3 gives
    3000 steps rather than 2999 plus a sliver.
    """
    ratio = t_end / dt
    n = round(ratio)
    if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
        return n, 0.0
    n = math.floor(ratio)
    return n, t_end - n * dt


def simulate(
    state: MoverState,
    force: ForceModel,
    t_end: float,
    dt: float,
    *,
    static_threshold: float = 0.0,
) -> Trajectory:
    """Integrate from t=0 to t_end, sampling every dt plus a truncated final step."""
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if not dt > 0:
        raise ValueError("dt must be positive")
    n, tail = step_count(t_end, dt)
    steps = [dt] * n + ([tail] if tail > 0 else [])
    ts = [0.0]
    xs = [state.position]
    vs = [state.velocity]
    accs = []
    t = 0.0
    for k, h in enumerate(steps):
        a, _ = _checked_acceleration(state, force, static_threshold, k, t)
        accs.append(a)
        state = step(state, force, h, static_threshold=static_threshold, tick=k, t=t)
        if not (math.isfinite(state.position) and math.isfinite(state.velocity)):
            raise IntegrationError(f"non-finite state at tick {k} (t={t!r})", k, t)
        t = t_end if k == len(steps) - 1 else (k + 1) * dt
        ts.append(t)
        xs.append(state.position)
        vs.append(state.velocity)
    a_last, _ = _checked_acceleration(state, force, static_threshold, len(steps), t)
    accs.append(a_last)
    return Trajectory(np.array(ts), np.array(xs), np.array(vs), np.array(accs))
