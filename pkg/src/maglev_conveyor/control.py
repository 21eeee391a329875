"""Levitation gap control, rest-to-rest motion planning and LSM traction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emfield import CONSTANTS, GapActuatorSpec, levitation_current_for_load


class SingularDemandError(ValueError):
    """Raised when no q-axis current can produce the requested force."""


# --- PID --------------------------------------------------------------------


@dataclass(frozen=True)
class PIDGains:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    output_min: float = -math.inf
    output_max: float = math.inf
    integral_limit: float = math.inf

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be non-negative")
        if not self.output_min < self.output_max:
            raise ValueError("output_min must be below output_max")
        if self.integral_limit < 0:
            raise ValueError("integral_limit must be non-negative")


@dataclass(frozen=True)
class PIDState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def pid_step(gains: PIDGains, state: PIDState, error: float, dt: float) -> tuple[float, PIDState]:
    """One PID update on ``error = setpoint - measured``.

    The integral accumulates error*dt (including this sample) and is clamped
    to +/- integral_limit. The derivative term is zero on the first call.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    lim = gains.integral_limit
    integral = min(max(state.integral + error * dt, -lim), lim)
    derivative = (error - state.prev_error) / dt if state.initialized else 0.0
    out = gains.kp * error + gains.ki * integral + gains.kd * derivative
    out = min(max(out, gains.output_min), gains.output_max)
    return out, PIDState(integral, error, True)


# --- motion profiles --------------------------------------------------------


@dataclass(frozen=True)
class MotionProfile:
    """Piecewise-constant-acceleration rest-to-rest plan.

    ``phases`` is a tuple of (duration, acceleration). ``knots`` caches the
    (start time, position, velocity) at the start of every phase.
    """

    phases: tuple[tuple[float, float], ...]
    total_time: float
    total_distance: float
    v_limit: float
    a_limit: float
    knots: tuple[tuple[float, float, float], ...] = field(repr=False, default=())

    @property
    def peak_velocity(self) -> float:
        # velocity is piecewise linear and ends at rest, so the peak sits on a knot
        return max((v for _, _, v in self.knots), default=0.0)


def _build_profile(phases, distance, v_limit, a_limit) -> MotionProfile:
    knots = []
    t = x = v = 0.0
    for duration, acc in phases:
        knots.append((t, x, v))
        x += v * duration + 0.5 * acc * duration * duration
        v += acc * duration
        t += duration
    return MotionProfile(tuple(phases), t, distance, v_limit, a_limit, tuple(knots))


def plan_trapezoid(distance: float, v_limit: float, a_limit: float) -> MotionProfile:
    """Time-optimal rest-to-rest plan under speed and acceleration limits.

    Trapezoidal (accelerate, cruise, decelerate) when the distance allows
    reaching ``v_limit``; triangular with peak sqrt(distance*a_limit) otherwise.
    """
    if not (v_limit > 0 and a_limit > 0):
        raise ValueError("v_limit and a_limit must be positive")
    if distance < 0 or not math.isfinite(distance):
        raise ValueError("distance must be finite and non-negative")
    if distance == 0:
        return MotionProfile((), 0.0, 0.0, v_limit, a_limit, ())
    if distance >= v_limit * v_limit / a_limit:
        t_ramp = v_limit / a_limit
        cruise = (distance - v_limit * v_limit / a_limit) / v_limit
        phases = [(t_ramp, a_limit)]
        if cruise > 0:
            phases.append((cruise, 0.0))
        phases.append((t_ramp, -a_limit))
    else:
        t_ramp = math.sqrt(distance / a_limit)
        phases = [(t_ramp, a_limit), (t_ramp, -a_limit)]
    return _build_profile(phases, distance, v_limit, a_limit)


def profile_time(distance: float, v_limit: float, a_limit: float) -> float:
    """Duration of :func:`plan_trapezoid` without building the profile."""
    if distance <= 0:
        return 0.0
    if distance >= v_limit * v_limit / a_limit:
        return distance / v_limit + v_limit / a_limit
    return 2.0 * math.sqrt(distance / a_limit)


def profile_sample(p: MotionProfile, t: float) -> tuple[float, float, float]:
    """(position, velocity, acceleration) at time ``t`` from the start of the move."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t >= p.total_time:
        return p.total_distance, 0.0, 0.0
    for (t0, x0, v0), (duration, acc) in zip(reversed(p.knots), reversed(p.phases)):
        if t >= t0:
            tau = t - t0
            return x0 + v0 * tau + 0.5 * acc * tau * tau, v0 + acc * tau, acc
    raise AssertionError("unreachable")


# --- linear synchronous motor -----------------------------------------------


@dataclass(frozen=True)
class LSMState:
    psi_d: float
    psi_q: float
    i_d: float
    i_q: float
    tau: float

    def __post_init__(self):
        for name in ("psi_d", "psi_q", "i_d", "i_q", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.tau <= 0:
            raise ValueError("pole pitch tau must be positive")


def lsm_traction(s: LSMState) -> float:
    """Thrust of a long-stator synchronous linear motor in the d-q frame."""
    return 3.0 * math.pi / (2.0 * s.tau) * (s.psi_d * s.i_q - s.psi_q * s.i_d)


def iq_for_force(psi_d: float, tau: float, f_demand: float) -> float:
    """q-axis current giving ``f_demand`` with the d-axis current held at zero."""
    if psi_d == 0:
        raise SingularDemandError("psi_d is zero; thrust does not depend on i_q")
    if not tau > 0:
        raise ValueError("pole pitch tau must be positive")
    return f_demand * 2.0 * tau / (3.0 * math.pi * psi_d)


# --- levitation gap loop ----------------------------------------------------


@dataclass(frozen=True)
class LinearizedGapPlant:
    """Small-signal heave model of an attraction electromagnet about its set gap.

    With F = k I^2/g^2 carrying the weight at the setpoint, deviations obey
    m * gap'' = k_gap * dgap - k_current * dI, where k_gap = 2 m g_grav / g0
    (negative magnetic stiffness) and k_current = 2 m g_grav / I0.
    """

    mass: float
    turns: int
    pole_area: float
    gap_setpoint: float

    @property
    def actuator(self) -> GapActuatorSpec:
        return GapActuatorSpec(self.turns, self.pole_area, self.gap_setpoint, self.bias_current)

    @property
    def bias_current(self) -> float:
        return levitation_current_for_load(self.turns, self.pole_area, self.gap_setpoint, self.mass)

    @property
    def k_gap(self) -> float:
        return 2.0 * self.mass * CONSTANTS.g_grav / self.gap_setpoint

    @property
    def k_current(self) -> float:
        return 2.0 * self.mass * CONSTANTS.g_grav / self.bias_current


class GapLoop:
    """PID gap regulation on a :class:`LinearizedGapPlant`.

    The controller output is subtracted from the bias current, so a gap
    larger than the setpoint (negative error) raises the coil current.
    """

    def __init__(self, plant: LinearizedGapPlant, gains: PIDGains, gap: float | None = None):
        self.plant = plant
        self.gains = gains
        self.pid = PIDState()
        self.gap = plant.gap_setpoint if gap is None else gap
        self.rate = 0.0
        self.current = plant.bias_current
        self._i0 = plant.bias_current
        self._kg = plant.k_gap
        self._ki = plant.k_current

    def step(self, dt: float) -> tuple[float, float]:
        u, self.pid = pid_step(self.gains, self.pid, self.plant.gap_setpoint - self.gap, dt)
        self.current = self._i0 - u
        dg = self.gap - self.plant.gap_setpoint
        acc = (self._kg * dg - self._ki * (self.current - self._i0)) / self.plant.mass
        self.rate += acc * dt
        self.gap += self.rate * dt
        return self.gap, self.current


def run_gap_loop(
    plant: LinearizedGapPlant, gains: PIDGains, gap0: float, t_end: float, dt: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate the closed gap loop from rest at ``gap0``; returns (t, gap, current)."""
    loop = GapLoop(plant, gains, gap0)
    n = int(round(t_end / dt))
    ts = np.arange(n + 1) * dt
    gaps = np.empty(n + 1)
    currents = np.empty(n + 1)
    gaps[0], currents[0] = gap0, plant.bias_current
    for k in range(1, n + 1):
        gaps[k], currents[k] = loop.step(dt)
    return ts, gaps, currents
