"""Electromagnetic field and force laws for the conveyor actuators.

All quantities are SI. Functions are pure; spec objects are frozen
dataclasses that validate their own invariants on construction.

Geometry conventions for the serpentine trace pair:
    traces run parallel to the y axis at x = -dx0 and x = +dx0 in the z = 0
    plane; a magnet levitates at height d (z = d). Each trace current is
    signed so that a positive value on both traces gives a z-field of
    mu0*I/(2*pi) * [(x - dx0)/r1^2 + (x + dx0)/r2^2], which is the pairing
    the x-force law in :func:`trace_force_x` is written for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

MU0 = 4e-7 * math.pi  # H/m
G_GRAV = 9.81  # m/s^2


@dataclass(frozen=True)
class PhysicalConstants:
    mu0: float = MU0
    g_grav: float = G_GRAV

    def __post_init__(self):
        if not (self.mu0 > 0 and self.g_grav > 0):
            raise ValueError("physical constants must be positive")


CONSTANTS = PhysicalConstants()


class FieldSingularityError(ValueError):
    """Raised when a field point sits on a line current."""


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z


ZERO = Vec3(0.0, 0.0, 0.0)


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MagnetSpec:
    """Permanent magnet: remanence B_r [T], volume [m^3], density [kg/m^3]."""

    remanence: float
    volume: float
    density: float = 7500.0
    mass: float = field(init=False)

    def __post_init__(self):
        _require_finite(remanence=self.remanence, volume=self.volume, density=self.density)
        if self.remanence < 0 or self.volume < 0:
            raise ValueError("remanence and volume must be non-negative")
        if self.density <= 0:
            raise ValueError("density must be positive")
        object.__setattr__(self, "mass", self.density * self.volume)


@dataclass(frozen=True)
class CoilSpec:
    current: float
    turns: int
    radius: float

    def __post_init__(self):
        _require_finite(current=self.current, radius=self.radius)
        if int(self.turns) != self.turns or self.turns < 1:
            raise ValueError("turns must be a positive integer")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class TraceGeometry:
    """Serpentine trace pair: half spacing dx0 [m], magnet height d [m], current [A]."""

    dx0: float
    height: float
    current: float

    def __post_init__(self):
        _require_finite(dx0=self.dx0, height=self.height, current=self.current)
        if self.dx0 <= 0 or self.height <= 0:
            raise ValueError("dx0 and height must be positive")

    @property
    def length_scale(self) -> float:
        return min(self.dx0, self.height)


@dataclass(frozen=True)
class GapActuatorSpec:
    """Parallel-plate electromagnet: turns, pole area [m^2], air gap [m], current [A]."""

    turns: int
    pole_area: float
    gap: float
    current: float = 0.0

    def __post_init__(self):
        _require_finite(pole_area=self.pole_area, gap=self.gap, current=self.current)
        if int(self.turns) != self.turns or self.turns < 1:
            raise ValueError("turns must be a positive integer")
        if self.pole_area <= 0:
            raise ValueError("pole_area must be positive")
        if self.gap <= 0:
            raise ValueError("gap must be positive")

    @property
    def force_constant(self) -> float:
        """mu0*N^2*A/2, so that force = force_constant * I^2 / g^2."""
        return CONSTANTS.mu0 * self.turns**2 * self.pole_area / 2.0


def coil_field(spec: CoilSpec) -> float:
    """Field magnitude of a single energized coil, mu0*I*N/(2R), in tesla.

    This is the coil-centre value; there is no axial falloff term.
    """
    return CONSTANTS.mu0 * spec.current * spec.turns / (2.0 * spec.radius)


def magnet_moment(spec: MagnetSpec) -> Vec3:
    """Magnetic moment of a vertically magnetised magnet, A*m^2."""
    return Vec3(0.0, 0.0, spec.remanence * spec.volume / CONSTANTS.mu0)


def dipole_force(
    moment: Vec3,
    field_at: Callable[[Vec3], Vec3],
    at: Vec3,
    h: float | None = None,
    length_scale: float = 1.0,
) -> Vec3:
    """Force grad(m . B) on a fixed dipole, by central differences.

    ``h`` defaults to 1e-6 * ``length_scale``.
    """
    if h is None:
        h = 1e-6 * length_scale
    if not (h > 0 and math.isfinite(h)):
        raise ValueError("step h must be positive and finite")
    at = Vec3(*at)
    grad = []
    for axis, name in enumerate("xyz"):
        lo = list(at)
        hi = list(at)
        lo[axis] -= h
        hi[axis] += h
        b_lo = Vec3(*field_at(Vec3(*lo)))
        b_hi = Vec3(*field_at(Vec3(*hi)))
        if not all(math.isfinite(c) for c in (*b_lo, *b_hi)):
            raise ValueError(f"non-finite field sample along the {name} axis")
        grad.append((moment.dot(b_hi) - moment.dot(b_lo)) / (2.0 * h))
    return Vec3(*grad)


def trace_field(
    geom: TraceGeometry,
    at: Vec3,
    currents: tuple[float, float] | None = None,
) -> Vec3:
    """Superposed field of the two nearest traces at point ``at``.

    ``currents`` overrides the per-trace signed currents (trace at -dx0,
    trace at +dx0); by default both carry ``geom.current``.
    """
    x, _, z = at
    if currents is None:
        currents = (geom.current, geom.current)
    bx = bz = 0.0
    for x_trace, current in ((-geom.dx0, currents[0]), (geom.dx0, currents[1])):
        rx = x - x_trace
        r2 = rx * rx + z * z
        if r2 == 0.0:
            raise FieldSingularityError(f"point lies on the trace at x={x_trace}")
        scale = CONSTANTS.mu0 * current / (2.0 * math.pi * r2)
        bx -= scale * z
        bz += scale * rx
    return Vec3(bx, 0.0, bz)


def _bracket(x, dx0: float, d: float):
    a = x - dx0
    b = x + dx0
    return a / (a * a + d * d) + b / (b * b + d * d)


def _bracket_derivative(x, dx0: float, d: float):
    a = x - dx0
    b = x + dx0
    d2 = d * d
    return (d2 - a * a) / (a * a + d2) ** 2 + (d2 - b * b) / (b * b + d2) ** 2


def _trace_prefactor(geom: TraceGeometry, magnet: MagnetSpec) -> float:
    return magnet.remanence * magnet.volume * geom.current / (2.0 * math.pi)


def trace_force_x(geom: TraceGeometry, magnet: MagnetSpec, x: float) -> float:
    """Propulsive x-force on a magnet over the trace pair, analytic derivative."""
    return _trace_prefactor(geom, magnet) * _bracket_derivative(x, geom.dx0, geom.height)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def transition_work(
    geom: TraceGeometry, magnet: MagnetSpec, x_start: float, x_end: float
) -> float:
    """Work of the trace x-force over [x_start, x_end], composite 8-point Gauss-Legendre.

    The panel count depends only on the geometry and interval, never on
    the force magnitude, so the result is exactly linear in the prefactor.
    """
    span = x_end - x_start
    panels = int(min(max(math.ceil(8.0 * span / geom.length_scale), 16), 200_000))
    edges = np.linspace(x_start, x_end, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    xs = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = _bracket_derivative(xs, geom.dx0, geom.height)
    integral = float(np.sum((vals @ _GL_WEIGHTS) * half))
    return _trace_prefactor(geom, magnet) * integral


def max_transition_velocity(
    geom: TraceGeometry, magnet: MagnetSpec, x_start: float, x_end: float
) -> float:
    """Speed reached by a magnet released at rest at x_start when it reaches x_end."""
    if not x_start < x_end:
        raise ValueError("x_start must be less than x_end")
    if magnet.mass <= 0:
        raise ValueError("magnet mass must be positive")
    work = transition_work(geom, magnet, x_start, x_end)
    if work < 0:
        raise ValueError(f"net work {work:.6g} J is negative; the magnet decelerates")
    return math.sqrt(2.0 * work / magnet.mass)


def lorentz_force(q: float, v: float, B: float, theta: float) -> float:
    return q * v * B * math.sin(theta)


def magnetic_energy_density(B: float) -> float:
    """B^2/(2 mu0), J/m^3."""
    return B * B / (2.0 * CONSTANTS.mu0)


def gap_inductance(spec: GapActuatorSpec, gap: float | None = None) -> float:
    """Magnetic-circuit inductance mu0*N^2*A/g (core reluctance and fringing neglected)."""
    g = spec.gap if gap is None else gap
    return CONSTANTS.mu0 * spec.turns**2 * spec.pole_area / g


def gap_energy(spec: GapActuatorSpec, gap: float | None = None) -> float:
    """Stored energy W = L(g) I^2 / 2."""
    return 0.5 * gap_inductance(spec, gap) * spec.current**2


def gap_force(spec: GapActuatorSpec) -> float:
    """Attraction magnitude mu0*N^2*A*I^2/(2 g^2), acting to close the gap."""
    return spec.force_constant * spec.current**2 / spec.gap**2


def levitation_current_for_load(
    turns: int, pole_area: float, gap: float, load_mass: float
) -> float:
    """Coil current whose gap force exactly carries ``load_mass`` at ``gap``."""
    if load_mass < 0:
        raise ValueError("load_mass must be non-negative")
    spec = GapActuatorSpec(turns=turns, pole_area=pole_area, gap=gap)
    return gap * math.sqrt(load_mass * CONSTANTS.g_grav / spec.force_constant)
