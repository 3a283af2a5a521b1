"""Curl-free multi-solenoid vector potentials and gauge-phase integrals.

The package realizes a prescribed set of per-obstacle fluxes alpha_j (radians)
with the standard multi-solenoid potential

    A(x) = (hbar c / e) * sum_j alpha_j / (2 pi) * (-(y - y_j), x - x_j) / |x - x_j|^2,

which is smooth and curl-free away from the solenoid centers, decays like 1/r,
and has loop integral (e / hbar c) * integral A . dx = sum_j n_j alpha_j for a
loop winding n_j times around center j.

All "flux" and "phase" outputs are the dimensionless quantity
(e / hbar c) * integral A . dx, i.e. radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ConvergenceError, DomainError
from .geometry import Arc, Disk, Loop, Scene, Segment, as_vec, cross2, signed_angle

__all__ = [
    "PhysicalConstants",
    "Solenoid",
    "GaugeTerm",
    "VectorPotential",
    "RayTail",
    "ab_potential",
    "line_integral",
    "loop_flux",
    "gauge_transform",
    "curl_at",
    "SpacetimePotential",
    "SpacetimeLoop",
    "electromagnetic_flux",
    "StationaryMetric",
    "gravitational_flux",
]

SUBDIVISION_CAP = 2**16  # max quadrature subintervals per path element


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, particle mass, charge and light speed; natural units by default."""

    hbar: float = 1.0
    mass: float = 1.0
    charge: float = 1.0
    light_speed: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "charge", "light_speed"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def coupling(self) -> float:
        """e / (hbar c): converts a magnetic line integral to a phase."""
        return self.charge / (self.hbar * self.light_speed)

    @property
    def electric_coupling(self) -> float:
        """e / hbar: converts integral V dt to a phase."""
        return self.charge / self.hbar


@dataclass(frozen=True)
class Solenoid:
    center: np.ndarray
    flux: float  # dimensionless, radians

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec(self.center))


@dataclass(frozen=True)
class GaugeTerm:
    """A single-valued gauge function and its (caller-consistent) gradient."""

    phase: Callable[[np.ndarray], float]
    grad_phase: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RayTail:
    """Semi-infinite straight path running from end - inf*direction up to end.

    The gauge phase over it is the integral of direction . A(end - s*direction)
    over s in [0, inf); the 1/r decay of the solenoid field makes it finite.
    """

    end: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "end", as_vec(self.end))
        d = as_vec(self.direction)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-12:
            raise ValueError("ray direction must be unit length")
        object.__setattr__(self, "direction", d)

    def min_distance_to(self, c) -> float:
        rel = as_vec(c) - self.end
        # ray points are end - s*direction, s >= 0
        s = -float(np.dot(rel, self.direction))
        s = max(s, 0.0)
        return float(np.linalg.norm(rel + s * self.direction))


class VectorPotential:
    """Evaluatable curl-free potential: solenoid part plus optional gauge terms."""

    def __init__(
        self,
        solenoids: Sequence[Solenoid],
        constants: PhysicalConstants = PhysicalConstants(),
        obstacles: Sequence[Disk] = (),
        gauge_terms: Sequence[GaugeTerm] = (),
    ):
        self.solenoids = tuple(solenoids)
        self.constants = constants
        self.obstacles = tuple(obstacles)
        self.gauge_terms = tuple(gauge_terms)

    @property
    def metadata(self) -> list[tuple[np.ndarray, float]]:
        return [(s.center, s.flux) for s in self.solenoids]

    def reduced(self, p) -> np.ndarray:
        """(e / hbar c) * A at a point; no domain check."""
        p = as_vec(p)
        out = np.zeros(2)
        for s in self.solenoids:
            rel = p - s.center
            r2 = float(np.dot(rel, rel))
            if r2 < 1e-300:
                raise DomainError("potential evaluated at a solenoid center")
            out += (s.flux / (2 * math.pi * r2)) * np.array([-rel[1], rel[0]])
        for g in self.gauge_terms:
            out += as_vec(g.grad_phase(p))
        return out

    def evaluate(self, p) -> np.ndarray:
        """A at a point outside all obstacles (the field is shielded inside)."""
        p = as_vec(p)
        for k, o in enumerate(self.obstacles):
            if o.contains(p):
                raise DomainError(f"potential is not defined inside obstacle {k}")
        return self.reduced(p) / self.constants.coupling

    def edge_phase(self, a, b) -> float:
        """Exact (e / hbar c) * integral A . dx along the straight edge a -> b.

        The solenoid part integrates in closed form: each solenoid contributes
        flux/(2 pi) times the signed angle the edge subtends at its center.
        Gauge terms contribute phase(b) - phase(a) exactly.
        """
        a, b = as_vec(a), as_vec(b)
        total = 0.0
        for s in self.solenoids:
            total += s.flux / (2 * math.pi) * signed_angle(a - s.center, b - s.center)
        for g in self.gauge_terms:
            total += float(g.phase(b)) - float(g.phase(a))
        return total

    def edge_phases(self, a_pts: np.ndarray, b_pts: np.ndarray) -> np.ndarray:
        """Vectorized edge_phase for (N, 2) endpoint arrays."""
        a_pts = np.asarray(a_pts, float)
        b_pts = np.asarray(b_pts, float)
        total = np.zeros(len(a_pts))
        for s in self.solenoids:
            ra = a_pts - s.center
            rb = b_pts - s.center
            ang = np.arctan2(
                ra[:, 0] * rb[:, 1] - ra[:, 1] * rb[:, 0],
                ra[:, 0] * rb[:, 0] + ra[:, 1] * rb[:, 1],
            )
            total += s.flux / (2 * math.pi) * ang
        for g in self.gauge_terms:
            pa = np.array([float(g.phase(p)) for p in a_pts])
            pb = np.array([float(g.phase(p)) for p in b_pts])
            total += pb - pa
        return total

    def with_gauge_term(self, term: GaugeTerm) -> "VectorPotential":
        return VectorPotential(
            self.solenoids, self.constants, self.obstacles, self.gauge_terms + (term,)
        )

    def wrapped(self) -> "VectorPotential":
        """The gauge-class representative with every flux reduced to (-pi, pi].

        Physics on a lattice (and any interference observable) depends on the
        fluxes only mod 2 pi; the wrapped representative makes a 2 pi flux
        shift an exact no-op.
        """
        wrapped = tuple(
            Solenoid(s.center, s.flux - 2 * math.pi * math.ceil(s.flux / (2 * math.pi) - 0.5))
            for s in self.solenoids
        )
        return VectorPotential(wrapped, self.constants, self.obstacles, self.gauge_terms)


def ab_potential(scene: Scene, constants: PhysicalConstants = PhysicalConstants()) -> VectorPotential:
    """The multi-solenoid potential realizing the scene's per-obstacle fluxes."""
    sols = tuple(Solenoid(o.center, o.flux) for o in scene.obstacles)
    return VectorPotential(sols, constants, obstacles=scene.obstacles)


# ---------------------------------------------------------------------------
# Path quadrature
# ---------------------------------------------------------------------------


def _check_rel_tol(rel_tol: float) -> None:
    if not (1e-14 < rel_tol < 1e-2):
        raise ValueError("rel_tol must lie in (1e-14, 1e-2)")


def _quad_element(integrand, rel_tol: float, abs_tol: float) -> float:
    val, err, _info, *rest = quad(
        integrand, 0.0, 1.0, epsabs=abs_tol, epsrel=rel_tol,
        limit=SUBDIVISION_CAP, full_output=True,
    )
    # quad appends a message when it is unhappy; fail only if the reported
    # error estimate actually misses the requested tolerance
    if rest and err > max(abs_tol, rel_tol * abs(val)):
        raise ConvergenceError(
            f"quadrature did not converge: {rest[0]}", best_estimate=val, error_bound=err
        )
    return float(val)


def _integrate_field_over_elements(field, elements, rel_tol: float) -> float:
    """Integral of field(p) . dp over a chain of Segment/Arc elements."""
    n = max(len(elements), 1)
    abs_tol = 0.5 * rel_tol / n
    total = 0.0
    for e in elements:
        def integrand(t, e=e):
            return float(np.dot(field(e.point(t)), e.velocity(t)))

        total += _quad_element(integrand, 0.5 * rel_tol, abs_tol)
    return total


def _as_elements(path) -> list:
    if isinstance(path, Loop):
        return list(path.elements)
    if isinstance(path, (Segment, Arc, RayTail)):
        return [path]
    return list(path)


def _tail_truncation(potential: VectorPotential, tail: RayTail, tol: float) -> float:
    """Truncation length R with solenoid tail contribution provably <= tol.

    Along the tail, each solenoid's tangential component is
    flux/(2 pi) * b_perp / r(s)^2 with constant impact parameter b_perp and
    r(s) >= s - p_j, so the remainder beyond R is bounded by
    sum_j |flux_j| |b_perp_j| / (2 pi (R - p_j)).
    """
    budget = 0.0
    p_max = 0.0
    for s in potential.solenoids:
        rel = tail.end - s.center
        b_perp = abs(cross2(rel, tail.direction))
        p_j = float(np.dot(rel, tail.direction))
        budget += abs(s.flux) * b_perp / (2 * math.pi)
        p_max = max(p_max, p_j)
    if budget == 0.0:
        return max(p_max, 1.0) + 1.0
    return p_max + budget / tol


def line_integral(potential: VectorPotential, path, rel_tol: float = 1e-8) -> float:
    """Dimensionless gauge phase (e / hbar c) * integral A . dx along a path.

    ``path`` may be a Loop, a single element, or a sequence of Segment / Arc /
    RayTail elements.  Semi-infinite tails are truncated where the analytic
    1/r tail bound guarantees the remainder is below tolerance.  Raises
    DomainError if the path touches an obstacle and ConvergenceError (carrying
    the best estimate) if the subdivision cap is hit.
    """
    _check_rel_tol(rel_tol)
    elements = _as_elements(path)
    for e in elements:
        for k, o in enumerate(potential.obstacles):
            if e.min_distance_to(o.center) < o.radius - 1e-9:
                raise DomainError(f"path enters obstacle {k}")
    resolved: list = []
    for e in elements:
        if isinstance(e, RayTail):
            # split the truncated tail on a geometric grid so each piece sees
            # an integrand varying by a bounded factor (the field decays ~1/r
            # and the truncation radius can be huge at tight tolerances)
            r_trunc = _tail_truncation(potential, e, 0.25 * rel_tol)
            near = max(
                [1.0]
                + [2.0 * float(np.linalg.norm(e.end - s.center)) for s in potential.solenoids]
            )
            cuts = [0.0, min(near, r_trunc)]
            while cuts[-1] < r_trunc:
                cuts.append(min(2.0 * cuts[-1], r_trunc))
            for s0, s1 in zip(cuts[:-1], cuts[1:]):
                resolved.append(
                    Segment(e.end - s1 * e.direction, e.end - s0 * e.direction)
                )
        else:
            resolved.append(e)
    return _integrate_field_over_elements(potential.reduced, resolved, 0.5 * rel_tol)


def loop_flux(potential: VectorPotential, loop: Loop, rel_tol: float = 1e-8) -> float:
    """Gauge phase around a closed loop; equals sum_j n_j alpha_j for winding n."""
    return line_integral(potential, loop, rel_tol)


def gauge_transform(
    potential: VectorPotential,
    phase: Callable[[np.ndarray], float],
    grad_phase: Callable[[np.ndarray], np.ndarray],
) -> VectorPotential:
    """A' = A + (hbar c / e) grad phase; fluxes (loop integrals) are unchanged
    for any single-valued phase."""
    return potential.with_gauge_term(GaugeTerm(phase=phase, grad_phase=grad_phase))


def curl_at(potential, point, h: float = 1e-4) -> float:
    """Central-difference curl d1 A2 - d2 A1 at a point.

    Accepts a VectorPotential or any callable p -> 2-vector.  The h-neighborhood
    must stay outside all obstacles.
    """
    p = as_vec(point)
    if isinstance(potential, VectorPotential):
        for k, o in enumerate(potential.obstacles):
            if float(np.linalg.norm(p - o.center)) < o.radius + h:
                raise DomainError(f"finite-difference stencil clips obstacle {k}")
        f = potential.evaluate
    else:
        f = potential
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    d1_a2 = (f(p + ex)[1] - f(p - ex)[1]) / (2 * h)
    d2_a1 = (f(p + ey)[0] - f(p - ey)[0]) / (2 * h)
    return float(d1_a2 - d2_a1)


# ---------------------------------------------------------------------------
# Spacetime flux (combined electric and magnetic)
# ---------------------------------------------------------------------------


class SpacetimePotential:
    """Magnetic part A(x, t) -> 2-vector and electric part V(x, t) -> scalar."""

    def __init__(self, magnetic, electric, constants: PhysicalConstants = PhysicalConstants()):
        self.magnetic = magnetic
        self.electric = electric
        self.constants = constants

    @classmethod
    def from_static(
        cls, potential: VectorPotential, electric=None
    ) -> "SpacetimePotential":
        """Wrap a static VectorPotential (and optional V(x, t)) as a spacetime one."""

        def magnetic(p, t):
            return potential.evaluate(p)

        def zero(p, t):
            return 0.0

        return cls(magnetic, electric if electric is not None else zero, potential.constants)


@dataclass(frozen=True)
class SpacetimeLoop:
    """Closed path in (x, t), either a polygon of (x, y, t) vertices or a
    spatial Loop frozen at one time."""

    vertices: tuple[np.ndarray, ...] | None = None
    spatial: Loop | None = None
    time: float = 0.0

    @classmethod
    def from_vertices(cls, vertices) -> "SpacetimeLoop":
        verts = tuple(np.asarray(v, float) for v in vertices)
        if len(verts) < 3:
            raise ValueError("spacetime polygon needs at least 3 vertices")
        for v in verts:
            if v.shape != (3,):
                raise ValueError("vertices must be (x, y, t) triples")
        if np.linalg.norm(verts[0] - verts[-1]) > 1e-12:
            raise ValueError("spacetime loop must be closed (repeat the first vertex last)")
        return cls(vertices=verts)

    @classmethod
    def at_fixed_time(cls, loop: Loop, t: float) -> "SpacetimeLoop":
        return cls(spatial=loop, time=float(t))


def electromagnetic_flux(
    potential: SpacetimePotential, loop: SpacetimeLoop, rel_tol: float = 1e-8
) -> float:
    """(e/hbar) * closed integral of (1/c) A(x,t) . dx - V(x,t) dt over the loop.

    On a fixed-time loop this reduces, by the same quadrature path, to the
    magnetic loop phase.
    """
    _check_rel_tol(rel_tol)
    c = potential.constants
    if loop.spatial is not None:
        t0 = loop.time

        def field(p):
            return c.coupling * np.asarray(potential.magnetic(p, t0), float)

        return _integrate_field_over_elements(field, list(loop.spatial.elements), 0.5 * rel_tol)

    verts = loop.vertices
    n = len(verts) - 1
    abs_tol = 0.5 * rel_tol / n
    total = 0.0
    for v0, v1 in zip(verts[:-1], verts[1:]):
        dx = v1[:2] - v0[:2]
        dt = v1[2] - v0[2]

        def integrand(u, v0=v0, dx=dx, dt=dt):
            p = v0[:2] + u * dx
            t = v0[2] + u * dt
            a_part = float(np.dot(np.asarray(potential.magnetic(p, t), float), dx))
            v_part = float(potential.electric(p, t)) * dt
            return c.electric_coupling * (a_part / c.light_speed - v_part)

        total += _quad_element(integrand, 0.5 * rel_tol, abs_tol)
    return total


# ---------------------------------------------------------------------------
# Gravitational flux for stationary metrics
# ---------------------------------------------------------------------------


class StationaryMetric:
    """Time-independent metric data: g00(x) > 0 and the row g_{j0}(x)."""

    def __init__(self, g00, gj0):
        self.g00 = g00
        self.gj0 = gj0


def gravitational_flux(metric: StationaryMetric, loop: Loop, rel_tol: float = 1e-8) -> float:
    """Closed integral of (g_{j0}(x) / g00(x)) dx_j; an isometry invariant."""
    _check_rel_tol(rel_tol)

    def field(p):
        g00 = float(metric.g00(p))
        if g00 <= 0:
            raise DomainError("g00 must be positive on the loop")
        return np.asarray(metric.gj0(p), float) / g00

    return _integrate_field_over_elements(field, list(loop.elements), 0.5 * rel_tol)
