"""Planar scenes of disk obstacles and the ray machinery built on them.

Obstacles are open disks; rays reflect specularly off their boundaries and
escape through an axis-aligned outer bound.  Loops are closed chains of line
segments and circular arcs; their winding numbers around obstacle centers are
computed exactly (as integers) from accumulated signed angles.

All types are immutable after construction and all operations are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError, GrazingRayError, ReflectionBudgetError

__all__ = [
    "Disk",
    "Rect",
    "Scene",
    "Ray",
    "Hit",
    "Leg",
    "BrokenRay",
    "Segment",
    "Arc",
    "Loop",
    "ray_hit",
    "reflect",
    "trace_broken_ray",
    "winding_numbers",
    "circle_loop",
    "polyline_loop",
]

_UNIT_TOL = 1e-12


def as_vec(p) -> np.ndarray:
    v = np.asarray(p, dtype=float)
    if v.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {v.shape}")
    return v


def _unit(v) -> np.ndarray:
    v = as_vec(v)
    n = math.hypot(v[0], v[1])
    if abs(n - 1.0) > _UNIT_TOL:
        raise ValueError(f"direction must be unit length, |v| = {n!r}")
    return v


def cross2(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def signed_angle(a, b) -> float:
    """Signed angle from vector a to vector b, in (-pi, pi]."""
    return math.atan2(cross2(a, b), float(np.dot(a, b)))


@dataclass(frozen=True)
class Disk:
    """A disk obstacle, optionally carrying a hidden flux (radians)."""

    center: np.ndarray
    radius: float
    flux: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec(self.center))
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def contains(self, p, tol: float = 0.0) -> bool:
        return float(np.linalg.norm(as_vec(p) - self.center)) < self.radius - tol


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", as_vec(self.lo))
        object.__setattr__(self, "hi", as_vec(self.hi))
        if not np.all(self.hi > self.lo):
            raise ValueError("rectangle must have positive extent")

    def contains(self, p) -> bool:
        p = as_vec(p)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def exit_distance(self, origin, direction) -> float:
        """Distance along the ray at which it leaves the rectangle."""
        origin, direction = as_vec(origin), as_vec(direction)
        t = math.inf
        for ax in (0, 1):
            d = direction[ax]
            if d > _UNIT_TOL:
                t = min(t, (self.hi[ax] - origin[ax]) / d)
            elif d < -_UNIT_TOL:
                t = min(t, (self.lo[ax] - origin[ax]) / d)
        if not math.isfinite(t) or t < 0:
            raise GeometryError("ray origin outside outer bound")
        return t


@dataclass(frozen=True)
class Scene:
    """Disk obstacles inside an outer bound.

    Invariants: obstacle closures are pairwise disjoint and every obstacle lies
    strictly inside the bound.
    """

    obstacles: tuple[Disk, ...]
    bound: Rect

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        obs = self.obstacles
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                gap = float(np.linalg.norm(obs[i].center - obs[j].center))
                if gap <= obs[i].radius + obs[j].radius:
                    raise ValueError(f"obstacles {i} and {j} overlap or touch")
        for k, o in enumerate(obs):
            if not (
                np.all(o.center - o.radius > self.bound.lo)
                and np.all(o.center + o.radius < self.bound.hi)
            ):
                raise ValueError(f"obstacle {k} is not strictly inside the bound")

    @property
    def fluxes(self) -> np.ndarray:
        return np.array([o.flux for o in self.obstacles])

    def obstacle_containing(self, p, tol: float = 0.0):
        for k, o in enumerate(self.obstacles):
            if o.contains(p, tol=tol):
                return k
        return None

    def to_dict(self) -> dict:
        return {
            "obstacles": [
                {"center": list(map(float, o.center)), "radius": o.radius, "flux": o.flux}
                for o in self.obstacles
            ],
            "bound": {
                "min": list(map(float, self.bound.lo)),
                "max": list(map(float, self.bound.hi)),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        obstacles = tuple(
            Disk(np.asarray(o["center"], float), float(o["radius"]), float(o.get("flux", 0.0)))
            for o in d["obstacles"]
        )
        bound = Rect(np.asarray(d["bound"]["min"], float), np.asarray(d["bound"]["max"], float))
        return cls(obstacles, bound)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Scene":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec(self.origin))
        object.__setattr__(self, "direction", _unit(self.direction))

    def point(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Hit:
    point: np.ndarray
    distance: float
    outward_normal: np.ndarray
    obstacle_index: int


@dataclass(frozen=True)
class Leg:
    start: np.ndarray
    direction: np.ndarray
    length: float

    def __post_init__(self):
        object.__setattr__(self, "start", as_vec(self.start))
        object.__setattr__(self, "direction", _unit(self.direction))
        if self.length < 0:
            raise ValueError("leg length must be >= 0")

    @property
    def end(self) -> np.ndarray:
        return self.start + self.length * self.direction


@dataclass(frozen=True)
class BrokenRay:
    """A chain of straight legs joined at specular reflection points."""

    legs: tuple[Leg, ...]
    reflection_points: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))
        object.__setattr__(
            self, "reflection_points", tuple(as_vec(p) for p in self.reflection_points)
        )
        if not self.legs:
            raise ValueError("broken ray needs at least one leg")

    @property
    def total_length(self) -> float:
        return sum(leg.length for leg in self.legs)

    @property
    def start(self) -> np.ndarray:
        return self.legs[0].start

    @property
    def end(self) -> np.ndarray:
        return self.legs[-1].end

    def points(self) -> np.ndarray:
        """Vertices of the polyline (start, reflections..., end)."""
        pts = [self.legs[0].start]
        pts.extend(leg.end for leg in self.legs)
        return np.array(pts)

    def validate(self, scene: Scene | None = None, tol: float = 1e-10) -> None:
        """Check chaining, the specular law at each joint, and obstacle avoidance."""
        for a, b in zip(self.legs, self.legs[1:]):
            if np.linalg.norm(b.start - a.end) > tol * max(1.0, a.length):
                raise GeometryError("legs do not chain")
        if scene is not None:
            for k, p in enumerate(self.reflection_points):
                idx = None
                for j, o in enumerate(scene.obstacles):
                    if abs(np.linalg.norm(p - o.center) - o.radius) < 1e-8 * max(1.0, o.radius):
                        idx = j
                        break
                if idx is None:
                    raise GeometryError(f"reflection point {k} not on any obstacle boundary")
                n = (p - scene.obstacles[idx].center) / scene.obstacles[idx].radius
                d_in, d_out = self.legs[k].direction, self.legs[k + 1].direction
                # angle of incidence == angle of reflection, both measured from n
                if abs(float(np.dot(d_in, n)) + float(np.dot(d_out, n))) > tol:
                    raise GeometryError("specular law violated at a reflection point")
                if abs(cross2(d_in, n) - cross2(d_out, n)) > tol:
                    raise GeometryError("tangential component changed at a reflection point")
            for leg in self.legs:
                for o in scene.obstacles:
                    if _segment_disk_min_distance(leg.start, leg.end, o.center) < o.radius - 1e-9:
                        raise GeometryError("a leg interior crosses an obstacle")


def _segment_disk_min_distance(a, b, c) -> float:
    """Distance from point c to segment [a, b]."""
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0.0:
        return float(np.linalg.norm(c - a))
    t = float(np.dot(c - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(a + t * ab - c))


def ray_hit(ray: Ray, scene: Scene) -> Hit | None:
    """Nearest intersection of a ray with any obstacle boundary.

    Returns None if the ray leaves the outer bound before meeting an obstacle.
    """
    if scene.obstacle_containing(ray.origin, tol=1e-12) is not None:
        raise DomainError("ray origin lies inside an obstacle")
    best_t, best_idx = math.inf, -1
    for k, o in enumerate(scene.obstacles):
        oc = o.center - ray.origin
        b = float(np.dot(ray.direction, oc))
        disc = b * b - (float(np.dot(oc, oc)) - o.radius**2)
        if disc <= 0.0:
            continue
        sq = math.sqrt(disc)
        # nearest positive root; t = b - sq is the entry point
        t = b - sq
        if t <= 1e-12:
            t = b + sq
        if 1e-12 < t < best_t:
            best_t, best_idx = t, k
    if best_idx < 0:
        return None
    t_exit = scene.bound.exit_distance(ray.origin, ray.direction)
    if best_t >= t_exit:
        return None
    p = ray.point(best_t)
    o = scene.obstacles[best_idx]
    normal = (p - o.center) / float(np.linalg.norm(p - o.center))
    return Hit(point=p, distance=best_t, outward_normal=normal, obstacle_index=best_idx)


def reflect(direction, normal) -> np.ndarray:
    """Specular reflection of an incoming unit direction off a unit normal."""
    d, n = _unit(direction), _unit(normal)
    dn = float(np.dot(d, n))
    if abs(dn) < 1e-12:
        raise GrazingRayError("tangential incidence: reflection undefined")
    if dn > 0:
        raise ValueError("direction must point into the surface (d.n < 0)")
    out = d - 2.0 * dn * n
    return out / float(np.linalg.norm(out))


def trace_broken_ray(start, direction, scene: Scene, max_reflections: int) -> BrokenRay:
    """Trace a ray through the scene, reflecting specularly, until it escapes.

    The final leg is truncated at the outer bound.  Raises
    ReflectionBudgetError (carrying the partial ray) if the ray is still inside
    after max_reflections bounces.
    """
    if max_reflections < 0:
        raise ValueError("max_reflections must be >= 0")
    p, d = as_vec(start), _unit(direction)
    legs: list[Leg] = []
    reflections: list[np.ndarray] = []
    for _ in range(max_reflections + 1):
        hit = ray_hit(Ray(p, d), scene)
        if hit is None:
            legs.append(Leg(p, d, scene.bound.exit_distance(p, d)))
            return BrokenRay(tuple(legs), tuple(reflections))
        legs.append(Leg(p, d, hit.distance))
        reflections.append(hit.point)
        d = reflect(d, hit.outward_normal)
        p = hit.point
    raise ReflectionBudgetError(
        f"ray did not escape within {max_reflections} reflections",
        partial=BrokenRay(tuple(legs), tuple(reflections)),
    )


# ---------------------------------------------------------------------------
# Loops: closed chains of segments and arcs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_vec(self.a))
        object.__setattr__(self, "b", as_vec(self.b))

    @property
    def start(self) -> np.ndarray:
        return self.a

    @property
    def end(self) -> np.ndarray:
        return self.b

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    def point(self, t: float) -> np.ndarray:
        return self.a + t * (self.b - self.a)

    def velocity(self, t: float) -> np.ndarray:
        return self.b - self.a

    def min_distance_to(self, c) -> float:
        return _segment_disk_min_distance(self.a, self.b, as_vec(c))

    def swept_angle(self, c) -> float:
        # A straight segment not through c subtends strictly less than pi,
        # so the chordal signed angle is the exact swept angle.
        c = as_vec(c)
        return signed_angle(self.a - c, self.b - c)


@dataclass(frozen=True)
class Arc:
    """Circular arc from angle0 to angle1 (radians); the signed span
    angle1 - angle0 fixes the orientation and may exceed a full turn."""

    center: np.ndarray
    radius: float
    angle0: float
    angle1: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec(self.center))
        if not self.radius > 0:
            raise ValueError("arc radius must be positive")

    def _at(self, ang: float) -> np.ndarray:
        return self.center + self.radius * np.array([math.cos(ang), math.sin(ang)])

    @property
    def start(self) -> np.ndarray:
        return self._at(self.angle0)

    @property
    def end(self) -> np.ndarray:
        return self._at(self.angle1)

    @property
    def span(self) -> float:
        return self.angle1 - self.angle0

    @property
    def length(self) -> float:
        return abs(self.span) * self.radius

    def point(self, t: float) -> np.ndarray:
        return self._at(self.angle0 + t * self.span)

    def velocity(self, t: float) -> np.ndarray:
        ang = self.angle0 + t * self.span
        return self.radius * self.span * np.array([-math.sin(ang), math.cos(ang)])

    def _sub(self, t0: float, t1: float) -> "Arc":
        return Arc(
            self.center,
            self.radius,
            self.angle0 + t0 * self.span,
            self.angle0 + t1 * self.span,
        )

    def min_distance_to(self, c) -> float:
        c = as_vec(c)
        rel = c - self.center
        rho = float(np.linalg.norm(rel))
        if rho < 1e-300:
            return self.radius
        phi = math.atan2(rel[1], rel[0])
        # does the radial direction toward c fall inside the arc's span?
        lo, hi = sorted((self.angle0, self.angle1))
        k0 = math.ceil((lo - phi) / (2 * math.pi))
        k1 = math.floor((hi - phi) / (2 * math.pi))
        if k0 <= k1 or abs(self.span) >= 2 * math.pi:
            return abs(rho - self.radius)
        return min(
            float(np.linalg.norm(self.start - c)), float(np.linalg.norm(self.end - c))
        )

    def swept_angle(self, c) -> float:
        # Bisect until each piece's swept angle about c is provably < pi/2
        # (|swept| <= arc length / distance); then the chordal angle is exact.
        c = as_vec(c)
        total = 0.0
        stack = [(0.0, 1.0)]
        while stack:
            t0, t1 = stack.pop()
            piece = self._sub(t0, t1)
            d = piece.min_distance_to(c)
            if d <= 0:
                raise GeometryError("loop passes through a winding center")
            if piece.length <= 0.5 * math.pi * d:
                total += signed_angle(piece.start - c, piece.end - c)
            else:
                tm = 0.5 * (t0 + t1)
                stack.append((t0, tm))
                stack.append((tm, t1))
        return total


PathElement = Segment | Arc


@dataclass(frozen=True)
class Loop:
    """Closed piecewise path of segments and arcs, counterclockwise positive."""

    elements: tuple[PathElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if not self.elements:
            raise ValueError("loop needs at least one element")
        scale = max(1.0, max(e.length for e in self.elements))
        for a, b in zip(self.elements, self.elements[1:]):
            if np.linalg.norm(b.start - a.end) > 1e-12 * scale:
                raise GeometryError("loop elements do not chain")
        gap = np.linalg.norm(self.elements[0].start - self.elements[-1].end)
        if gap > 1e-12 * scale:
            raise GeometryError(f"loop is not closed (gap {gap:g})")

    def reversed(self) -> "Loop":
        rev: list[PathElement] = []
        for e in self.elements[::-1]:
            if isinstance(e, Segment):
                rev.append(Segment(e.b, e.a))
            else:
                rev.append(Arc(e.center, e.radius, e.angle1, e.angle0))
        return Loop(tuple(rev))

    def concatenated(self, other: "Loop") -> "Loop":
        """Join with another loop sharing this loop's base point (figure-eight
        style composition used by the winding additivity property)."""
        if np.linalg.norm(self.elements[0].start - other.elements[0].start) > 1e-9:
            raise GeometryError("loops must share a base point to concatenate")
        return Loop(self.elements + other.elements)

    def min_distance_to(self, c) -> float:
        return min(e.min_distance_to(c) for e in self.elements)

    def winding_number(self, c) -> int:
        total = sum(e.swept_angle(c) for e in self.elements)
        w = round(total / (2 * math.pi))
        if abs(total - 2 * math.pi * w) > 1e-6:
            raise GeometryError("accumulated angle is not a multiple of 2*pi")
        return int(w)


def winding_numbers(loop: Loop, scene: Scene) -> np.ndarray:
    """Winding number of the loop around each obstacle center (exact integers).

    The loop must not enter any obstacle (boundary contact is allowed).
    """
    for o in scene.obstacles:
        if loop.min_distance_to(o.center) < o.radius - 1e-9:
            raise DomainError("loop intersects an obstacle")
    return np.array([loop.winding_number(o.center) for o in scene.obstacles], dtype=int)


def circle_loop(center, radius: float, orientation: int = 1) -> Loop:
    """A full circle traversed counterclockwise (orientation=+1) or clockwise."""
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    return Loop((Arc(as_vec(center), radius, 0.0, orientation * 2 * math.pi),))


def polyline_loop(points) -> Loop:
    """Closed polygon through the given vertices."""
    pts = [as_vec(p) for p in points]
    if len(pts) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    segs = [Segment(a, b) for a, b in zip(pts, pts[1:] + pts[:1])]
    return Loop(tuple(segs))
