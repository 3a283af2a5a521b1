"""Leading-order geometric optics for gauge-phase interferometry.

A beam is a window-limited plane wave anchored at a point; its observable
content, to leading order in 1/k, is the gauge phase accumulated along its
ray.  Two beams meeting at a point interfere with contrast

    intensity = 4 sin^2(alpha / 2),

where alpha is the phase around the closed circuit formed by the two beam
paths and the straight segment joining their anchors.  Higher-order transport
amplitudes are not computed; accuracy of the interference law is O(1/k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError
from .gauge import PhysicalConstants, RayTail, VectorPotential, line_integral
from .geometry import (
    BrokenRay,
    Loop,
    Ray,
    Scene,
    Segment,
    as_vec,
    cross2,
    ray_hit,
    trace_broken_ray,
)

__all__ = [
    "CutoffProfile",
    "standard_cutoff",
    "BeamSpec",
    "GOPrediction",
    "straight_ray_phase",
    "broken_ray_phase",
    "matched_wavenumber",
    "interference_intensity",
    "predict_two_beam",
]


class CutoffProfile:
    """Smooth even window: 1 on |t| < 1/2, 0 on |t| > 1, monotone between.

    Built from the standard bump-function smoothstep, so it is C-infinity;
    accepts scalars or numpy arrays.
    """

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        s = 2.0 * t - 1.0  # rolloff coordinate: 0 at |t|=1/2, 1 at |t|=1
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            fs = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
            f1 = np.where(1 - s > 0, np.exp(-1.0 / np.maximum(1 - s, 1e-300)), 0.0)
            out = 1.0 - fs / (fs + f1)
        out = np.where(s <= 0.0, 1.0, out)
        out = np.where(s >= 1.0, 0.0, out)
        if out.ndim == 0:
            return float(out)
        return out


def standard_cutoff() -> CutoffProfile:
    return CutoffProfile()


@dataclass(frozen=True)
class BeamSpec:
    """A window-limited plane-wave beam.

    ``wavenumber`` is the group-speed parameter k; the carrier wavevector is
    (mass * k / hbar) * direction, so with natural units the packet moves at
    speed k and oscillates with wavelength 2 pi hbar / (m k).
    """

    anchor: np.ndarray
    direction: np.ndarray
    transverse_width: float
    longitudinal_width: float
    wavenumber: float
    cutoff: CutoffProfile = field(default_factory=standard_cutoff)

    def __post_init__(self):
        object.__setattr__(self, "anchor", as_vec(self.anchor))
        d = as_vec(self.direction)
        n = float(np.linalg.norm(d))
        if abs(n - 1.0) > 1e-12:
            raise ValueError("beam direction must be a unit vector")
        object.__setattr__(self, "direction", d)
        if min(self.transverse_width, self.longitudinal_width, self.wavenumber) <= 0:
            raise ValueError("widths and wavenumber must be positive")

    @property
    def perpendicular(self) -> np.ndarray:
        return np.array([-self.direction[1], self.direction[0]])


@dataclass(frozen=True)
class GOPrediction:
    """Two-beam interference prediction.

    alpha = phase_1 - phase_2 + closing_correction is the gauge phase of the
    closed circuit (beam 1 forward, beam 2 reversed, anchors joined), and the
    unit-amplitude contrast is exactly 4 sin^2(alpha / 2).
    """

    phase_1: float
    phase_2: float
    closing_correction: float
    winding: np.ndarray
    meeting_point: np.ndarray

    @property
    def alpha(self) -> float:
        return self.phase_1 - self.phase_2 + self.closing_correction

    @property
    def intensity(self) -> float:
        return interference_intensity(self.alpha)

    def to_dict(self) -> dict:
        return {
            "I1": self.phase_1,
            "I2": self.phase_2,
            "I3": self.closing_correction,
            "alpha": self.alpha,
            "intensity": self.intensity,
            "winding": [int(n) for n in self.winding],
            "meeting_point": [float(v) for v in self.meeting_point],
        }


def straight_ray_phase(
    potential: VectorPotential, x, direction, rel_tol: float = 1e-8
) -> float:
    """Phase accumulated along the semi-infinite ray arriving at x from
    direction ``direction``: (e/hbar c) * integral_0^inf w . A(x - s w) ds.

    The ray {x - s w : s >= 0} must avoid all obstacles; otherwise the beam
    reflects and broken_ray_phase applies instead.
    """
    x, w = as_vec(x), as_vec(direction)
    tail = RayTail(end=x, direction=w)
    for k, o in enumerate(potential.obstacles):
        if tail.min_distance_to(o.center) < o.radius - 1e-12:
            raise GeometryError(
                f"straight ray intersects obstacle {k}; use broken_ray_phase"
            )
    return line_integral(potential, [tail], rel_tol)


def broken_ray_phase(
    potential: VectorPotential, broken_ray: BrokenRay, rel_tol: float = 1e-8
) -> float:
    """Phase accumulated along all legs of a broken ray (finite polyline)."""
    segs = [Segment(leg.start, leg.end) for leg in broken_ray.legs if leg.length > 0]
    if not segs:
        return 0.0
    return line_integral(potential, segs, rel_tol)


def matched_wavenumber(
    x0, omega, theta, n: int, constants: PhysicalConstants = PhysicalConstants()
) -> float:
    """Wavenumber k_n with (m k_n / hbar) x0 . (omega - theta) = 2 pi n.

    At a matched wavenumber the carrier phase difference of the two beams
    vanishes (mod 2 pi) at x0, so the interference there is set purely by the
    gauge phase.
    """
    x0 = as_vec(x0)
    denom = float(np.dot(x0, as_vec(omega) - as_vec(theta)))
    if abs(denom) < 1e-14:
        raise GeometryError("x0 . (omega - theta) = 0: every wavenumber is matched")
    return 2 * math.pi * n * constants.hbar / (constants.mass * denom)


def interference_intensity(alpha: float) -> float:
    """Two-beam contrast 4 sin^2(alpha/2); 2 pi periodic, range [0, 4]."""
    return 4.0 * math.sin(0.5 * alpha) ** 2


def _ray_line_meeting(leg_start, leg_dir, leg_len, ray: Ray):
    """Intersection of a finite leg with a ray: returns (s_on_leg, t_on_ray)."""
    denom = cross2(leg_dir, ray.direction)
    if abs(denom) < 1e-14:
        return None
    rel = ray.origin - leg_start
    s = cross2(rel, ray.direction) / denom
    t = cross2(rel, leg_dir) / denom
    if -1e-12 <= s <= leg_len + 1e-12 and t > 1e-9:
        return float(s), float(t)
    return None


def predict_two_beam(
    scene: Scene,
    potential: VectorPotential,
    beam1: BeamSpec,
    beam2: BeamSpec,
    rel_tol: float = 1e-8,
    max_reflections: int = 8,
) -> GOPrediction:
    """Predict the interference of beam 1 (straight or broken) with straight
    beam 2 where they meet.

    Beam 1 is traced through the scene (reflecting specularly if it hits
    obstacles); beam 2 must run straight to the meeting point.  The returned
    alpha is the exact circuit phase I1 - I2 + I3 and therefore matches
    sum_j n_j alpha_j for the reported winding vector n.
    """
    if abs(beam1.wavenumber - beam2.wavenumber) > 1e-9 * beam1.wavenumber:
        raise GeometryError("beam wavenumbers must be equal (use matched_wavenumber)")
    if ray_hit(Ray(beam2.anchor, beam2.direction), scene) is not None:
        raise GeometryError("beam 2 must reach the meeting region unobstructed")

    path1 = trace_broken_ray(beam1.anchor, beam1.direction, scene, max_reflections)
    ray2 = Ray(beam2.anchor, beam2.direction)

    meeting = None  # (t_on_ray2, leg_index, s_on_leg)
    for idx, leg in enumerate(path1.legs):
        found = _ray_line_meeting(leg.start, leg.direction, leg.length, ray2)
        if found is not None:
            s, t = found
            if meeting is None or t < meeting[0]:
                meeting = (t, idx, s)
    if meeting is None:
        raise GeometryError("beams fail to meet inside the outer bound")
    t2, leg_idx, s1 = meeting
    m_point = ray2.point(t2)

    segs1 = [Segment(leg.start, leg.end) for leg in path1.legs[:leg_idx]]
    last = path1.legs[leg_idx]
    if s1 > 1e-12:
        # end the partial leg exactly at the meeting point so the circuit closes
        segs1.append(Segment(last.start, m_point))
    if not segs1:
        raise GeometryError("beam 1 meets beam 2 at its own anchor")
    seg2 = Segment(beam2.anchor, m_point)
    closing = Segment(beam2.anchor, beam1.anchor)

    phase_1 = line_integral(potential, segs1, rel_tol)
    phase_2 = line_integral(potential, [seg2], rel_tol)
    phase_3 = line_integral(potential, [closing], rel_tol)

    circuit = Loop(tuple(segs1) + (Segment(m_point, beam2.anchor), closing))
    try:
        from .geometry import winding_numbers

        winding = winding_numbers(circuit, scene)
    except Exception as exc:
        raise GeometryError(f"enclosed circuit crosses an obstacle: {exc}") from exc

    return GOPrediction(
        phase_1=phase_1,
        phase_2=phase_2,
        closing_correction=phase_3,
        winding=winding,
        meeting_point=m_point,
    )
