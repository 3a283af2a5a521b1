import math

import numpy as np
import pytest

from ablab.errors import DomainError, GeometryError, GrazingRayError, ReflectionBudgetError
from ablab.geometry import (
    Arc,
    Disk,
    Loop,
    Ray,
    Rect,
    Scene,
    Segment,
    circle_loop,
    polyline_loop,
    ray_hit,
    reflect,
    trace_broken_ray,
    winding_numbers,
)


def march_to_disk(origin, direction, center, radius, step=1e-6, t_max=10.0):
    """Brute-force oracle: march along the ray until entering the disk."""
    origin, direction, center = map(np.asarray, (origin, direction, center))
    t = 0.0
    while t < t_max:
        p = origin + t * direction
        if np.linalg.norm(p - center) < radius:
            return t
        t += step
    return None


class TestSceneInvariants:
    def test_overlapping_obstacles_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            Scene((Disk((0, 0), 1.0), Disk((1.5, 0), 1.0)), Rect((-5, -5), (5, 5)))

    def test_obstacle_must_be_inside_bound(self):
        with pytest.raises(ValueError, match="inside"):
            Scene((Disk((4.5, 0), 1.0),), Rect((-5, -5), (5, 5)))

    def test_json_round_trip(self, tmp_path, unit_disk_scene):
        path = tmp_path / "scene.json"
        unit_disk_scene.save(path)
        loaded = Scene.load(path)
        assert loaded.to_dict() == unit_disk_scene.to_dict()
        assert loaded.obstacles[0].flux == pytest.approx(math.pi)


class TestRayHit:
    def test_axis_aligned_hit(self, unit_disk_scene):
        hit = ray_hit(Ray((-3, 0), (1, 0)), unit_disk_scene)
        assert hit.distance == pytest.approx(2.0, abs=1e-12)
        assert hit.point == pytest.approx([-1.0, 0.0], abs=1e-12)
        assert hit.outward_normal == pytest.approx([-1.0, 0.0], abs=1e-12)
        assert hit.obstacle_index == 0

    def test_miss_escapes_bound(self, unit_disk_scene):
        assert ray_hit(Ray((-3, 2), (1, 0)), unit_disk_scene) is None

    def test_offset_hit_against_marching_oracle(self, unit_disk_scene):
        hit = ray_hit(Ray((-3, 0.5), (1, 0)), unit_disk_scene)
        expected = 3 - math.sqrt(0.75)
        assert hit.distance == pytest.approx(expected, abs=1e-12)
        assert hit.point == pytest.approx([-math.sqrt(0.75), 0.5], abs=1e-12)
        marched = march_to_disk((-3, 0.5), (1, 0), (0, 0), 1.0)
        assert hit.distance == pytest.approx(marched, abs=1e-5)

    def test_origin_inside_obstacle(self, unit_disk_scene):
        with pytest.raises(DomainError):
            ray_hit(Ray((0.2, 0.2), (1, 0)), unit_disk_scene)


class TestReflect:
    def test_normal_incidence(self):
        assert reflect((1, 0), (-1, 0)) == pytest.approx([-1.0, 0.0])

    def test_45_degree_mirror(self):
        s = math.sqrt(2) / 2
        assert reflect((1, 0), (-s, s)) == pytest.approx([0.0, 1.0], abs=1e-12)

    def test_specular_law_random(self, rng):
        for _ in range(200):
            th = rng.uniform(0, 2 * math.pi)
            d = np.array([math.cos(th), math.sin(th)])
            ph = rng.uniform(0, 2 * math.pi)
            n = np.array([math.cos(ph), math.sin(ph)])
            if d @ n >= -1e-6:
                continue
            out = reflect(d, n)
            assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
            # incidence angle equals reflection angle; tangential part kept
            assert out @ n == pytest.approx(-(d @ n), abs=1e-12)
            t = np.array([-n[1], n[0]])
            assert out @ t == pytest.approx(d @ t, abs=1e-12)

    def test_grazing_raises(self):
        with pytest.raises(GrazingRayError):
            reflect((1, 0), (0, 1))


class TestTraceBrokenRay:
    def test_empty_scene_single_leg(self):
        scene = Scene((), Rect((-5, -5), (5, 5)))
        ray = trace_broken_ray((-3, 0), (1, 0), scene, 4)
        assert len(ray.legs) == 1
        assert ray.legs[0].length == pytest.approx(8.0)
        assert ray.end == pytest.approx([5.0, 0.0])

    def test_retroreflection(self, unit_disk_scene):
        ray = trace_broken_ray((-3, 0), (1, 0), unit_disk_scene, 4)
        assert len(ray.legs) == 2
        assert ray.reflection_points[0] == pytest.approx([-1.0, 0.0])
        assert ray.legs[1].direction == pytest.approx([-1.0, 0.0])

    def test_oblique_reflection_invariants(self, unit_disk_scene):
        ray = trace_broken_ray((-3, 0.5), (1, 0), unit_disk_scene, 4)
        ray.validate(unit_disk_scene, tol=1e-10)
        assert len(ray.reflection_points) == 1
        assert ray.total_length == pytest.approx(sum(l.length for l in ray.legs))

    def test_deterministic(self, unit_disk_scene):
        a = trace_broken_ray((-3, 0.5), (1, 0), unit_disk_scene, 4)
        b = trace_broken_ray((-3, 0.5), (1, 0), unit_disk_scene, 4)
        assert all(
            np.array_equal(la.start, lb.start)
            and np.array_equal(la.direction, lb.direction)
            and la.length == lb.length
            for la, lb in zip(a.legs, b.legs)
        )

    def test_budget_error_carries_partial(self):
        # a ray bouncing in the gap between two large disks
        scene = Scene(
            (Disk((0, 2.2), 2.0), Disk((0, -2.2), 2.0)), Rect((-30, -30), (30, 30))
        )
        d = np.array([1.0, 0.04])
        d /= np.linalg.norm(d)
        with pytest.raises(ReflectionBudgetError) as err:
            trace_broken_ray((-9, 0.0), d, scene, 2)
        assert err.value.partial is not None
        assert len(err.value.partial.legs) == 3


class TestWindingNumbers:
    def test_circle_winds_once(self, unit_disk_scene):
        assert winding_numbers(circle_loop((0, 0), 5.0), unit_disk_scene).tolist() == [1]

    def test_clockwise_circle(self, unit_disk_scene):
        assert winding_numbers(circle_loop((0, 0), 5.0, -1), unit_disk_scene).tolist() == [-1]

    def test_double_wrap_and_miss(self):
        scene = Scene(
            (Disk((0, 0), 0.5), Disk((3, 0), 0.5)), Rect((-6, -6), (6, 6))
        )
        double = Loop(
            (
                Arc((0, 0), 1.5, 0.0, 2 * math.pi),
                Arc((0, 0), 1.5, 2 * math.pi, 4 * math.pi),
            )
        )
        winding = winding_numbers(double, scene)
        assert winding.tolist() == [2, 0]
        # even-odd ray-casting parity oracle on the full sampled polygon:
        # crossings of a rightward ray from each center match winding mod 2
        pts = [
            e.point(t)
            for e in double.elements
            for t in np.linspace(0, 1, 360, endpoint=False)
        ]
        for center, w in zip(((0.0, 0.0), (3.0, 0.0)), winding):
            crossings = 0
            for a, b in zip(pts, pts[1:] + pts[:1]):
                if (a[1] > center[1]) != (b[1] > center[1]):
                    x_cross = a[0] + (b[0] - a[0]) * (center[1] - a[1]) / (b[1] - a[1])
                    if x_cross > center[0]:
                        crossings += 1
            assert crossings % 2 == abs(int(w)) % 2

    def test_additivity_under_concatenation(self, unit_disk_scene):
        base = circle_loop((0, 0), 4.0)
        double = base.concatenated(circle_loop((0, 0), 4.0))
        w1 = winding_numbers(base, unit_disk_scene)
        w2 = winding_numbers(double, unit_disk_scene)
        assert (w2 == 2 * w1).all()

    def test_negation_under_reversal(self, unit_disk_scene):
        sq = polyline_loop([(-3, -3), (3, -3), (3, 3), (-3, 3)])
        w = winding_numbers(sq, unit_disk_scene)
        wr = winding_numbers(sq.reversed(), unit_disk_scene)
        assert (wr == -w).all()

    def test_loop_through_obstacle_rejected(self, unit_disk_scene):
        with pytest.raises(DomainError):
            winding_numbers(polyline_loop([(-3, 0), (3, 0), (0, 4)]), unit_disk_scene)

    def test_open_chain_rejected(self):
        with pytest.raises(GeometryError):
            Loop((Segment((0, 0), (1, 0)), Segment((1, 0), (1, 1))))
