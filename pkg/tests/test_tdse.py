import math

import numpy as np
import pytest

from ablab.errors import ResolutionError, SolverError
from ablab.gauge import ab_potential
from ablab.geometry import Disk, Rect, Scene
from ablab.optics import BeamSpec
from ablab.tdse import (
    Field,
    LatticeSpec,
    MaskClippingWarning,
    Probe,
    build_lattice,
    clipped_fraction,
    evolve,
    init_packet,
    lattice_gauge_transform,
    step,
)


def empty_scene(half=5.0):
    return Scene((), Rect((-half, -half), (half, half)))


def make_spec(n=96, half=5.0, dt=2e-3, **kw):
    return LatticeSpec(shape=(n, n), spacing=2 * half / (n - 1), origin=(-half, -half),
                       dt=dt, **kw)


def smooth_random_phase(spec, rng, amplitude=0.8, modes=3):
    xg, yg = spec.site_positions()
    lx = spec.spacing * (spec.shape[0] - 1)
    phase = np.zeros(spec.shape)
    for _ in range(modes):
        kx, ky = rng.integers(-2, 3, size=2)
        ph = rng.uniform(0, 2 * math.pi)
        phase += rng.uniform(-1, 1) * np.cos(
            2 * math.pi * (kx * xg + ky * yg) / lx + ph
        )
    return amplitude * phase


class TestBuildLattice:
    def test_zero_potential_zero_links(self):
        scene = empty_scene()
        lat = build_lattice(scene, ab_potential(scene), make_spec())
        assert np.all(lat.link_x == 0) and np.all(lat.link_y == 0)

    def test_plaquette_sums_and_lattice_stokes(self, unit_disk_scene):
        pot = ab_potential(unit_disk_scene)
        spec = make_spec(128, 6.0)
        lat = build_lattice(unit_disk_scene, pot, spec)
        plq = lat.plaquette_phases()
        xg, yg = spec.site_positions()
        cx = xg[:-1, :-1] + spec.spacing / 2
        cy = yg[:-1, :-1] + spec.spacing / 2
        away = cx**2 + cy**2 > 0.05**2
        assert np.abs(plq[away]).max() < 1e-8
        # lattice Stokes: plaquette sums over the full grid see the solenoid
        assert plq.sum() == pytest.approx(math.pi, abs=1e-10)

    def test_mask_counts_match_point_in_disk(self, unit_disk_scene):
        spec = make_spec(100, 6.0)
        lat = build_lattice(unit_disk_scene, ab_potential(unit_disk_scene), spec)
        xg, yg = spec.site_positions()
        inside_disk = (xg**2 + yg**2) < 1.0
        interior = np.ones(spec.shape, bool)
        interior[0, :] = interior[-1, :] = interior[:, 0] = interior[:, -1] = False
        expected = interior & ~inside_disk
        assert np.array_equal(lat.mask, expected)

    def test_thin_obstacle_rejected(self):
        scene = Scene((Disk((0, 0), 0.05),), Rect((-5, -5), (5, 5)))
        with pytest.raises(ResolutionError):
            build_lattice(scene, ab_potential(scene), make_spec(64))

    def test_potential_energy_sampling(self):
        scene = empty_scene()
        spec = make_spec(64)
        lat = build_lattice(scene, ab_potential(scene), spec,
                            V=lambda p: p[0] + 2 * p[1])
        xg, yg = spec.site_positions()
        assert lat.potential_energy == pytest.approx(xg + 2 * yg)


class TestInitPacket:
    def test_zero_wavenumber_real_nonnegative(self):
        scene = empty_scene()
        lat = build_lattice(scene, ab_potential(scene), make_spec())
        beam = BeamSpec((0, 0), (1, 0), 1.0, 1.0, 1e-12)
        fld = init_packet(lat, beam)
        assert np.all(np.abs(fld.values.imag) < 1e-9)
        assert np.all(fld.values.real >= -1e-12)

    def test_unit_norm(self):
        scene = empty_scene()
        lat = build_lattice(scene, ab_potential(scene), make_spec())
        fld = init_packet(lat, BeamSpec((0.5, -0.3), (0, 1), 0.9, 1.1, 7.0))
        assert fld.norm() == pytest.approx(1.0, abs=1e-12)

    def test_mean_momentum(self):
        # <-i d/dx> should match the carrier wavevector m k / hbar within 2%
        scene = empty_scene()
        spec = make_spec(192, 5.0)
        lat = build_lattice(scene, ab_potential(scene), spec)
        k = 6.0
        fld = init_packet(lat, BeamSpec((0, 0), (1, 0), 1.4, 1.4, k))
        u = fld.values
        dx = spec.spacing
        grad_x = (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * dx)
        p_mean = np.sum(np.conj(u) * (-1j) * grad_x).real * dx * dx
        assert p_mean == pytest.approx(k, rel=0.02)

    def test_clipping_warning(self, unit_disk_scene):
        spec = make_spec(96, 6.0)
        lat = build_lattice(unit_disk_scene, ab_potential(unit_disk_scene), spec)
        beam = BeamSpec((1.2, 0.0), (0, 1), 1.0, 1.0, 5.0)  # support overlaps the disk
        assert clipped_fraction(lat, beam) > 1e-3
        with pytest.warns(MaskClippingWarning):
            init_packet(lat, beam)


class TestStep:
    def test_free_packet_group_velocity(self):
        scene = empty_scene(6.0)
        spec = make_spec(288, 6.0, dt=1.5e-3)  # ~24 sites per wavelength
        lat = build_lattice(scene, ab_potential(scene), spec)
        k = 6.0
        fld = init_packet(lat, BeamSpec((-2.0, 0), (1, 0), 1.6, 1.4, k))
        xg, _ = spec.site_positions()
        n_steps = 60
        out, _ = evolve(lat, fld, n_steps)
        x0 = float((fld.density * xg).sum() / fld.density.sum())
        x1 = float((out.density * xg).sum() / out.density.sum())
        v = (x1 - x0) / (n_steps * spec.dt)
        assert v == pytest.approx(k, rel=0.02)

    def test_eigenmode_density_stationary(self):
        # ground mode of a small hard box: density must not move
        scene = empty_scene(1.0)
        spec = make_spec(24, 1.0, dt=5e-3)
        lat = build_lattice(scene, ab_potential(scene), spec)
        h, idx = lat.hamiltonian()
        dense = h.toarray()
        w, v = np.linalg.eigh(dense)
        ground = v[:, 0]
        values = np.zeros(spec.shape, complex)
        values[lat.mask] = ground
        fld = Field(lat, values).normalized()
        rho0 = fld.density.copy()
        for _ in range(100):
            fld = step(lat, fld)
        assert np.abs(fld.density - rho0).max() < 1e-8

    def test_norm_conservation_per_step(self, unit_disk_scene):
        pot = ab_potential(unit_disk_scene)
        spec = make_spec(96, 6.0)
        lat = build_lattice(unit_disk_scene, pot, spec, V=lambda p: 0.3 * p[0] ** 2)
        fld = init_packet(lat, BeamSpec((-3.0, 2.0), (1, 0), 0.8, 0.8, 5.0))
        for _ in range(10):
            new = step(lat, fld)
            assert abs(new.norm() - fld.norm()) < 1e-10
            fld = new

    def test_solver_failure_reported(self):
        scene = empty_scene()
        spec = make_spec(64, dt=2e-3, solver_maxiter=1, solver_rtol=1e-14)
        lat = build_lattice(scene, ab_potential(scene), spec,
                            V=lambda p: 500.0 * math.sin(3 * p[0]) * math.cos(4 * p[1]))
        fld = init_packet(lat, BeamSpec((0, 0), (1, 0), 1.0, 1.0, 5.0))
        with pytest.raises(SolverError):
            step(lat, fld)


class TestEvolveAndProbes:
    def test_probe_partition_additivity(self):
        scene = empty_scene()
        spec = make_spec(80)
        lat = build_lattice(scene, ab_potential(scene), spec)
        fld = init_packet(lat, BeamSpec((0, 0), (0, 1), 1.0, 1.0, 4.0))
        left = lat.mask.copy()
        left[spec.shape[0] // 2:, :] = False
        right = lat.mask & ~left
        _, records = evolve(lat, fld, 5, (Probe("all", lat.mask), Probe("L", left), Probe("R", right)))
        by_step = {}
        for s, _t, name, value in records:
            by_step.setdefault(s, {})[name] = value
        for s, vals in by_step.items():
            assert vals["L"] + vals["R"] == pytest.approx(vals["all"], abs=1e-12)
            assert vals["all"] == pytest.approx(1.0, abs=1e-8)


class TestLatticeGaugeTransform:
    def test_constant_phase_leaves_links(self):
        scene = empty_scene()
        lat = build_lattice(scene, ab_potential(scene), make_spec(48))
        fld = init_packet(lat, BeamSpec((0, 0), (1, 0), 1.0, 1.0, 3.0))
        new_lat, new_fld = lattice_gauge_transform(lat, fld, np.full(lat.spec.shape, 0.7))
        assert np.array_equal(new_lat.link_x, lat.link_x)
        assert np.array_equal(new_lat.link_y, lat.link_y)
        assert new_fld.values[lat.mask] == pytest.approx(
            fld.values[lat.mask] * np.exp(1j * 0.7)
        )

    def test_plaquette_sums_unchanged(self, rng, unit_disk_scene):
        spec = make_spec(64, 6.0)
        lat = build_lattice(unit_disk_scene, ab_potential(unit_disk_scene), spec)
        fld = init_packet(lat, BeamSpec((-3, 3), (1, 0), 0.8, 0.8, 4.0))
        phase = smooth_random_phase(spec, rng)
        new_lat, _ = lattice_gauge_transform(lat, fld, phase)
        assert np.abs(new_lat.plaquette_phases() - lat.plaquette_phases()).max() < 1e-13

    def test_evolution_commutes_with_gauge(self, rng, unit_disk_scene):
        # evolve-then-transform equals transform-then-evolve, pointwise in
        # density, at the level of the (tightened) linear-solve residual
        spec = make_spec(64, 6.0, dt=2e-3, solver_rtol=1e-12)
        lat = build_lattice(unit_disk_scene, ab_potential(unit_disk_scene), spec)
        fld = init_packet(lat, BeamSpec((-3, 2.5), (1, 0), 0.9, 0.9, 5.0))
        phase = smooth_random_phase(spec, rng)
        n_steps = 20

        evolved, _ = evolve(lat, fld, n_steps)
        _, evolved_then_transformed = lattice_gauge_transform(lat, evolved, phase)

        t_lat, t_fld = lattice_gauge_transform(lat, fld, phase)
        transformed_then_evolved, _ = evolve(t_lat, t_fld, n_steps)

        assert np.abs(
            evolved_then_transformed.density - transformed_then_evolved.density
        ).max() < 1e-12
