"""ablab: an Aharonov-Bohm interference laboratory.

Predicts two-beam interference intensities from gauge-phase line integrals
along straight and broken rays, verifies them with a gauge-covariant lattice
Schrodinger solver, reproduces the electric variant of the effect in domains
whose topology changes in time, and recovers hidden per-obstacle fluxes
(mod 2 pi) from interference measurements.
"""

__version__ = "0.1.0"

from .electric import (
    DensityHistory,
    DomainSchedule,
    SplitPotential,
    component_phase_evolution,
    density_discrepancy,
    electric_flux,
    run_electric_ab,
)
from .errors import AblabError
from .gauge import (
    PhysicalConstants,
    SpacetimeLoop,
    SpacetimePotential,
    StationaryMetric,
    VectorPotential,
    ab_potential,
    curl_at,
    electromagnetic_flux,
    gauge_transform,
    gravitational_flux,
    line_integral,
    loop_flux,
)
from .geometry import (
    Arc,
    BrokenRay,
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
from .optics import (
    BeamSpec,
    CutoffProfile,
    GOPrediction,
    broken_ray_phase,
    interference_intensity,
    matched_wavenumber,
    predict_two_beam,
    straight_ray_phase,
)
from .recovery import (
    Circuit,
    FluxEstimate,
    FluxSystem,
    Measurement,
    design_measurements,
    invert_intensity,
    recover,
    solve_mod2pi,
)
from .tdse import (
    Field,
    Lattice,
    LatticeSpec,
    Probe,
    build_lattice,
    evolve,
    init_packet,
    lattice_gauge_transform,
    step,
)
from .twobeam import FringeRecord, two_beam_experiment

__all__ = [name for name in dir() if not name.startswith("_")]
