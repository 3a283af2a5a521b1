"""Recovery of hidden per-obstacle fluxes (mod 2 pi) from interference data.

Each measurement circuit has an integer winding vector n and yields the
circuit phase beta = sum_j n_j alpha_j (mod 2 pi), either directly or as an
intensity 4 sin^2(beta/2) that determines beta only up to {beta, 2 pi - beta}.
Stacking m independent circuits gives an integer linear system; a unique
solution mod 2 pi exists exactly when the winding matrix is unimodular
(|det| = 1), in which case the integer inverse maps phase residues to flux
residues.  |det| = d > 1 leaves a coset of d admissible flux vectors, which
is reported rather than silently resolved.

Circuit design prefers a simple circle around each obstacle.  When obstacles
sit too close for separating circles, the designer covers the cluster with an
enclosing circuit plus a broken-ray circuit that reaches into the gap by
bouncing off the neighbor, mirroring how a reflected beam can probe one member
of a cluster whose total flux may hide the effect.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguityError,
    DataError,
    InconsistentMeasurementsError,
    MeasurementDesignError,
    RankDeficientError,
)
from .gauge import VectorPotential, loop_flux
from .geometry import Loop, Scene, circle_loop, polyline_loop, winding_numbers
from .optics import BeamSpec, interference_intensity, predict_two_beam

__all__ = [
    "Measurement",
    "FluxSystem",
    "FluxEstimate",
    "Circuit",
    "invert_intensity",
    "solve_mod2pi",
    "enumerate_admissible",
    "design_measurements",
    "recover",
    "quadrature_oracle",
    "go_oracle",
    "intensity_oracle",
]

TWO_PI = 2 * math.pi


def _mod2pi(x) -> np.ndarray:
    return np.mod(x, TWO_PI)


def _wrap(x) -> np.ndarray:
    """Symmetric residue in (-pi, pi]."""
    return np.asarray(x) - TWO_PI * np.round(np.asarray(x) / TWO_PI)


@dataclass(frozen=True)
class Measurement:
    """A circuit phase (radians) or a raw intensity in [0, 4]."""

    phase: float | None = None
    intensity: float | None = None

    def __post_init__(self):
        if (self.phase is None) == (self.intensity is None):
            raise ValueError("measurement needs exactly one of phase / intensity")

    def candidates(self) -> tuple[float, ...]:
        if self.phase is not None:
            return (float(_mod2pi(self.phase)),)
        return invert_intensity(self.intensity)

    def to_dict(self) -> dict:
        if self.phase is not None:
            return {"phase": float(self.phase)}
        return {"intensity": float(self.intensity)}

    @classmethod
    def from_dict(cls, d: dict) -> "Measurement":
        return cls(phase=d.get("phase"), intensity=d.get("intensity"))


@dataclass(frozen=True)
class FluxSystem:
    winding: np.ndarray  # integer matrix, rows = measurements
    betas: tuple[Measurement, ...]

    def __post_init__(self):
        w = np.asarray(self.winding)
        if not np.issubdtype(w.dtype, np.integer):
            if not np.allclose(w, np.round(w)):
                raise ValueError("winding matrix must be integer")
            w = np.round(w).astype(int)
        object.__setattr__(self, "winding", w)
        object.__setattr__(self, "betas", tuple(self.betas))
        if len(self.betas) != w.shape[0]:
            raise ValueError("one measurement per winding row required")

    def to_dict(self) -> dict:
        return {
            "N": [[int(v) for v in row] for row in self.winding],
            "betas": [b.to_dict() for b in self.betas],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FluxSystem":
        return cls(
            winding=np.asarray(d["N"], int),
            betas=tuple(Measurement.from_dict(b) for b in d["betas"]),
        )


@dataclass(frozen=True)
class FluxEstimate:
    alphas: np.ndarray  # representatives in [0, 2 pi)
    residual: float
    ambiguity: tuple[tuple[float, ...], ...] | None = None

    def to_dict(self) -> dict:
        return {
            "alphas": [float(a) for a in self.alphas],
            "residual": self.residual,
            "ambiguity": None
            if self.ambiguity is None
            else [[float(v) for v in s] for s in self.ambiguity],
        }


def invert_intensity(intensity: float) -> tuple[float, ...]:
    """Phases compatible with a two-beam intensity: {a, 2 pi - a}, collapsing
    to a single value at 0 and 4."""
    if not -1e-9 <= intensity <= 4 + 1e-9:
        raise DataError(f"intensity {intensity!r} outside [0, 4]")
    clamped = min(max(intensity, 0.0), 4.0)
    a = 2.0 * math.asin(math.sqrt(clamped) / 2.0)
    if clamped < 1e-15:
        return (0.0,)
    if abs(clamped - 4.0) < 1e-15:
        return (math.pi,)
    return (a, TWO_PI - a)


# -- exact integer linear algebra (matrices here are tiny) -------------------


def _det_exact(m: list[list[int]]) -> int:
    """Exact determinant of a small integer matrix (permutation expansion;
    winding matrices have at most a handful of rows)."""
    n = len(m)
    if n == 1:
        return m[0][0]
    total = 0
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = 1
        for i in range(n):
            prod *= m[i][perm[i]]
        total += -prod if inv % 2 else prod
    return total


def integer_inverse(matrix: np.ndarray) -> tuple[np.ndarray, int]:
    """Exact inverse of an integer matrix scaled by its determinant.

    Returns (adjugate, det) with matrix @ adjugate = det * identity; for a
    unimodular matrix adjugate / det is the exact integer inverse.
    """
    m = [[int(v) for v in row] for row in matrix]
    n = len(m)
    det = _det_exact(m)
    adj = np.zeros((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            minor = [
                [m[r][c] for c in range(n) if c != j] for r in range(n) if r != i
            ]
            cof = _det_exact(minor) if minor else 1
            adj[j, i] = (-1) ** (i + j) * cof
    return adj, det


def _select_unimodular_rows(w: np.ndarray) -> list[int] | None:
    n_rows, n_cols = w.shape
    for combo in itertools.combinations(range(n_rows), n_cols):
        sub = [[int(w[r, c]) for c in range(n_cols)] for r in combo]
        if abs(_det_exact(sub)) == 1:
            return list(combo)
    return None


def solve_mod2pi(system: FluxSystem, tol: float = 1e-8, noise_bound: float = 0.0) -> FluxEstimate:
    """Solve N alpha = beta (mod 2 pi) for exact-phase measurements.

    Requires a unimodular row subset; raises RankDeficientError for singular
    systems and AmbiguityError (with the coset size and, when small, the full
    admissible set) when |det| > 1.
    """
    w = system.winding
    n_obs = w.shape[1]
    betas = []
    for b in system.betas:
        if b.phase is None:
            raise ValueError("solve_mod2pi needs exact phases; use recover for intensities")
        betas.append(float(b.phase))
    beta = np.asarray(betas)

    if w.shape[0] < n_obs:
        raise RankDeficientError(
            f"{w.shape[0]} measurements cannot determine {n_obs} fluxes"
        )
    rows = _select_unimodular_rows(w)
    if rows is None:
        square = w.shape[0] == n_obs
        det = _det_exact([[int(v) for v in r] for r in w]) if square else None
        if square and det == 0:
            raise RankDeficientError("winding matrix is singular: a flux combination is unobservable")
        if square and abs(det) > 1:
            sols = None
            if abs(det) <= 16:
                sols = enumerate_admissible(w, beta)
            raise AmbiguityError(
                f"|det N| = {abs(det)} > 1: fluxes determined only up to a coset",
                coset_size=abs(det),
                solutions=sols,
            )
        # non-square with no unimodular subset: report the best subset determinant
        raise AmbiguityError(
            "no unimodular row subset exists: recovery is ambiguous", coset_size=None
        )
    sub_w = w[rows]
    sub_b = beta[rows]
    adj, det = integer_inverse(sub_w)
    inv = (adj / det).astype(float)  # integer-valued since |det| = 1
    alphas = _mod2pi(inv @ sub_b)

    residual = float(np.max(np.abs(_wrap(w @ alphas - beta))))
    if residual > tol + noise_bound:
        raise InconsistentMeasurementsError(
            f"no flux assignment satisfies all measurements (residual {residual:.3e})",
            residuals=_wrap(w @ alphas - beta),
        )
    return FluxEstimate(alphas=alphas, residual=residual)


def enumerate_admissible(w: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, ...]:
    """All solutions of N alpha = beta (mod 2 pi) in [0, 2 pi)^m, for square N
    with small nonzero determinant (brute-force over the residue box)."""
    adj, det = integer_inverse(w)
    if det == 0:
        raise RankDeficientError("singular winding matrix")
    d = abs(det)
    m = w.shape[1]
    found: list[np.ndarray] = []
    for k in itertools.product(range(d), repeat=m):
        cand = _mod2pi((adj.astype(float) @ (beta + TWO_PI * np.asarray(k))) / det)
        if np.max(np.abs(_wrap(w @ cand - beta))) < 1e-9:
            if not any(np.max(np.abs(_wrap(cand - f))) < 1e-9 for f in found):
                found.append(cand)
    return tuple(found)


# -- circuit design ----------------------------------------------------------


@dataclass(frozen=True)
class Circuit:
    """A measurement circuit: its loop, verified winding vector, and (when a
    beam realization exists) the two beams whose interference measures it."""

    loop: Loop
    winding: np.ndarray
    beams: tuple[BeamSpec, BeamSpec] | None = None


def _isolated_circle(scene: Scene, j: int, gap: float = 0.05) -> Circuit | None:
    o = scene.obstacles[j]
    rho_max = min(
        float(np.min(np.minimum(o.center - scene.bound.lo, scene.bound.hi - o.center))),
        *(
            [
                float(np.linalg.norm(o.center - other.center)) - other.radius
                for i, other in enumerate(scene.obstacles)
                if i != j
            ]
            or [math.inf]
        ),
    ) - gap
    rho_min = o.radius + gap
    if rho_max <= rho_min:
        return None
    loop = circle_loop(o.center, 0.5 * (rho_min + rho_max))
    winding = winding_numbers(loop, scene)
    expected = np.zeros(len(scene.obstacles), dtype=int)
    expected[j] = 1
    if not np.array_equal(winding, expected):
        return None
    return Circuit(loop=loop, winding=winding)


def _enclosing_circle(scene: Scene, members: tuple[int, ...], gap: float = 0.05) -> Circuit | None:
    centers = np.array([scene.obstacles[j].center for j in members])
    mid = centers.mean(axis=0)
    rho_min = max(
        float(np.linalg.norm(scene.obstacles[j].center - mid)) + scene.obstacles[j].radius
        for j in members
    ) + gap
    rho_max = min(
        float(np.min(np.minimum(mid - scene.bound.lo, scene.bound.hi - mid))),
        *(
            [
                float(np.linalg.norm(scene.obstacles[i].center - mid))
                - scene.obstacles[i].radius
                for i in range(len(scene.obstacles))
                if i not in members
            ]
            or [math.inf]
        ),
    ) - gap
    if rho_max <= rho_min:
        return None
    loop = circle_loop(mid, 0.5 * (rho_min + rho_max))
    winding = winding_numbers(loop, scene)
    expected = np.zeros(len(scene.obstacles), dtype=int)
    expected[list(members)] = 1
    if not np.array_equal(winding, expected):
        return None
    return Circuit(loop=loop, winding=winding)


def _broken_ray_circuit(scene: Scene, target: int, mirror: int, gap: float = 0.04) -> Circuit | None:
    """Circuit around `target` whose probing leg reflects off `mirror`.

    The incoming leg dives into the gap between the two disks, bounces off the
    mirror disk at its point nearest the target, and leaves on the other side;
    closing the path on the far side encircles the target only.
    """
    o_t, o_m = scene.obstacles[target], scene.obstacles[mirror]
    u_hat = o_m.center - o_t.center
    dist = float(np.linalg.norm(u_hat))
    u_hat = u_hat / dist
    v_hat = np.array([-u_hat[1], u_hat[0]])
    p = o_m.center - o_m.radius * u_hat  # reflection point facing the target
    d_prime = dist - o_m.radius  # distance from target center to p
    sin_psi = (o_t.radius + 0.5 * (d_prime - o_t.radius)) / d_prime
    if not 0.0 < sin_psi < 0.995:
        return None
    cos_psi = math.sqrt(1.0 - sin_psi**2)
    d_in = cos_psi * u_hat - sin_psi * v_hat  # arrives at p from the +v side
    d_out = -cos_psi * u_hat - sin_psi * v_hat  # leaves toward the -v side

    # legs long enough that the closing side passes behind the target disk
    leg = max(
        3.0 * (o_t.radius + o_m.radius),
        (d_prime + o_t.radius + 3.0 * gap) / cos_psi,
    )
    x1 = p - leg * d_in
    x2 = p + leg * d_out
    for pt in (x1, x2):
        if not scene.bound.contains(pt):
            return None
    loop = polyline_loop([x1, p, x2])
    try:
        winding = winding_numbers(loop, scene)
    except Exception:
        return None
    if abs(winding[target]) != 1 or any(
        winding[i] != 0 for i in range(len(winding)) if i != target
    ):
        return None
    return Circuit(loop=loop, winding=winding)


def design_measurements(scene: Scene, gap: float = 0.05) -> list[Circuit]:
    """Design circuits whose winding matrix is the identity when separating
    circles exist, else a unimodular matrix built from cluster-enclosing and
    broken-ray circuits.  Raises MeasurementDesignError when the strategy set
    is exhausted."""
    m = len(scene.obstacles)
    if m == 0:
        return []
    circuits: dict[int, Circuit] = {}
    unresolved: list[int] = []
    for j in range(m):
        c = _isolated_circle(scene, j, gap)
        if c is not None:
            circuits[j] = c
        else:
            unresolved.append(j)

    extra: list[Circuit] = []
    handled: set[int] = set()
    for j in unresolved:
        if j in handled:
            continue
        # find the nearest blocking obstacle; treat the pair as a cluster
        others = [
            (float(np.linalg.norm(scene.obstacles[j].center - scene.obstacles[i].center)), i)
            for i in range(m)
            if i != j
        ]
        others.sort()
        k = others[0][1]
        pair = (min(j, k), max(j, k))
        enclosing = _enclosing_circle(scene, pair, gap)
        broken = _broken_ray_circuit(scene, j, k, gap)
        if enclosing is None or broken is None:
            raise MeasurementDesignError(
                f"no circuit construction covers obstacles {pair}; supply circuits manually"
            )
        extra.extend([enclosing, broken])
        handled.update(pair)
        circuits.pop(k, None)

    designed = [circuits[j] for j in sorted(circuits)] + extra
    w = np.array([c.winding for c in designed])
    if w.shape[0] < m or _select_unimodular_rows(w) is None:
        raise MeasurementDesignError("designed circuits are not unimodular")
    return designed


# -- oracles and end-to-end recovery ----------------------------------------


def quadrature_oracle(potential: VectorPotential, rel_tol: float = 1e-8):
    """Measure each circuit's phase by direct loop quadrature (mod 2 pi)."""

    def oracle(circuit: Circuit) -> Measurement:
        return Measurement(phase=_mod2pi(loop_flux(potential, circuit.loop, rel_tol)))

    return oracle


def go_oracle(scene: Scene, potential: VectorPotential, rel_tol: float = 1e-8):
    """Measure circuit phases with the interference predictor when a beam
    realization exists, falling back to loop quadrature."""

    def oracle(circuit: Circuit) -> Measurement:
        if circuit.beams is None:
            return Measurement(phase=_mod2pi(loop_flux(potential, circuit.loop, rel_tol)))
        pred = predict_two_beam(scene, potential, *circuit.beams, rel_tol=rel_tol)
        return Measurement(phase=_mod2pi(pred.alpha))

    return oracle


def intensity_oracle(potential: VectorPotential, rel_tol: float = 1e-8):
    """Measure only intensities 4 sin^2(beta/2), leaving the sign ambiguous."""

    def oracle(circuit: Circuit) -> Measurement:
        beta = loop_flux(potential, circuit.loop, rel_tol)
        return Measurement(intensity=interference_intensity(beta))

    return oracle


def recover(
    scene: Scene,
    oracle,
    circuits: list[Circuit] | None = None,
    tol: float = 1e-6,
) -> FluxEstimate:
    """Design circuits, query the measurement oracle, and solve mod 2 pi.

    Intensity measurements contribute ambiguous phase pairs; every combination
    is solved and checked against all measurements, admissible solutions are
    intersected, and any residual ambiguity is reported per obstacle.
    """
    if circuits is None:
        circuits = design_measurements(scene)
    w = np.array([c.winding for c in circuits])
    betas = tuple(oracle(c) for c in circuits)
    candidate_sets = [b.candidates() for b in betas]

    solutions: list[FluxEstimate] = []
    for choice in itertools.product(*candidate_sets):
        system = FluxSystem(winding=w, betas=tuple(Measurement(phase=p) for p in choice))
        try:
            est = solve_mod2pi(system, tol=tol)
        except InconsistentMeasurementsError:
            continue
        if not any(
            np.max(np.abs(_wrap(est.alphas - s.alphas))) < 1e-9 for s in solutions
        ):
            solutions.append(est)
    if not solutions:
        raise InconsistentMeasurementsError(
            "no flux assignment reproduces the measurements within tolerance"
        )
    if len(solutions) == 1:
        return solutions[0]
    ambiguity = tuple(
        tuple(sorted({float(s.alphas[j]) for s in solutions}))
        for j in range(w.shape[1])
    )
    best = min(solutions, key=lambda s: s.residual)
    return FluxEstimate(alphas=best.alphas, residual=best.residual, ambiguity=ambiguity)
