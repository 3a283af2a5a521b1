"""Command-line surface: one subcommand per experiment mode.

Every run validates its config before any compute, writes its data artifacts
(CSV for 1D series, flat binary + JSON sidecar for fields, JSON for records),
renders figures next to them unless --no-figures is given, and finishes with
a manifest echoing the fully defaulted config plus a sha256 checksum per
artifact.  Exit codes: 0 ok, 1 compute error, 2 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import figures, outputs
from .electric import DomainSchedule, SplitPotential, initial_blob, run_electric_ab
from .errors import AblabError, ConfigError
from .gauge import PhysicalConstants, ab_potential, loop_flux
from .geometry import Scene, circle_loop, polyline_loop, trace_broken_ray, winding_numbers
from .optics import BeamSpec, predict_two_beam
from .recovery import design_measurements, go_oracle, intensity_oracle, quadrature_oracle, recover
from .tdse import LatticeSpec, Probe, build_lattice, evolve, init_packet
from .twobeam import reference_two_beam, two_beam_experiment

MODES = ("trace", "flux", "go-predict", "tdse-run", "two-beam", "electric-ab", "recover")


def _fail_config(message: str) -> ConfigError:
    return ConfigError(message)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise _fail_config(message)


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    _require(not unknown, f"unknown keys {sorted(unknown)} in {where}")


def _vec(value, where: str) -> np.ndarray:
    _require(
        isinstance(value, (list, tuple)) and len(value) == 2,
        f"{where} must be a 2-vector",
    )
    return np.asarray(value, dtype=float)


def load_config(path: Path, overrides) -> dict:
    try:
        config = json.loads(path.read_text())
    except FileNotFoundError:
        raise _fail_config(f"config file {path} does not exist")
    except json.JSONDecodeError as exc:
        raise _fail_config(f"config is not valid JSON: {exc}")
    _require(isinstance(config, dict), "config must be a JSON object")
    _check_keys(
        config, {"mode", "scene", "constants", "seed", "tolerance", "params"}, "config"
    )
    config.setdefault("params", {})
    config.setdefault("seed", 0)
    config.setdefault("tolerance", 1e-8)
    config.setdefault("constants", {})
    if overrides.seed is not None:
        config["seed"] = overrides.seed
    if overrides.tolerance is not None:
        config["tolerance"] = overrides.tolerance
    _require(isinstance(config["params"], dict), "params must be an object")
    _check_keys(
        config["constants"], {"hbar", "mass", "charge", "light_speed"}, "constants"
    )
    resolved = PhysicalConstants(**config["constants"])
    config["constants"] = {
        "hbar": resolved.hbar,
        "mass": resolved.mass,
        "charge": resolved.charge,
        "light_speed": resolved.light_speed,
    }
    return config


def _constants(config: dict) -> PhysicalConstants:
    return PhysicalConstants(**config["constants"])


def _scene(config: dict, config_dir: Path) -> Scene:
    _require("scene" in config, "this mode requires a scene")
    value = config["scene"]
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute():
            path = config_dir / path
        _require(path.exists(), f"scene file {path} does not exist")
        return Scene.load(path)
    _require(isinstance(value, dict), "scene must be a path or an inline object")
    return Scene.from_dict(value)


def _beam(block, where: str) -> BeamSpec:
    _require(isinstance(block, dict), f"{where} must be an object")
    _check_keys(
        block,
        {"anchor", "direction", "transverse_width", "longitudinal_width", "wavenumber"},
        where,
    )
    for key in ("anchor", "direction", "transverse_width", "longitudinal_width", "wavenumber"):
        _require(key in block, f"{where}.{key} is required")
    direction = _vec(block["direction"], f"{where}.direction")
    norm = float(np.linalg.norm(direction))
    _require(norm > 0, f"{where}.direction must be nonzero")
    return BeamSpec(
        anchor=_vec(block["anchor"], f"{where}.anchor"),
        direction=direction / norm,
        transverse_width=float(block["transverse_width"]),
        longitudinal_width=float(block["longitudinal_width"]),
        wavenumber=float(block["wavenumber"]),
    )


def _lattice_spec(block, scene: Scene, constants: PhysicalConstants, where: str) -> LatticeSpec:
    _require(isinstance(block, dict), f"{where} must be an object")
    _check_keys(block, {"shape", "dt", "solver_rtol"}, where)
    for key in ("shape", "dt"):
        _require(key in block, f"{where}.{key} is required")
    shape = block["shape"]
    if isinstance(shape, int):
        shape = (shape, shape)
    _require(len(shape) == 2, f"{where}.shape must be an int or a pair")
    nx, ny = int(shape[0]), int(shape[1])
    extent = scene.bound.hi - scene.bound.lo
    spacing = max(extent[0] / (nx - 1), extent[1] / (ny - 1))
    kwargs = {}
    if "solver_rtol" in block:
        kwargs["solver_rtol"] = float(block["solver_rtol"])
    return LatticeSpec(
        shape=(nx, ny), spacing=spacing, origin=scene.bound.lo,
        dt=float(block["dt"]), constants=constants, **kwargs,
    )


def _loop(block, where: str):
    _require(isinstance(block, dict), f"{where} must be an object")
    if "circle" in block:
        _check_keys(block, {"circle"}, where)
        c = block["circle"]
        _check_keys(c, {"center", "radius", "orientation"}, f"{where}.circle")
        return circle_loop(
            _vec(c["center"], f"{where}.center"),
            float(c["radius"]),
            int(c.get("orientation", 1)),
        )
    if "polygon" in block:
        _check_keys(block, {"polygon"}, where)
        pts = [_vec(p, f"{where}.polygon[]") for p in block["polygon"]]
        return polyline_loop(pts)
    raise _fail_config(f"{where} must contain 'circle' or 'polygon'")


# ---------------------------------------------------------------------------
# mode runners: each returns a list of artifact paths
# ---------------------------------------------------------------------------


def run_trace(config, scene, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    _check_keys(p, {"start", "direction", "max_reflections"}, "params")
    for key in ("start", "direction"):
        _require(key in p, f"params.{key} is required")
    p.setdefault("max_reflections", 12)
    direction = _vec(p["direction"], "params.direction")
    direction = direction / np.linalg.norm(direction)
    ray = trace_broken_ray(
        _vec(p["start"], "params.start"), direction, scene, int(p["max_reflections"])
    )
    rows = [
        (i, *(f"{v:.17g}" for v in (*leg.start, *leg.end)), f"{leg.length:.17g}")
        for i, leg in enumerate(ray.legs)
    ]
    arts = [outputs.write_csv(out / "legs.csv", ["leg", "x0", "y0", "x1", "y1", "length"], rows)]
    if make_figures:
        arts.append(figures.save_scene_figure(out / "trace.png", scene, polylines=[ray.points()]))
    return arts


def run_flux(config, scene, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    _check_keys(p, {"loops"}, "params")
    _require("loops" in p and isinstance(p["loops"], list) and p["loops"],
             "params.loops must be a non-empty list")
    potential = ab_potential(scene, _constants(config))
    loops = [_loop(b, f"params.loops[{i}]") for i, b in enumerate(p["loops"])]
    rows = []
    for i, loop in enumerate(loops):
        winding = winding_numbers(loop, scene)
        flux = loop_flux(potential, loop, config["tolerance"])
        rows.append((i, " ".join(str(int(n)) for n in winding), f"{flux:.17g}"))
    arts = [outputs.write_csv(out / "flux.csv", ["loop", "winding", "flux"], rows)]
    if make_figures:
        arts.append(figures.save_scene_figure(out / "loops.png", scene, loops=loops))
    return arts


def run_go_predict(config, scene, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    _check_keys(p, {"beam1", "beam2", "max_reflections"}, "params")
    for key in ("beam1", "beam2"):
        _require(key in p, f"params.{key} is required")
    p.setdefault("max_reflections", 8)
    beam1, beam2 = _beam(p["beam1"], "params.beam1"), _beam(p["beam2"], "params.beam2")
    potential = ab_potential(scene, _constants(config))
    pred = predict_two_beam(
        scene, potential, beam1, beam2,
        rel_tol=config["tolerance"], max_reflections=int(p["max_reflections"]),
    )
    path = out / "prediction.json"
    path.write_text(json.dumps(pred.to_dict(), indent=2) + "\n")
    arts = [path]
    if make_figures:
        lines = [
            np.array([beam1.anchor, pred.meeting_point]),
            np.array([beam2.anchor, pred.meeting_point]),
            np.array([beam2.anchor, beam1.anchor]),
        ]
        arts.append(
            figures.save_scene_figure(
                out / "prediction.png", scene, polylines=lines,
                labels=["beam 1", "beam 2", "closing"],
            )
        )
    return arts


def run_tdse(config, scene, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    _check_keys(p, {"beam", "lattice", "n_steps"}, "params")
    for key in ("beam", "lattice", "n_steps"):
        _require(key in p, f"params.{key} is required")
    constants = _constants(config)
    spec = _lattice_spec(p["lattice"], scene, constants, "params.lattice")
    beam = _beam(p["beam"], "params.beam")
    potential = ab_potential(scene, constants)
    lattice = build_lattice(scene, potential, spec)
    fld = init_packet(lattice, beam)
    probes = (Probe("total", lattice.mask),)
    fld, records = evolve(lattice, fld, int(p["n_steps"]), probes)
    arts = outputs.dump_field(out / "density", fld.density, spec.spacing, spec.origin,
                              fld.time, "density")
    arts += outputs.dump_field(out / "field", fld.values, spec.spacing, spec.origin,
                               fld.time, "complex-interleaved")
    arts.append(outputs.write_probe_csv(out / "probes.csv", records))
    if make_figures:
        arts.append(
            figures.save_density_figure(out / "density.png", fld.density, spec.origin,
                                        spec.spacing, scene)
        )
    return arts


def run_two_beam(config, scene, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    if "reference" in p:
        _check_keys(p, {"reference"}, "params")
        _check_keys(p["reference"], {"alpha", "n"}, "params.reference")
        _require("alpha" in p["reference"], "params.reference.alpha is required")
        scene, potential, beam1, beam2, spec, n_steps = reference_two_beam(
            float(p["reference"]["alpha"]), int(p["reference"].get("n", 512))
        )
        screen_halfwidth = None
        config["params"] = {
            "reference": {"alpha": float(p["reference"]["alpha"]),
                          "n": int(p["reference"].get("n", 512))}
        }
        config["scene"] = scene.to_dict()  # echo the frozen reference scene
    else:
        _check_keys(p, {"beam1", "beam2", "lattice", "n_steps", "screen_halfwidth"}, "params")
        for key in ("beam1", "beam2", "lattice", "n_steps"):
            _require(key in p, f"params.{key} is required")
        constants = _constants(config)
        beam1, beam2 = _beam(p["beam1"], "params.beam1"), _beam(p["beam2"], "params.beam2")
        spec = _lattice_spec(p["lattice"], scene, constants, "params.lattice")
        potential = ab_potential(scene, constants)
        n_steps = int(p["n_steps"])
        screen_halfwidth = p.get("screen_halfwidth")
    record = two_beam_experiment(
        scene, potential, beam1, beam2, spec, n_steps, screen_halfwidth=screen_halfwidth
    )
    path = out / "fringe.json"
    path.write_text(json.dumps(record.to_dict(), indent=2) + "\n")
    arts = [path]
    arts.append(
        outputs.write_csv(
            out / "screen.csv", ["s", "density"],
            [(f"{s:.17g}", f"{d:.17g}") for s, d in
             zip(record.screen_positions, record.screen_density)],
        )
    )
    arts += outputs.dump_field(out / "density", record.final_field.density,
                               spec.spacing, spec.origin, record.final_field.time, "density")
    arts.append(outputs.write_probe_csv(out / "probes.csv", record.probe_records))
    if make_figures:
        arts.append(
            figures.save_density_figure(out / "density.png", record.final_field.density,
                                        spec.origin, spec.spacing, scene)
        )
        arts.append(
            figures.save_screen_figure(out / "screen.png", record.screen_positions,
                                       record.screen_density, record.kappa,
                                       record.fitted_phase, record.contrast,
                                       record.background)
        )
    return arts


def run_electric(config, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    _check_keys(
        p, {"schedule", "split", "lattice", "mode", "sample_every", "initial"}, "params"
    )
    sched_block = dict(p.get("schedule", {}))
    _check_keys(
        sched_block,
        {"disk_radius", "slab_half_width", "grow_duration", "hold_duration", "tau_start"},
        "params.schedule",
    )
    schedule = DomainSchedule(**{k: float(v) for k, v in sched_block.items()})
    p["schedule"] = {
        "disk_radius": schedule.disk_radius,
        "slab_half_width": schedule.slab_half_width,
        "grow_duration": schedule.grow_duration,
        "hold_duration": schedule.hold_duration,
        "tau_start": schedule.tau_start,
    }

    _require("split" in p, "params.split is required")
    split_block = p["split"]
    t_a, t_b = schedule.split_window
    if "alpha" in split_block:
        _check_keys(split_block, {"alpha", "epsilon"}, "params.split")
        eps = float(split_block.get("epsilon", 0.02))
        window = (t_a + eps, t_b - eps)
        v1 = float(split_block["alpha"]) / (window[1] - window[0])
        split = SplitPotential.constant(v1, 0.0, window)
        p["split"] = {"alpha": float(split_block["alpha"]), "epsilon": eps,
                      "v1": v1, "v2": 0.0, "window": list(window)}
    else:
        _check_keys(split_block, {"v1", "v2", "window"}, "params.split")
        for key in ("v1", "v2", "window"):
            _require(key in split_block, f"params.split.{key} is required")
        window = (float(split_block["window"][0]), float(split_block["window"][1]))

        def potential_of(value, where):
            # a constant, or a {times, values} table interpolated linearly
            if isinstance(value, (int, float)):
                const = float(value)
                return (lambda t: const), const
            _require(isinstance(value, dict), f"{where} must be a number or a table")
            _check_keys(value, {"times", "values"}, where)
            times = np.asarray(value.get("times"), float)
            vals = np.asarray(value.get("values"), float)
            _require(
                times.ndim == 1 and times.shape == vals.shape and len(times) >= 2,
                f"{where} table needs matching times/values lists",
            )
            return (lambda t: float(np.interp(t, times, vals))), {
                "times": times.tolist(), "values": vals.tolist(),
            }

        v1_fn, v1_echo = potential_of(split_block["v1"], "params.split.v1")
        v2_fn, v2_echo = potential_of(split_block["v2"], "params.split.v2")
        split = SplitPotential(v1=v1_fn, v2=v2_fn, window=window)
        p["split"] = {"v1": v1_echo, "v2": v2_echo, "window": list(window)}

    lattice_block = p.get("lattice", {})
    _check_keys(lattice_block, {"n", "dt"}, "params.lattice")
    n = int(lattice_block.get("n", 128))
    dt = float(lattice_block.get("dt", 2e-3))
    p["lattice"] = {"n": n, "dt": dt}
    half = 1.1 * schedule.disk_radius
    spec = LatticeSpec(
        shape=(n, n), spacing=2 * half / (n - 1), origin=(-half, -half), dt=dt,
        constants=_constants(config),
    )

    initial = dict(p.get("initial", {}))
    _check_keys(initial, {"center", "width"}, "params.initial")
    center = _vec(initial.get("center", [0.0, 0.15]), "params.initial.center")
    width = float(initial.get("width", 0.75))
    p["initial"] = {"center": list(map(float, center)), "width": width}
    u0 = initial_blob(spec, center, width)

    mode = p.setdefault("mode", "full-numeric")
    _require(mode in ("full-numeric", "analytic-phase"), "params.mode invalid")
    sample_every = int(p.setdefault("sample_every", 10))

    history = run_electric_ab(schedule, split, u0, spec, mode=mode,
                              sample_every=sample_every)
    arts: list[Path] = []
    index_rows = []
    for i, t in enumerate(history.times):
        base = out / f"density_{i:04d}"
        arts += outputs.dump_field(base, history.densities[i], spec.spacing,
                                   spec.origin, t, "density")
        index_rows.append((i, f"{t:.12g}", base.name + ".f64",
                           f"{history.total_probability(i):.17g}"))
    arts.append(
        outputs.write_csv(out / "history.csv", ["index", "time", "file", "total_probability"],
                          index_rows)
    )
    summary = {
        "norm_loss": history.norm_loss,
        "events": [list(e) for e in history.events],
        "n_samples": len(history.times),
        "split_window": list(schedule.split_window),
        "total_duration": schedule.total_duration,
    }
    spath = out / "summary.json"
    spath.write_text(json.dumps(summary, indent=2) + "\n")
    arts.append(spath)
    if make_figures:
        probs = [history.total_probability(i) for i in range(len(history.times))]
        arts.append(
            figures.save_series_figure(out / "probability.png", history.times,
                                       {"total probability": np.array(probs)},
                                       xlabel="time", ylabel="probability")
        )
        arts.append(
            figures.save_density_figure(out / "final_density.png", history.densities[-1],
                                        spec.origin, spec.spacing)
        )
    return arts


def run_recover(config, scene, out: Path, make_figures: bool) -> list[Path]:
    p = config["params"]
    _check_keys(p, {"oracle", "tol"}, "params")
    oracle_name = p.setdefault("oracle", "quadrature")
    tol = float(p.setdefault("tol", 1e-6))
    potential = ab_potential(scene, _constants(config))
    makers = {
        "quadrature": lambda: quadrature_oracle(potential, config["tolerance"]),
        "go": lambda: go_oracle(scene, potential, config["tolerance"]),
        "intensity": lambda: intensity_oracle(potential, config["tolerance"]),
    }
    _require(oracle_name in makers, f"params.oracle must be one of {sorted(makers)}")
    circuits = design_measurements(scene)
    oracle = makers[oracle_name]()
    estimate = recover(scene, oracle, circuits=circuits, tol=tol)
    rows = []
    measurements = []
    for i, c in enumerate(circuits):
        m = oracle(c)
        measurements.append(m)
        beta = m.phase if m.phase is not None else m.intensity
        kind = "phase" if m.phase is not None else "intensity"
        rows.append((i, " ".join(str(int(n)) for n in c.winding), kind, f"{beta:.17g}"))
    arts = [outputs.write_csv(out / "circuits.csv", ["circuit", "winding", "kind", "value"], rows)]
    from .recovery import FluxSystem

    system = FluxSystem(np.array([c.winding for c in circuits]), tuple(measurements))
    (out / "system.json").write_text(json.dumps(system.to_dict(), indent=2) + "\n")
    arts.append(out / "system.json")
    path = out / "estimate.json"
    path.write_text(json.dumps(estimate.to_dict(), indent=2) + "\n")
    arts.append(path)
    if make_figures:
        arts.append(
            figures.save_scene_figure(out / "circuits.png", scene,
                                      loops=[c.loop for c in circuits])
        )
    return arts


def run_compare(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        rows = outputs.compare_runs(Path(args.a), Path(args.b))
    except AblabError as exc:
        _write_error(out, exc)
        return 1
    arts = [outputs.write_csv(out / "report.csv", ["artifact", "metric", "value"], rows)]
    if not args.no_figures:
        diff_rows = [(n, v) for n, m, v in rows if m == "max_abs_density_diff"]
        if diff_rows:
            arts.append(
                figures.save_series_figure(
                    out / "report.png", np.arange(len(diff_rows)),
                    {"max |density diff|": np.array([v for _, v in diff_rows])},
                    xlabel="field index", ylabel="max abs diff", logy=True,
                )
            )
    config = {"mode": "compare", "a": str(args.a), "b": str(args.b)}
    outputs.write_manifest(out, config, time.time() - t0, arts)
    return 0


def _write_error(out: Path, exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    try:
        (out / "error.json").write_text(json.dumps(record, indent=2) + "\n")
    except OSError:
        pass
    print(f"{type(exc).__name__}: {exc}", file=sys.stderr)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ablab",
        description="Gauge-phase interference laboratory: ray tracing, flux "
        "quadrature, interference prediction, lattice verification, and flux recovery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tolerance", type=float, default=None)
        sp.add_argument("--no-figures", action="store_true")
    cp = sub.add_parser("compare")
    cp.add_argument("--a", required=True, type=Path, help="manifest.json of run A")
    cp.add_argument("--b", required=True, type=Path, help="manifest.json of run B")
    cp.add_argument("--out", required=True, type=Path)
    cp.add_argument("--no-figures", action="store_true")
    args = parser.parse_args(argv)

    if args.command == "compare":
        return run_compare(args)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        config = load_config(args.config, args)
        mode = config.get("mode", args.command)
        _require(mode == args.command,
                 f"config mode {mode!r} does not match subcommand {args.command!r}")
        config["mode"] = mode
        make_figures = not args.no_figures
        if args.command == "electric-ab":
            arts = run_electric(config, out, make_figures)
        else:
            scene = _scene(config, args.config.parent)
            config["scene"] = scene.to_dict()
            runner = {
                "trace": run_trace,
                "flux": run_flux,
                "go-predict": run_go_predict,
                "tdse-run": run_tdse,
                "two-beam": run_two_beam,
                "recover": run_recover,
            }[args.command]
            arts = runner(config, scene, out, make_figures)
    except ConfigError as exc:
        _write_error(out, exc)
        return 2
    except (AblabError, ValueError) as exc:
        _write_error(out, exc)
        return 1
    outputs.write_manifest(out, config, time.time() - t0, arts)
    return 0


if __name__ == "__main__":
    sys.exit(main())
