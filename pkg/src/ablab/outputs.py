"""Artifact files: field dumps, CSV tables, run manifests, and run comparison.

Field dumps are flat little-endian float64 binaries (row-major) with a JSON
sidecar header {shape, spacing, origin, time, kind}; kind is "density" or
"complex-interleaved" (re, im pairs).  Every CLI run writes a manifest with
the fully defaulted config echo, package versions, wall time, and a sha256
checksum per artifact, so identical configs are byte-identical and
comparable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "dump_field",
    "load_field",
    "write_csv",
    "write_probe_csv",
    "sha256_file",
    "write_manifest",
    "load_manifest",
    "compare_runs",
]


def dump_field(base: Path | str, array: np.ndarray, spacing: float, origin, time: float,
               kind: str = "density") -> list[Path]:
    """Write <base>.f64 and <base>.json; returns the written paths."""
    base = Path(base)
    if kind == "density":
        flat = np.ascontiguousarray(array, dtype="<f8")
    elif kind == "complex-interleaved":
        cplx = np.ascontiguousarray(array, dtype=complex)
        flat = np.empty(cplx.shape + (2,), dtype="<f8")
        flat[..., 0] = cplx.real
        flat[..., 1] = cplx.imag
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    bin_path = base.with_suffix(".f64")
    bin_path.write_bytes(flat.tobytes(order="C"))
    header = {
        "shape": list(array.shape),
        "spacing": float(spacing),
        "origin": [float(v) for v in origin],
        "time": float(time),
        "kind": kind,
    }
    hdr_path = base.with_suffix(".json")
    hdr_path.write_text(json.dumps(header, indent=2) + "\n")
    return [bin_path, hdr_path]


def load_field(base: Path | str) -> tuple[np.ndarray, dict]:
    base = Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    raw = np.frombuffer(base.with_suffix(".f64").read_bytes(), dtype="<f8")
    shape = tuple(header["shape"])
    if header["kind"] == "density":
        return raw.reshape(shape).copy(), header
    if header["kind"] == "complex-interleaved":
        pairs = raw.reshape(shape + (2,))
        return (pairs[..., 0] + 1j * pairs[..., 1]).copy(), header
    raise DataError(f"unknown field kind {header['kind']!r}")


def write_csv(path: Path | str, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def write_probe_csv(path: Path | str, records) -> Path:
    return write_csv(path, ["step", "time", "probe_name", "value"],
                     [(s, f"{t:.12g}", name, f"{v:.17g}") for s, t, name, v in records])


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path | str, config: dict, wall_time: float,
                   artifacts: list[Path]) -> Path:
    """Checksummed run record; the manifest itself is excluded from checksums."""
    out_dir = Path(out_dir)
    from . import __version__

    manifest = {
        "config": config,
        "versions": {
            "ablab": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall_time,
        "outputs": {p.name: sha256_file(p) for p in sorted(artifacts, key=lambda q: q.name)},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_manifest(path: Path | str) -> dict:
    return json.loads(Path(path).read_text())


def compare_runs(manifest_a: Path | str, manifest_b: Path | str) -> list[tuple]:
    """Rows (artifact, metric, value) comparing two runs' shared outputs.

    Field dumps yield max and L2 density differences; JSON records with a
    fringe_phase / alpha entry yield phase deltas.  Raises DataError when a
    shared dump has mismatched grids.
    """
    ma, mb = Path(manifest_a), Path(manifest_b)
    da, db = load_manifest(ma), load_manifest(mb)
    dir_a, dir_b = ma.parent, mb.parent
    rows: list[tuple] = []
    shared = sorted(set(da["outputs"]) & set(db["outputs"]))
    for name in shared:
        rows.append((name, "identical", int(da["outputs"][name] == db["outputs"][name])))
    for name in shared:
        if name.endswith(".f64"):
            base_a, base_b = (dir_a / name).with_suffix(""), (dir_b / name).with_suffix("")
            fa, ha = load_field(base_a)
            fb, hb = load_field(base_b)
            if ha["shape"] != hb["shape"] or ha["kind"] != hb["kind"]:
                raise DataError(f"incompatible field dumps for {name}")
            if ha["kind"] == "complex-interleaved":
                fa, fb = np.abs(fa) ** 2, np.abs(fb) ** 2
            diff = fa - fb
            spacing = ha["spacing"]
            rows.append((name, "max_abs_density_diff", float(np.max(np.abs(diff)))))
            rows.append(
                (name, "l2_density_diff", float(np.sqrt(np.sum(diff**2)) * spacing))
            )
        elif name.endswith(".json"):
            ra = json.loads((dir_a / name).read_text())
            rb = json.loads((dir_b / name).read_text())
            if isinstance(ra, dict) and isinstance(rb, dict):
                for key in ("fringe_phase", "alpha"):
                    if key in ra and key in rb:
                        delta = float(ra[key]) - float(rb[key])
                        delta = (delta + np.pi) % (2 * np.pi) - np.pi
                        rows.append((name, f"{key}_delta_wrapped", delta))
    return rows
