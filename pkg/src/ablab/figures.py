"""Figure rendering for CLI reports (PNG files next to the delimited data)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .geometry import Arc, Scene

__all__ = [
    "save_scene_figure",
    "save_density_figure",
    "save_screen_figure",
    "save_series_figure",
]


def _draw_scene(ax, scene: Scene):
    for o in scene.obstacles:
        ax.add_patch(
            plt.Circle(o.center, o.radius, facecolor="0.82", edgecolor="k", zorder=2)
        )
        if o.flux:
            ax.annotate(
                f"{o.flux:.3g}", o.center, ha="center", va="center", fontsize=8, zorder=3
            )
    lo, hi = scene.bound.lo, scene.bound.hi
    ax.add_patch(
        plt.Rectangle(lo, *(hi - lo), fill=False, edgecolor="k", linestyle="--", lw=0.8)
    )
    ax.set_xlim(lo[0] - 0.5, hi[0] + 0.5)
    ax.set_ylim(lo[1] - 0.5, hi[1] + 0.5)
    ax.set_aspect("equal")


def save_scene_figure(path: Path | str, scene: Scene, polylines=(), loops=(), labels=()) -> Path:
    """Scene with optional ray polylines ((n,2) arrays) and loops."""
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_scene(ax, scene)
    for i, pts in enumerate(polylines):
        pts = np.asarray(pts)
        label = labels[i] if i < len(labels) else None
        ax.plot(pts[:, 0], pts[:, 1], "-o", ms=2.5, lw=1.2, label=label, zorder=4)
    for loop in loops:
        for e in loop.elements:
            if isinstance(e, Arc):
                ts = np.linspace(0, 1, 128)
                pts = np.array([e.point(t) for t in ts])
            else:
                pts = np.array([e.start, e.end])
            ax.plot(pts[:, 0], pts[:, 1], "-", color="tab:purple", lw=1.0, zorder=4)
    if labels:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_density_figure(path: Path | str, density: np.ndarray, origin, spacing: float,
                        scene: Scene | None = None, title: str = "") -> Path:
    """Heat map of |u|^2 on the lattice (array indexed [ix, iy])."""
    nx, ny = density.shape
    extent = (
        origin[0], origin[0] + spacing * (nx - 1),
        origin[1], origin[1] + spacing * (ny - 1),
    )
    fig, ax = plt.subplots(figsize=(6.4, 5.6))
    im = ax.imshow(density.T, origin="lower", extent=extent, cmap="magma", aspect="equal")
    if scene is not None:
        for o in scene.obstacles:
            ax.add_patch(plt.Circle(o.center, o.radius, fill=False, edgecolor="w", lw=0.8))
    fig.colorbar(im, ax=ax, label=r"$|u|^2$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_screen_figure(path: Path | str, s: np.ndarray, density: np.ndarray,
                       kappa: float, fitted_phase: float, contrast: float,
                       background: float) -> Path:
    """Screen cut with the fitted fringe model overlaid."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(s, density, "k.", ms=3, label="screen density")
    model = background - contrast * np.cos(kappa * s + fitted_phase)
    ax.plot(s, model, "-", color="tab:red", lw=1.2, label="fringe fit")
    ax.set_xlabel("screen offset")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def save_series_figure(path: Path | str, x, series: dict[str, np.ndarray],
                       xlabel: str = "", ylabel: str = "", logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, y in series.items():
        ax.plot(x, y, lw=1.2, label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
