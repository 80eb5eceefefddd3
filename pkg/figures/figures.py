#!/usr/bin/env python3
"""Render publication-style figures from a run directory.

Reads only the CSV/JSON artifacts that `recon run` writes; the main
package is never imported, so this script works on archived run
directories with nothing installed beyond numpy + matplotlib.

    python figures.py --dir runs/e1 --kind overlay1d --out overlay.png

Kinds:
    overlay1d     truth vs reconstruction (1-D line overlay)
    conductivity  diffusion coefficient profile d(x)
    series        clean vs noisy sensor time series
    sensors2d     sensor boxes drawn over the 2-D truth field
    heatmap-pair  truth and reconstruction heat maps side by side
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Rectangle


def _load_csv(path: Path) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"required artifact missing: {path}")
    return np.atleast_2d(np.genfromtxt(path, delimiter=",", skip_header=1))


def _load_field_1d(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = _load_csv(path)
    if data.shape[1] != 2:
        raise ValueError(f"{path.name} is not a 1-D field (x,value) file")
    return data[:, 0], data[:, 1]


def _load_field_2d(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (xs, ys, values[nx, ny]) from an x,y,value CSV."""
    data = _load_csv(path)
    if data.shape[1] != 3:
        raise ValueError(f"{path.name} is not a 2-D field (x,y,value) file")
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if xs.size * ys.size != data.shape[0]:
        raise ValueError(f"{path.name} is not a full tensor grid")
    # rows are written x-major, y fastest
    vals = data[:, 2].reshape(xs.size, ys.size)
    return xs, ys, vals


def _rel_error(run_dir: Path) -> float | None:
    path = run_dir / "reconstruction.json"
    if not path.exists():
        return None
    with open(path) as fh:
        summary = json.load(fh)
    return summary.get("rel_error_if_truth_known")


def fig_overlay1d(run_dir: Path):
    x, truth = _load_field_1d(run_dir / "truth.csv")
    _, recon = _load_field_1d(run_dir / "reconstruction.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, truth, "k-", lw=1.8, label="truth")
    ax.plot(x, recon, "C3--", lw=1.8, label="reconstruction")
    ax.set_xlabel("x")
    ax.set_ylabel("u(x)")
    title = "Initial state: truth vs reconstruction"
    rel = _rel_error(run_dir)
    if rel is not None:
        title += f"  (rel. L2 error {rel:.3g})"
    ax.set_title(title, fontsize=10)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return fig


def fig_conductivity(run_dir: Path):
    x, d = _load_field_1d(run_dir / "conductivity.csv")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, d, "C0-", lw=1.8)
    ax.set_xlabel("x")
    ax.set_ylabel("d(x)")
    ax.set_title("Diffusion coefficient profile", fontsize=10)
    ax.grid(alpha=0.3)
    return fig


def fig_series(run_dir: Path):
    clean = _load_csv(run_dir / "clean.csv")
    noisy = _load_csv(run_dir / "noisy.csv")
    t = clean[:, 0]
    n_ch = clean.shape[1] - 1
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for j in range(n_ch):
        color = f"C{j % 10}"
        ax.plot(noisy[:, 0], noisy[:, j + 1], ".", ms=3, color=color,
                alpha=0.5)
        ax.plot(t, clean[:, j + 1], "-", lw=1.6, color=color,
                label=f"sensor {j + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("sensor average")
    ax.set_title("Measurements: clean (lines) vs noisy (dots)", fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.3)
    return fig


def _load_boxes(run_dir: Path) -> list[list[float]]:
    path = run_dir / "sensors.json"
    if not path.exists():
        raise FileNotFoundError(f"required artifact missing: {path}")
    with open(path) as fh:
        sensors = json.load(fh)
    if "boxes" not in sensors:
        raise ValueError("sensors.json has no 'boxes'; is this a 2-D run?")
    return sensors["boxes"]


def fig_sensors2d(run_dir: Path):
    xs, ys, truth = _load_field_2d(run_dir / "truth.csv")
    boxes = _load_boxes(run_dir)
    fig, ax = plt.subplots(figsize=(5.2, 4.6))
    mesh = ax.pcolormesh(xs, ys, truth.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="truth u0(x, y)")
    for x0, x1, y0, y1 in boxes:
        ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False,
                               edgecolor="w", lw=1.5))
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_aspect("equal")
    ax.set_title(f"Sensor layout ({len(boxes)} boxes) over the truth",
                 fontsize=10)
    return fig


def fig_heatmap_pair(run_dir: Path):
    xs, ys, truth = _load_field_2d(run_dir / "truth.csv")
    _, _, recon = _load_field_2d(run_dir / "reconstruction.csv")
    vmin = min(truth.min(), recon.min())
    vmax = max(truth.max(), recon.max())
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    for ax, vals, name in ((axes[0], truth, "truth"),
                           (axes[1], recon, "reconstruction")):
        mesh = ax.pcolormesh(xs, ys, vals.T, shading="nearest",
                             cmap="viridis", vmin=vmin, vmax=vmax)
        ax.set_xlabel("x")
        ax.set_aspect("equal")
        ax.set_title(name, fontsize=10)
    axes[0].set_ylabel("y")
    fig.colorbar(mesh, ax=axes, label="u(x, y)")
    rel = _rel_error(run_dir)
    if rel is not None:
        fig.suptitle(f"rel. L2 error {rel:.3g}", fontsize=10)
    return fig


KINDS = {
    "overlay1d": fig_overlay1d,
    "conductivity": fig_conductivity,
    "series": fig_series,
    "sensors2d": fig_sensors2d,
    "heatmap-pair": fig_heatmap_pair,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render a figure from recon run artifacts.")
    parser.add_argument("--dir", required=True, type=Path,
                        help="run directory with CSV/JSON artifacts")
    parser.add_argument("--kind", required=True, choices=sorted(KINDS),
                        help="figure kind")
    parser.add_argument("--out", required=True, type=Path,
                        help="output image path (.png)")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)

    if not args.dir.is_dir():
        parser.error(f"not a directory: {args.dir}")
    try:
        fig = KINDS[args.kind](args.dir)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    args.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(args.out, dpi=args.dpi, bbox_inches="tight")
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
