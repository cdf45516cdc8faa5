"""PNG figures for run reports (matplotlib, Agg backend, files only)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dsp import RangeDopplerMap, Spectrogram  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_range_doppler(rd: RangeDopplerMap, path, detections: Sequence = (), dynamic_db: float = 40.0) -> Path:
    db = rd.magnitude_db - rd.noise_floor_estimate
    fig, ax = plt.subplots(figsize=(7, 5))
    extent = [rd.doppler_axis[0], rd.doppler_axis[-1], rd.range_bins * rd.range_bin_size / 1e3, 0]
    im = ax.imshow(db, aspect="auto", extent=extent, vmin=0, vmax=dynamic_db, cmap="viridis", interpolation="nearest")
    for d in detections:
        ax.plot(float(rd.doppler_frequency(d.doppler_bin)), d.range / 1e3, "r+", ms=10)
    ax.set_xlabel("Doppler (Hz)")
    ax.set_ylabel("range (km)")
    ax.set_title(f"range-Doppler, t0 = {rd.t0:g} s")
    fig.colorbar(im, ax=ax, label="dB over noise")
    return _save(fig, path)


def plot_spectrogram(spec: Spectrogram, path, title: str = "", dynamic_db: float = 50.0) -> Path:
    db = spec.magnitude_db
    top = float(db.max())
    fig, ax = plt.subplots(figsize=(7, 4))
    extent = [spec.frame_times[0], spec.frame_times[-1] + spec.frame_hop, spec.frequencies[0], spec.frequencies[-1]]
    im = ax.imshow(db.T, aspect="auto", origin="lower", extent=extent, vmin=top - dynamic_db, vmax=top, cmap="magma")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("Doppler (Hz)")
    ax.set_title(title or f"range bin {spec.range_bin}")
    fig.colorbar(im, ax=ax, label="dB")
    return _save(fig, path)


def plot_dwell_sweep(rows, path) -> Path:
    cpi = np.array([r.cpi_ms for r in rows])
    ratio = np.array([r.ratio for r in rows])
    det = np.array([r.detectable for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(cpi, ratio, "-", color="0.6")
    ax.plot(cpi[det], ratio[det], "o", color="tab:blue", label="sidebands detected")
    ax.plot(cpi[~det], ratio[~det], "x", color="tab:red", label="not detected")
    ax.set_xscale("log")
    ax.set_xlabel("CPI (ms)")
    ax.set_ylabel("micro / body peak ratio")
    ax.legend()
    return _save(fig, path)


def plot_ka_sweep(points, path) -> Path:
    ka = np.array([p[0] for p in points])
    norm = np.array([p[1] for p in points])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ka, norm)
    ax.set_xlabel("ka")
    ax.set_ylabel(r"$\sigma / \pi a^2$")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def plot_tracks(pictures, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 6))
    paths: dict[int, list] = {}
    labels: dict[int, str] = {}
    for p in pictures:
        for tr in p.tracks:
            paths.setdefault(tr.id, []).append((tr.x, tr.y))
            labels[tr.id] = tr.fused_label.category.value
    for tid, pts in sorted(paths.items()):
        xy = np.array(pts) / 1e3
        ax.plot(xy[:, 0], xy[:, 1], ".-")
        ax.annotate(f"{tid} {labels[tid]}", xy[-1], fontsize=8)
    ax.plot(0, 0, "k^")
    ax.set_xlabel("east (km)")
    ax.set_ylabel("north (km)")
    ax.set_aspect("equal", adjustable="datalim")
    return _save(fig, path)
