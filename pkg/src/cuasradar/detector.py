"""Detection on range-Doppler maps: CA-CFAR, fixed SNR thresholds and DSCR."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import ncx2

from .dsp import RangeDopplerMap, to_db


@dataclass(frozen=True)
class Detection:
    range_bin: int
    doppler_bin: int  # FFT index in [0, N)
    range: float
    radial_speed: float
    snr: float
    t0: float
    beam_azimuth: float
    detector: str = "snr"
    dscr: Optional[float] = None
    azimuth: float = 0.0  # measured (monopulse) azimuth of the cell


def threshold_for(required_snr_db: float, pd: float) -> float:
    """Fixed SNR threshold (dB) realising ``pd`` for a steady tone at ``required_snr_db``.

    The threshold is the (1 - pd) quantile of signal-plus-noise power for a
    nonfluctuating target, capped at the required SNR itself.
    """
    s = 10 ** (required_snr_db / 10)
    t = ncx2.ppf(1 - pd, 2, 2 * s) / 2
    return min(required_snr_db, 10 * math.log10(t))


# single-pulse design points: >50 % Pd at 13.1 dB, 95 % Pd at 16.8 dB
PRESETS = {
    "pd50": threshold_for(13.1, 0.5),
    "pd95": threshold_for(16.8, 0.95),
}


def cfar_multiplier(pfa: float, n_train) -> np.ndarray:
    n = np.asarray(n_train, dtype=float)
    return n * (pfa ** (-1.0 / n) - 1.0)


def _local_maxima(power: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Cells of ``mask`` not exceeded by any 8-neighbour; Doppler wraps, range does not."""
    cells = np.argwhere(mask)
    if len(cells) == 0:
        return cells
    nr, nd = power.shape
    r, c = cells[:, 0], cells[:, 1]
    value = power[r, c]
    keep = np.ones(len(cells), dtype=bool)
    for dr in (-1, 0, 1):
        rr = np.clip(r + dr, 0, nr - 1)
        for dc in (-1, 0, 1):
            if dr or dc:
                keep &= value >= power[rr, (c + dc) % nd]
    return cells[keep]


def _make_detections(rd: RangeDopplerMap, cells, kind: str, dscr=None) -> list[Detection]:
    out = []
    lam = rd.wavelength
    for idx, (r, c) in enumerate(cells):
        k = int(rd.doppler_bin_of_column(c))
        freq = float(rd.doppler_frequency(k))
        az = rd.beam_azimuth if rd.bin_azimuth is None else float(rd.bin_azimuth[r])
        out.append(
            Detection(
                range_bin=int(r),
                doppler_bin=k,
                range=r * rd.range_bin_size,
                radial_speed=freq * lam / 2,
                snr=float(to_db(rd.power[r, c] / rd.noise_floor)) if rd.noise_floor > 0 else math.inf,
                t0=rd.t0,
                beam_azimuth=rd.beam_azimuth,
                detector=kind,
                dscr=None if dscr is None else float(dscr[idx]),
                azimuth=az,
            )
        )
    return out


def _notch_columns(rd: RangeDopplerMap, notch: int) -> np.ndarray:
    n = rd.doppler_bins
    keep = np.ones(n, dtype=bool)
    if notch > 0:
        centre = n // 2
        keep[max(0, centre - notch + 1) : centre + notch] = False
    return keep


def cfar_detect(
    rd: RangeDopplerMap,
    pfa: float = 1e-6,
    guard: int = 2,
    train: int = 16,
    notch: int = 0,
    fixed_threshold_db: float | None = None,
) -> list[Detection]:
    """Cell-averaging CFAR along range at each Doppler, merged to local maxima.

    ``train`` is the total number of training cells (half on each side of
    the guard band); near the map edges the available cells are used and the
    multiplier is recomputed for that count. With ``fixed_threshold_db`` the
    CFAR is replaced by a fixed threshold over the map noise floor (see
    :data:`PRESETS`). ``notch`` > 0 blanks the zero-Doppler column and
    ``notch - 1`` columns either side.
    """
    if not 0 < pfa < 1:
        raise ValueError("pfa must lie in (0, 1)")
    if train < 4:
        raise ValueError("train must be >= 4")
    half = train // 2
    p = rd.power
    nr = p.shape[0]
    if nr < 2 * (guard + half) + 1:
        raise ValueError(f"map of {nr} range bins smaller than CFAR window {2 * (guard + half) + 1}")

    if fixed_threshold_db is not None:
        mask = p >= rd.noise_floor * 10 ** (fixed_threshold_db / 10)
    else:
        csum = np.vstack([np.zeros((1, p.shape[1])), np.cumsum(p, axis=0)])
        r = np.arange(nr)
        lo_a = np.clip(r - guard - half, 0, nr)
        lo_b = np.clip(r - guard, 0, nr)
        hi_a = np.clip(r + guard + 1, 0, nr)
        hi_b = np.clip(r + guard + half + 1, 0, nr)
        total = csum[lo_b] - csum[lo_a] + csum[hi_b] - csum[hi_a]
        count = (lo_b - lo_a) + (hi_b - hi_a)
        mean = total / count[:, None]
        mask = p > cfar_multiplier(pfa, count)[:, None] * mean

    mask &= _notch_columns(rd, notch)[None, :]
    cells = _local_maxima(p, mask)
    return _make_detections(rd, cells, "snr")


def fixed_threshold_detect(rd: RangeDopplerMap, preset: str = "pd95", notch: int = 0) -> list[Detection]:
    return cfar_detect(rd, fixed_threshold_db=PRESETS[preset], notch=notch)


def dscr_detect(
    rd: RangeDopplerMap, notch_width: int = 2, threshold: float = 3.0, min_snr: float | None = None
) -> list[Detection]:
    """Doppler-domain signal-to-clutter detector.

    Per range bin the clutter level is the mean power inside +-``notch_width``
    bins of zero Doppler; cells outside the notch are declared when they
    exceed that level by ``threshold`` dB and the noise floor by ``min_snr``
    dB (default: the 50 % Pd preset).
    """
    if notch_width < 1:
        raise ValueError("notch_width must be >= 1")
    n = rd.doppler_bins
    if 2 * notch_width + 1 >= n:
        raise ValueError("notch covers the whole Doppler axis")
    if min_snr is None:
        min_snr = PRESETS["pd50"]
    p = rd.power
    centre = n // 2
    inside = np.zeros(n, dtype=bool)
    inside[centre - notch_width : centre + notch_width + 1] = True
    clutter = p[:, inside].mean(axis=1)
    ref = np.maximum(clutter, rd.noise_floor)
    mask = (p > ref[:, None] * 10 ** (threshold / 10)) & (p > rd.noise_floor * 10 ** (min_snr / 10))
    mask[:, inside] = False
    cells = _local_maxima(p, mask)
    margins = [to_db(p[r, c] / ref[r]) for r, c in cells]
    return _make_detections(rd, cells, "dscr", margins)


def measure_snr(rd: RangeDopplerMap, range_bin: int, doppler_bin: int) -> float:
    """Cell power over the noise-floor estimate, dB. ``doppler_bin`` is an FFT index."""
    if not (0 <= range_bin < rd.range_bins and 0 <= doppler_bin < rd.doppler_bins):
        raise IndexError(f"cell ({range_bin}, {doppler_bin}) outside map")
    return float(to_db(rd.power[range_bin, rd.column(doppler_bin)] / rd.noise_floor))


DETECTION_FIELDS = ("t0", "beam_az", "range_m", "speed_mps", "snr_db", "dscr_db", "detector")


def detection_row(d: Detection) -> list[str]:
    return [
        f"{d.t0:.6g}",
        f"{d.beam_azimuth:.6g}",
        f"{d.range:.6g}",
        f"{d.radial_speed:.6g}",
        f"{d.snr:.6g}",
        "" if d.dscr is None else f"{d.dscr:.6g}",
        d.detector,
    ]


def write_detections_csv(detections, path) -> None:
    lines = [",".join(DETECTION_FIELDS)]
    lines += [",".join(detection_row(d)) for d in detections]
    Path(path).write_text("\n".join(lines) + "\n")
