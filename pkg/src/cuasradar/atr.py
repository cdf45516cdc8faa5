"""Recognition features and the rule-based target classifier.

Features come from a spectrogram of the detected cell's slow-time record.
Its frame-averaged spectrum carries the body line, the micro-Doppler
sidebands and the JEM comb; the frame-to-frame behaviour carries line
stability, bird flapping and the bird-feet line.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import gamma

from .detector import Detection
from .dsp import RangeDopplerMap, Spectrogram, noise_floor, window_taps
from .echo_synth import FLAP_SPEED_EXCURSION, single_pulse_snr_linear
from .scenario import LinkBudget, RadarParams


class Category(str, enum.Enum):
    MULTI_ROTOR = "MultiRotorDrone"
    FIXED_WING = "FixedWingDrone"
    VTOL_HYBRID = "VtolHybridDrone"
    LARGE_BIRD = "LargeBird"
    SMALL_BIRD = "SmallBird"
    VEHICLE = "Vehicle"
    SHIP = "Ship"
    HELICOPTER = "Helicopter"
    PEDESTRIAN = "Pedestrian"
    CLUTTER = "Clutter"
    UNKNOWN = "Unknown"


DRONES = (Category.MULTI_ROTOR, Category.FIXED_WING, Category.VTOL_HYBRID)
BIRDS = (Category.LARGE_BIRD, Category.SMALL_BIRD)


@dataclass(frozen=True)
class TargetCategory:
    category: Category
    confidence: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")
        if self.category is Category.UNKNOWN and self.confidence != 0.0:
            raise ValueError("Unknown carries confidence 0")


UNKNOWN = TargetCategory(Category.UNKNOWN, 0.0)


@dataclass(frozen=True)
class ClassifierThresholds:
    """Tunable rule thresholds; defaults ship in ``data/thresholds.json``."""

    micro_present: float = 0.01  # peak sideband / body power
    min_rotation_hz: float = 40.0
    min_flap_hz: float = 0.5
    max_flap_hz: float = 20.0
    flap_min_depth: float = 0.3
    flap_min_prominence: float = 8.0
    instability: float = 0.25
    stable_cv: float = 0.3
    stable_fraction: float = 0.08
    appendage_persistence: float = 0.3
    stability_window: int = 8
    helicopter_blade_m: float = 1.0
    ship_min_rcs: float = 10.0
    ship_max_speed: float = 20.0
    bird_max_rcs: float = 1.0
    clutter_max_speed: float = 0.5
    vehicle_min_rcs: float = 1.0
    blade_count_prior: int = 2
    jem_peak_margin_db: float = 6.0
    jem_similar_db: float = 20.0
    dynamic_range_db: float = 80.0
    sideband_pfa: float = 1e-6

    @classmethod
    def from_json(cls, text: str) -> "ClassifierThresholds":
        doc = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def default_thresholds() -> ClassifierThresholds:
    path = Path(__file__).with_name("data") / "thresholds.json"
    return ClassifierThresholds.from_json(path.read_text())


@dataclass(frozen=True)
class FeatureVector:
    body_speed: float = 0.0
    rcs_estimate: float = 0.0
    micro_body_ratio: float = 0.0
    md_bandwidth: float = 0.0
    jem_spacing: float = 0.0
    jem_line_count: int = 0
    rotation_rate_estimate: float = 0.0
    blade_count_estimate: int = 0
    flap_rate_estimate: float = 0.0
    appendage_flag: bool = False
    md_instability: float = 0.0
    stable_fraction: float = 0.0
    blade_length_estimate: float = 0.0
    body_doppler: float = 0.0


@dataclass(frozen=True)
class KineticFeatures:
    mean_speed: float
    speed_variance: float
    heading_change_rate: float
    acceleration: float
    track_duration: float


# --------------------------------------------------------------------------
# JEM comb


MERGE_CELLS = 4  # peaks closer than this many resolution cells are one line


def _parabolic(y: np.ndarray, k: int) -> float:
    """Sub-bin offset of a peak at ``k`` from a parabola through 3 points."""
    if k <= 0 or k >= len(y) - 1:
        return 0.0
    a, b, c = y[k - 1], y[k], y[k + 1]
    den = a - 2 * b + c
    return 0.0 if den == 0 else 0.5 * (a - c) / den


def _spectral_peaks(spectrum, floor: float, margin_db: float, similar_db: float):
    s = np.asarray(spectrum, dtype=float)
    if len(s) < 3:
        return np.array([], dtype=int)
    inner = (s[1:-1] > s[:-2]) & (s[1:-1] >= s[2:])
    idx = np.nonzero(inner)[0] + 1
    idx = idx[s[idx] > floor * 10 ** (margin_db / 10)]
    if len(idx):
        idx = idx[s[idx] >= s[idx].max() * 10 ** (-similar_db / 10)]
    return idx


def _merge_close(pos: np.ndarray, power: np.ndarray, min_sep: float):
    """Merge peaks closer than ``min_sep`` into their power-weighted centroid."""
    order = np.argsort(pos)
    pos, power = pos[order], power[order]
    groups = [[0]]
    for i in range(1, len(pos)):
        if pos[i] - pos[groups[-1][-1]] < min_sep:
            groups[-1].append(i)
        else:
            groups.append([i])
    return np.array([np.average(pos[g], weights=power[g]) for g in groups])


def _jem_comb(spectrum, bin_hz: float, resolution_hz: float, floor: float | None, margin_db: float, similar_db: float):
    """Return (spacing, peak count, lines in the comb)."""
    s = np.asarray(spectrum, dtype=float)
    if floor is None:
        floor = float(np.median(s)) / math.log(2)
    idx = _spectral_peaks(s, floor, margin_db, similar_db)
    count = len(idx)
    if count < 3:
        return 0.0, count, 0
    db = 10 * np.log10(np.maximum(s, 1e-300))
    pos = np.array([(k + _parabolic(db, k)) * bin_hz for k in idx])
    # split lines from a wandering rotation rate count once
    pos = _merge_close(pos, s[idx], MERGE_CELLS * resolution_hz)
    if len(pos) < 3:
        return 0.0, count, 0
    gaps = np.diff(pos)
    support = np.array([np.sum(np.abs(gaps - g) <= resolution_hz) for g in gaps])
    best = int(np.argmax(support))
    if support[best] < 2:
        return 0.0, count, 0
    agree = np.abs(gaps - gaps[best]) <= resolution_hz
    return float(np.median(gaps[agree])), count, int(agree.sum()) + 1


def jem_line_spacing(
    doppler_spectrum,
    bin_hz: float = 1.0,
    resolution_hz: float | None = None,
    floor: float | None = None,
    margin_db: float = 6.0,
    similar_db: float = 20.0,
) -> tuple[float, int]:
    """Spacing (Hz) of equally spaced, similar-amplitude spectral lines.

    Peaks are local maxima more than ``margin_db`` above the noise floor and
    within ``similar_db`` of the strongest peak; peaks closer than
    :data:`MERGE_CELLS` resolution cells are merged. The spacing is the
    median of the largest group of adjacent gaps that agree to within one
    resolution cell, reported only when at least three peaks agree;
    otherwise ``(0, peak_count)``.
    """
    s = np.asarray(doppler_spectrum, dtype=float)
    if len(s) < 8:
        raise ValueError("spectrum needs at least 8 bins")
    spacing, count, _ = _jem_comb(s, bin_hz, resolution_hz or bin_hz, floor, margin_db, similar_db)
    return spacing, count


def _window_half_width(window: str, n: int, drop_db: float, zero_pad: int) -> float:
    """Half-width (in natural bins) of a window's main lobe at ``drop_db`` below its peak."""
    nfft = n * max(zero_pad, 16)
    resp = np.abs(np.fft.fft(window_taps(window, n), nfft)) ** 2
    resp = resp / resp[0]
    level = 10 ** (-drop_db / 10)
    k = int(np.argmax(resp < level))
    return k * n / nfft


def ridge_excursion(
    spec: Spectrogram, body_doppler: float, drop_db: float = 10.0, window: str = "hann", exclude_hz: float = 0.0
) -> float:
    """Peak micro-Doppler excursion (Hz) of the spectrogram ridge around the body line.

    In every frame the outermost cell within ``drop_db`` of the frame's
    strongest sideband cell marks the ridge edge; the edge is pulled in by
    the window's own half-width at that level. Cells within ``exclude_hz`` of
    the body line are ignored when finding the reference level.
    """
    freqs = spec.frequencies
    offset = np.abs(freqs - body_doppler)
    df = float(freqs[1] - freqs[0])
    cell = df * len(freqs) / spec.window_length  # natural resolution, Hz
    outside = offset > exclude_hz
    if not outside.any():
        return 0.0
    side = spec.power[:, outside]
    ref = side.max(axis=1, keepdims=True)
    hot = side >= ref * 10 ** (-drop_db / 10)
    edge = np.where(hot, offset[outside][None, :], 0.0).max(axis=1)
    zero_pad = max(1, round(len(freqs) / spec.window_length))
    spread = _window_half_width(window, spec.window_length, drop_db, zero_pad) * cell
    return float(max(edge.max() - spread, 0.0))


def invert_blade_length(peak_excursion: float, rotation_rate: float, wavelength: float, alpha: float, beta: float) -> float:
    """Blade length from the micro-Doppler excursion of the tip (rotation_rate in rad/s)."""
    if rotation_rate <= 0:
        raise ValueError("rotation_rate must be positive")
    geom = math.cos(alpha) * math.cos(beta)
    if abs(geom) < 1e-9:
        raise ValueError("geometry unobservable: cos(alpha) * cos(beta) = 0")
    return abs(peak_excursion) * wavelength / (rotation_rate * abs(geom))


# --------------------------------------------------------------------------
# kinetics


def kinetic_features(track_points: Sequence) -> KineticFeatures:
    """Finite-difference speed, heading and acceleration statistics of a trace.

    ``track_points`` holds ``(t, position, speed)`` tuples; positions may be
    2-D or 3-D, only the horizontal components enter the heading.
    """
    if len(track_points) < 3:
        raise ValueError("insufficient trace: need at least 3 points")
    t = np.array([p[0] for p in track_points], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("trace times must be strictly increasing")
    pos = np.array([np.asarray(p[1], dtype=float)[:2] for p in track_points])
    dt = np.diff(t)
    vel = np.diff(pos, axis=0) / dt[:, None]
    speed = np.linalg.norm(vel, axis=1)
    heading = np.unwrap(np.arctan2(vel[:, 0], vel[:, 1]))
    t_mid = 0.5 * (t[1:] + t[:-1])
    dtm = np.diff(t_mid)
    heading_rate = np.abs(np.diff(heading)) / dtm
    accel = np.linalg.norm(np.diff(vel, axis=0), axis=1) / dtm
    return KineticFeatures(
        mean_speed=float(speed.mean()),
        speed_variance=float(speed.var()),
        heading_change_rate=float(heading_rate.mean()),
        acceleration=float(accel.mean()),
        track_duration=float(t[-1] - t[0]),
    )


# --------------------------------------------------------------------------
# feature extraction


_MAIN_LOBE_BINS = {"hann": 2.0, "hamming": 2.0, "blackman": 3.0, "blackmanharris": 4.0, "nuttall": 4.0}


def rcs_from_map(det: Detection, rd: RangeDopplerMap, radar: RadarParams, budget: LinkBudget) -> float:
    """Invert the radar equation from the detection cell's measured power."""
    power = rd.power[det.range_bin, rd.column(det.doppler_bin)]
    # a noiseless map has no floor; the cell power is then pure signal
    post = max(power / rd.noise_floor - 1.0, 1e-12) if rd.noise_floor > 0 else float(power)
    w = window_taps(rd.window, rd.doppler_bins)
    single = post * np.sum(w**2) / np.sum(w) ** 2
    rng = max(det.range, 0.5 * rd.range_bin_size)
    return float(single / single_pulse_snr_linear(budget, radar, 1.0, rng))


def _excess_std(power: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell std and mean of the signal part of ``power`` (frames x cells).

    A steady line of mean power ``m`` in complex Gaussian noise of power
    ``floor`` has variance ``2 m floor - floor**2``; that share is removed so
    weak stable lines do not read as unstable.
    """
    mean = power.mean(axis=0)
    var = power.var(axis=0) - (2 * mean * floor - floor**2)
    return np.sqrt(np.maximum(var, 0.0)), np.maximum(mean - floor, 0.0)


def _windowed_variability(power: np.ndarray, floor: float, window: int) -> float:
    """Mean over sliding ``window``-frame spans of summed excess std / summed excess mean."""
    w = max(1, min(window, len(power)))
    zero = np.zeros((1, power.shape[1]))
    c1 = np.vstack([zero, np.cumsum(power, axis=0)])
    c2 = np.vstack([zero, np.cumsum(power * power, axis=0)])
    mean = (c1[w:] - c1[:-w]) / w
    var = (c2[w:] - c2[:-w]) / w - mean**2 - (2 * mean * floor - floor**2)
    std = np.sqrt(np.maximum(var, 0.0)).sum(axis=1)
    excess = np.maximum(mean - floor, 0.0).sum(axis=1)
    ok = excess > 0
    return float(np.mean(std[ok] / excess[ok])) if ok.any() else 0.0


def _sideband_threshold(looks: float, pfa: float) -> float:
    return float(gamma.ppf(1 - pfa, looks) / looks)


def _flap_rate(band_power: np.ndarray, frame_rate: float, th: ClassifierThresholds) -> float:
    x = np.asarray(band_power, dtype=float)
    if len(x) < 8 or x.mean() <= 0:
        return 0.0
    depth = x.std() / x.mean()
    if depth < th.flap_min_depth:
        return 0.0
    y = (x - x.mean()) * np.hanning(len(x))
    nfft = max(4096, 1 << int(math.ceil(math.log2(len(x) * 16))))
    spec = np.abs(np.fft.rfft(y, nfft)) ** 2
    freqs = np.fft.rfftfreq(nfft, d=1 / frame_rate)
    band = (freqs >= th.min_flap_hz) & (freqs <= min(th.max_flap_hz, frame_rate / 2))
    if not band.any():
        return 0.0
    k = int(np.argmax(np.where(band, spec, -np.inf)))
    ref = np.median(spec[(freqs >= th.min_flap_hz) & (freqs <= frame_rate / 2)])
    if ref <= 0 or spec[k] / ref < th.flap_min_prominence:
        return 0.0
    db = 10 * np.log10(np.maximum(spec, 1e-300))
    return float((k + _parabolic(db, k)) * (freqs[1] - freqs[0]))


def extract_features(
    det: Detection,
    spec: Spectrogram,
    rd: RangeDopplerMap,
    radar: RadarParams,
    budget: LinkBudget,
    thresholds: ClassifierThresholds | None = None,
    notch_hz: float = 0.0,
) -> FeatureVector:
    """Recognition features of one detection.

    ``spec`` is the spectrogram of the detection's range cell; ``notch_hz``
    blanks the clutter region around zero Doppler.
    """
    th = thresholds or ClassifierThresholds()
    if spec.range_bin >= 0 and spec.range_bin != det.range_bin:
        raise ValueError(f"spectrogram of range bin {spec.range_bin} does not match detection bin {det.range_bin}")
    lam = radar.wavelength
    frames = spec.power
    freqs = spec.frequencies
    df = float(freqs[1] - freqs[0])
    resolution = radar.prf / spec.window_length
    mean_spec = frames.mean(axis=0)
    floor = noise_floor(frames)
    rcs = rcs_from_map(det, rd, radar, budget)

    # body line: strongest line of the cell outside the clutter notch
    notch = np.abs(freqs) < notch_hz
    k_body = int(np.argmax(np.where(notch, -np.inf, mean_spec))) if not notch.all() else int(np.argmax(mean_spec))
    body_power = float(mean_spec[k_body])
    f_body = float(freqs[k_body] + _parabolic(10 * np.log10(np.maximum(mean_spec, 1e-300)), k_body) * df)

    lobe = _MAIN_LOBE_BINS.get("blackmanharris", 4.0) * resolution
    body_region = np.abs(freqs - freqs[k_body]) <= lobe
    looks = max(1.0, frames.shape[0] * spec.frame_hop * radar.prf / spec.window_length)
    detect_level = floor * _sideband_threshold(looks, th.sideband_pfa)
    side = (
        ~body_region
        & ~notch
        & (mean_spec > detect_level)
        & (mean_spec > body_power * 10 ** (-th.dynamic_range_db / 10))
    )

    ratio, bandwidth = 0.0, 0.0
    if side.any() and body_power > floor:
        ratio = float((mean_spec[side].max() - floor) / (body_power - floor))
        bandwidth = float(np.max(np.abs(freqs[side] - f_body)))

    # JEM comb on the spectrum with the body line and the notch blanked
    masked = np.where(body_region | notch, floor, mean_spec)
    spacing, _, comb = _jem_comb(masked, df, resolution, floor, th.jem_peak_margin_db, th.jem_similar_db)
    if ratio < th.micro_present * 1e-3:
        spacing, comb = 0.0, 0
    blades = th.blade_count_prior if spacing > 0 else 0
    rotation = spacing / blades if blades else 0.0
    blade_len = 0.0
    if rotation > 0 and bandwidth > 0:
        blade_len = invert_blade_length(bandwidth, 2 * math.pi * rotation, lam, 0.0, 0.0)

    # frame-to-frame stability of the sidebands
    instability, stable = 0.0, 0.0
    if side.any():
        sub = frames[:, side]
        instability = _windowed_variability(sub, floor, th.stability_window)
        std, excess = _excess_std(sub, floor)
        if excess.sum() > 0:
            steady = std < th.stable_cv * excess
            stable = float(excess[steady].sum() / excess.sum())

    # bird cues: amplitude modulation of the body band, persistent feet line
    band = np.abs(freqs - f_body) <= 2 * (FLAP_SPEED_EXCURSION + 1.0) / lam
    flap = _flap_rate(frames[:, band].sum(axis=1), 1.0 / spec.frame_hop, th)
    body_track = frames[:, k_body]
    appendage = bool(
        flap > 0 and np.percentile(body_track, 20) >= th.appendage_persistence * body_track.mean()
    )

    return FeatureVector(
        body_speed=abs(f_body) * lam / 2,
        rcs_estimate=rcs,
        micro_body_ratio=ratio,
        md_bandwidth=bandwidth,
        jem_spacing=spacing,
        jem_line_count=comb if spacing > 0 else 0,
        rotation_rate_estimate=rotation,
        blade_count_estimate=blades,
        flap_rate_estimate=flap,
        appendage_flag=appendage,
        md_instability=instability,
        stable_fraction=stable,
        blade_length_estimate=blade_len,
        body_doppler=f_body,
    )


# --------------------------------------------------------------------------
# classification


def _verdict(category: Category, checks: Sequence[bool]) -> TargetCategory:
    return TargetCategory(category, sum(bool(c) for c in checks) / len(checks))


def classify(
    f: FeatureVector, k: Optional[KineticFeatures] = None, thresholds: ClassifierThresholds | None = None
) -> TargetCategory:
    """Rule tree over signal signatures, refined by kinetics when a trace exists."""
    th = thresholds or ClassifierThresholds()
    speed = f.body_speed if k is None else max(f.body_speed, k.mean_speed)
    micro = f.micro_body_ratio >= th.micro_present
    jem = f.jem_spacing > 0 and f.rotation_rate_estimate >= th.min_rotation_hz
    flapping = th.min_flap_hz <= f.flap_rate_estimate <= th.max_flap_hz

    if micro and jem:
        common = [micro, jem, not flapping or f.jem_line_count >= 3, f.rcs_estimate < th.ship_min_rcs]
        if f.blade_length_estimate > th.helicopter_blade_m:
            return _verdict(Category.HELICOPTER, common)
        unstable = f.md_instability >= th.instability
        stable = f.stable_fraction >= th.stable_fraction
        if unstable and stable:
            return _verdict(Category.VTOL_HYBRID, common + [unstable, stable])
        if unstable:
            return _verdict(Category.MULTI_ROTOR, common + [unstable, not stable])
        return _verdict(Category.FIXED_WING, common + [not unstable, stable])

    if flapping and not jem:
        checks = [flapping, not jem, f.rcs_estimate <= th.bird_max_rcs]
        if k is not None:
            checks.append(k.mean_speed < 30.0)
        return _verdict(Category.LARGE_BIRD if f.appendage_flag else Category.SMALL_BIRD, checks)

    if not micro and f.rcs_estimate > th.ship_min_rcs and speed <= th.ship_max_speed:
        checks = [not micro, f.rcs_estimate > th.ship_min_rcs, speed <= th.ship_max_speed, not flapping]
        if k is not None:
            checks.append(k.heading_change_rate < 0.1)
        return _verdict(Category.SHIP, checks)

    if not micro and f.rcs_estimate > 0 and speed < th.clutter_max_speed:
        return _verdict(Category.CLUTTER, [not micro, speed < th.clutter_max_speed, not flapping])

    if not micro and f.rcs_estimate >= th.vehicle_min_rcs and speed > th.ship_max_speed:
        return _verdict(Category.VEHICLE, [not micro, f.rcs_estimate >= th.vehicle_min_rcs, not flapping])

    return UNKNOWN
