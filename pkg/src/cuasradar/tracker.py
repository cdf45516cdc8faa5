"""Classify-while-scan frame pipeline, track association and label fusion.

Each frame synthesises one CPI, detects, classifies every detection from
its own cell's micro-Doppler record and only then updates the tracks, so a
detection always carries the category computed in the frame it was seen.
"""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .atr import (
    UNKNOWN,
    Category,
    ClassifierThresholds,
    FeatureVector,
    KineticFeatures,
    TargetCategory,
    classify,
    extract_features,
    kinetic_features,
)
from .detector import Detection, cfar_detect, dscr_detect, fixed_threshold_detect
from .dsp import RangeDopplerMap, range_doppler, spectrogram
from .echo_synth import synth_cell_series, synth_cpi
from .scenario import Scenario

TAI_WINDOW = 10
RETIRE_AFTER = 3


@dataclass
class Track:
    id: int
    position: np.ndarray  # x east, y north (m)
    velocity: np.ndarray  # m/s
    last_t: float
    points: list = field(default_factory=list)  # (t, (x, y), speed)
    per_scan_labels: list = field(default_factory=list)
    fused_label: TargetCategory = UNKNOWN
    misses: int = 0
    drt_history: list = field(default_factory=list)

    def predicted(self, t: float) -> np.ndarray:
        return self.position + self.velocity * (t - self.last_t)

    @property
    def speed(self) -> float:
        return float(np.hypot(*self.velocity))

    def kinetics(self) -> Optional[KineticFeatures]:
        return kinetic_features(self.points) if len(self.points) >= 3 else None


def detection_position(det: Detection) -> np.ndarray:
    """Horizontal position of a detection from range and measured azimuth."""
    return np.array([det.range * math.sin(det.azimuth), det.range * math.cos(det.azimuth)])


# --------------------------------------------------------------------------
# association and filtering


@dataclass(frozen=True)
class Assignment:
    pairs: tuple  # (detection index, track index)
    new_detections: tuple
    missed_tracks: tuple


def associate(detections: Sequence[Detection], tracks: Sequence[Track], gate_radius: float = 50.0, t: float | None = None) -> Assignment:
    """Greedy nearest-neighbour assignment on predicted track positions."""
    if gate_radius <= 0:
        raise ValueError("gate_radius must be > 0")
    cand = []
    for i, d in enumerate(detections):
        p = detection_position(d)
        when = d.t0 if t is None else t
        for j, tr in enumerate(tracks):
            dist = float(np.hypot(*(p - tr.predicted(when))))
            if dist <= gate_radius:
                cand.append((dist, i, j))
    cand.sort()
    used_d, used_t, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        pairs.append((i, j))
    pairs.sort()
    return Assignment(
        pairs=tuple(pairs),
        new_detections=tuple(i for i in range(len(detections)) if i not in used_d),
        missed_tracks=tuple(j for j in range(len(tracks)) if j not in used_t),
    )


def gh_update(track: Track, det: Detection, g: float, h: float, dt: float) -> Track:
    """One g-h filter step; returns a new track."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not (0 <= g <= 1 and 0 <= h <= 2):
        raise ValueError("gains out of range: need 0 <= g <= 1, 0 <= h <= 2")
    predicted = track.position + track.velocity * dt
    residual = detection_position(det) - predicted
    return replace(
        track,
        position=predicted + g * residual,
        velocity=track.velocity + (h / dt) * residual,
        last_t=track.last_t + dt,
        points=list(track.points),
        per_scan_labels=list(track.per_scan_labels),
        drt_history=list(track.drt_history),
    )


def tai_label(per_scan_labels: Sequence[TargetCategory], window: int = TAI_WINDOW) -> TargetCategory:
    """Majority vote over the last ``window`` labels; ties go to the most recent."""
    recent = list(per_scan_labels)[-window:]
    if not recent:
        return UNKNOWN
    votes = Counter(lab.category for lab in recent)
    top = max(votes.values())
    for lab in reversed(recent):
        if votes[lab.category] == top:
            winner = lab.category
            break
    if winner is Category.UNKNOWN:
        return UNKNOWN
    return TargetCategory(winner, top / len(recent))


@dataclass(frozen=True)
class DrtBreakdown:
    total: float  # ms
    stages: tuple  # (stage, ms since previous stage)


def drt_accounting(stage_timestamps) -> DrtBreakdown:
    """Echo-to-display lag from ordered ``(stage, t_ms)`` pairs or a mapping."""
    items = list(stage_timestamps.items()) if isinstance(stage_timestamps, dict) else list(stage_timestamps)
    if not items:
        return DrtBreakdown(0.0, ())
    times = [float(t) for _, t in items]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("stage timestamps must be monotone non-decreasing")
    stages = tuple((name, b - a) for (name, b), a in zip(items[1:], times))
    return DrtBreakdown(times[-1] - times[0], stages)


# --------------------------------------------------------------------------
# frame pipeline


@dataclass(frozen=True)
class FrameConfig:
    detector: str = "cfar"  # cfar | dscr | pd50 | pd95
    window: str = "hann"
    pfa: float = 1e-6
    guard: int = 2
    train: int = 16
    notch: int = 0  # zero-Doppler columns blanked (0 = off)
    dscr_threshold: float = 3.0
    gate_radius: float = 50.0
    g: float = 0.5
    h: float = 0.2
    frame_interval: float = 1.0
    recognition_pulses: int = 5000
    atr_window: Optional[int] = None  # default 4 x pulses_per_cpi
    atr_hop: Optional[int] = None  # default window / 4
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)

    def atr_params(self, pulses_per_cpi: int) -> tuple[int, int]:
        window = self.atr_window or 4 * pulses_per_cpi
        window = min(window, self.recognition_pulses)
        return window, self.atr_hop or max(1, window // 4)


@dataclass(frozen=True)
class ClassifiedDetection:
    detection: Detection
    category: TargetCategory
    features: FeatureVector
    track_id: int


@dataclass(frozen=True)
class TrackSnapshot:
    id: int
    x: float
    y: float
    speed: float
    fused_label: TargetCategory
    misses: int


@dataclass(frozen=True)
class FramePicture:
    index: int
    t0: float
    detections: tuple
    tracks: tuple
    drt: float  # ms, echo of the first pulse to display on the simulated timeline
    stage_times: tuple = ()  # (stage, wall-clock s) in execution order
    warnings: tuple = ()

    @property
    def processing_ms(self) -> float:
        if len(self.stage_times) < 2:
            return 0.0
        return 1e3 * (self.stage_times[-1][1] - self.stage_times[0][1])

    def to_dict(self) -> dict:
        def cat(c):
            return {"category": c.category.value, "confidence": round(c.confidence, 6)}

        return {
            "frame": self.index,
            "t0": self.t0,
            "drt_ms": self.drt,
            "processing_ms": round(self.processing_ms, 3),
            "detections": [
                {
                    "track_id": cd.track_id,
                    "range_m": cd.detection.range,
                    "azimuth_rad": cd.detection.azimuth,
                    "speed_mps": cd.detection.radial_speed,
                    "snr_db": round(cd.detection.snr, 6),
                    **cat(cd.category),
                }
                for cd in self.detections
            ],
            "tracks": [
                {"id": tr.id, "x": round(tr.x, 6), "y": round(tr.y, 6), "speed": round(tr.speed, 6), **cat(tr.fused_label)}
                for tr in self.tracks
            ],
            "warnings": list(self.warnings),
        }


def group_detections(detections: Sequence[Detection]) -> list[Detection]:
    """Keep the strongest peak among detections within one range bin of each other.

    A bladed target's JEM flashes rise above threshold at many Doppler bins
    of its own range cell; they are one object. Objects two or more range
    bins apart stay separate.
    """
    keep = []
    for d in sorted(detections, key=lambda d: (-d.snr, d.range_bin, d.doppler_bin)):
        if any(abs(d.range_bin - k.range_bin) <= 1 for k in keep):
            continue
        keep.append(d)
    return sorted(keep, key=lambda d: (d.range_bin, d.doppler_bin))


def detect(rd: RangeDopplerMap, config: FrameConfig) -> list[Detection]:
    if config.detector == "cfar":
        return cfar_detect(rd, pfa=config.pfa, guard=config.guard, train=config.train, notch=config.notch)
    if config.detector == "dscr":
        return dscr_detect(rd, notch_width=max(1, config.notch), threshold=config.dscr_threshold)
    if config.detector in ("pd50", "pd95"):
        return fixed_threshold_detect(rd, config.detector, notch=config.notch)
    raise ValueError(f"unknown detector {config.detector!r}")


def classify_detection(scenario: Scenario, det: Detection, rd: RangeDopplerMap, config: FrameConfig):
    """Features and category of one detection from its own cell's record."""
    radar = scenario.radar
    window, hop = config.atr_params(radar.pulses_per_cpi)
    series = synth_cell_series(scenario, det.t0, det.range_bin, config.recognition_pulses)
    spec = spectrogram(series, radar.prf, window, hop, window="blackmanharris", zero_pad=4, range_bin=det.range_bin)
    notch_hz = 0.0
    if config.detector == "dscr":
        notch_hz = (max(1, config.notch) + 0.5) * rd.doppler_bin_size
    elif config.notch > 0:
        notch_hz = (config.notch - 0.5) * rd.doppler_bin_size
    f = extract_features(det, spec, rd, radar, scenario.budget, config.thresholds, notch_hz=notch_hz)
    return f, classify(f, None, config.thresholds)


class Tracker:
    """Single-writer track store for one run; frames must arrive in time order."""

    def __init__(self, config: FrameConfig | None = None, clock: Callable[[], float] = time.perf_counter):
        self.config = config or FrameConfig()
        self.clock = clock
        self.tracks: list[Track] = []
        self.retired: list[Track] = []
        self.next_id = 1
        self.frame_index = 0
        self.last_t: float | None = None

    def update(self, t0: float, detections: Sequence[Detection], labels: Sequence[TargetCategory], drt_ms: float) -> list[int]:
        """Associate, filter and fuse; returns the track id of every detection."""
        if self.last_t is not None and t0 <= self.last_t:
            raise ValueError("frames must be processed in increasing time order")
        cfg = self.config
        asg = associate(detections, self.tracks, cfg.gate_radius, t0)
        ids = [0] * len(detections)
        for i, j in asg.pairs:
            tr = self.tracks[j]
            d = detections[i]
            tr = gh_update(tr, d, cfg.g, cfg.h, t0 - tr.last_t)
            tr.points.append((t0, tuple(detection_position(d)), abs(d.radial_speed)))
            tr.per_scan_labels.append(labels[i])
            tr.fused_label = tai_label(tr.per_scan_labels)
            tr.misses = 0
            tr.drt_history.append(drt_ms)
            self.tracks[j] = tr
            ids[i] = tr.id
        for j in asg.missed_tracks:
            self.tracks[j].misses += 1
        for i in asg.new_detections:
            d = detections[i]
            p = detection_position(d)
            tr = Track(
                id=self.next_id,
                position=p,
                velocity=np.zeros(2),
                last_t=t0,
                points=[(t0, tuple(p), abs(d.radial_speed))],
                per_scan_labels=[labels[i]],
                drt_history=[drt_ms],
            )
            tr.fused_label = tai_label(tr.per_scan_labels)
            self.next_id += 1
            self.tracks.append(tr)
            ids[i] = tr.id
        alive = []
        for tr in self.tracks:
            (self.retired if tr.misses >= RETIRE_AFTER else alive).append(tr)
        self.tracks = alive
        self.last_t = t0
        return ids

    def frame(self, scenario: Scenario, t0: float) -> FramePicture:
        cfg = self.config
        stamps = [("echo", self.clock())]
        cube = synth_cpi(scenario, t0)
        stamps.append(("synthesis", self.clock()))
        rd = range_doppler(cube, cfg.window)
        stamps.append(("processing", self.clock()))
        dets = group_detections(detect(rd, cfg))
        stamps.append(("detection", self.clock()))
        results = [classify_detection(scenario, d, rd, cfg) for d in dets]
        stamps.append(("classification", self.clock()))
        drt = drt_accounting([("echo", 0.0), ("detection", 1e3 * scenario.radar.cpi), ("display", 1e3 * scenario.radar.cpi)]).total
        ids = self.update(t0, dets, [c for _, c in results], drt)
        stamps.append(("tracking", self.clock()))
        picture = FramePicture(
            index=self.frame_index,
            t0=t0,
            detections=tuple(ClassifiedDetection(d, c, f, i) for d, (f, c), i in zip(dets, results, ids)),
            tracks=tuple(
                TrackSnapshot(tr.id, float(tr.position[0]), float(tr.position[1]), tr.speed, tr.fused_label, tr.misses)
                for tr in sorted(self.tracks, key=lambda tr: tr.id)
            ),
            drt=drt,
            stage_times=tuple(stamps) + (("display", self.clock()),),
            warnings=cube.warnings,
        )
        self.frame_index += 1
        return picture


def cws_frame(scenario: Scenario, t0: float, config: FrameConfig | None = None, tracker: Tracker | None = None) -> FramePicture:
    """Run one classify-while-scan frame; a fresh tracker is used when none is given."""
    return (tracker or Tracker(config)).frame(scenario, t0)


def run_frames(scenario: Scenario, frames: int, config: FrameConfig | None = None, t_start: float = 0.0):
    """Process ``frames`` frames spaced by the configured interval; returns (pictures, tracker)."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    tracker = Tracker(config)
    dt = tracker.config.frame_interval
    pictures = [tracker.frame(scenario, t_start + k * dt) for k in range(frames)]
    return pictures, tracker


# --------------------------------------------------------------------------
# output


TRACK_FIELDS = ("frame", "t", "track_id", "x", "y", "speed", "category", "confidence", "drt_ms")
CLASSIFICATION_FIELDS = (
    "track_id",
    "t",
    "category",
    "confidence",
    "body_speed",
    "rcs_estimate",
    "micro_body_ratio",
    "md_bandwidth",
    "jem_spacing",
    "jem_line_count",
    "rotation_rate_estimate",
    "blade_count_estimate",
    "flap_rate_estimate",
    "appendage_flag",
    "md_instability",
    "stable_fraction",
)


def _g(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def track_rows(pictures: Sequence[FramePicture]) -> list[list[str]]:
    rows = []
    for p in pictures:
        for tr in p.tracks:
            rows.append(
                [str(p.index), _g(p.t0), str(tr.id), _g(tr.x), _g(tr.y), _g(tr.speed),
                 tr.fused_label.category.value, _g(tr.fused_label.confidence), _g(p.drt)]
            )
    return rows


def write_track_log(pictures: Sequence[FramePicture], path) -> None:
    lines = [",".join(TRACK_FIELDS)] + [",".join(r) for r in track_rows(pictures)]
    Path(path).write_text("\n".join(lines) + "\n")


def write_classifications(pictures: Sequence[FramePicture], path) -> None:
    lines = [",".join(CLASSIFICATION_FIELDS)]
    for p in pictures:
        for cd in p.detections:
            f = cd.features
            vals = [cd.track_id, p.t0, cd.category.category.value, cd.category.confidence]
            vals += [getattr(f, name) for name in CLASSIFICATION_FIELDS[4:]]
            lines.append(",".join(v if isinstance(v, str) else _g(v) for v in vals))
    Path(path).write_text("\n".join(lines) + "\n")


def write_frame_stream(pictures: Sequence[FramePicture], path) -> None:
    """One JSON object per line per frame."""
    with open(path, "w") as fh:
        for p in pictures:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")
