"""Simulated world: radar, link budget, truth targets and their geometry.

Everything here is immutable. Scenarios are read from and written to a JSON
document (see ``docs/scenario_schema.md``); all quantities are SI except the
blade ``rate_hz`` and ``flap_rate_hz`` keys, which are in revolutions / beats
per second.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .constants import SPEED_OF_LIGHT

CATEGORY_NAMES = (
    "MultiRotorDrone",
    "FixedWingDrone",
    "VtolHybridDrone",
    "LargeBird",
    "SmallBird",
    "Vehicle",
    "Ship",
    "Helicopter",
    "Pedestrian",
    "Clutter",
    "Unknown",
)


class ScenarioError(ValueError):
    """Raised for malformed or invalid scenario documents."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


@dataclass(frozen=True)
class RadarParams:
    carrier_frequency: float
    prf: float
    pulses_per_cpi: int
    bandwidth: float
    range_bins: int
    beam_azimuth: float = 0.0
    scan_rate: float = 0.0
    position: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        _require(self.carrier_frequency > 0, "carrier_frequency must be > 0")
        _require(self.prf > 0, "prf must be > 0")
        _require(int(self.pulses_per_cpi) >= 2, "pulses_per_cpi must be >= 2")
        _require(self.bandwidth > 0, "bandwidth must be > 0")
        _require(int(self.range_bins) >= 1, "range_bins must be >= 1")
        _require(len(self.position) == 3, "position must have 3 components")
        object.__setattr__(self, "pulses_per_cpi", int(self.pulses_per_cpi))
        object.__setattr__(self, "range_bins", int(self.range_bins))
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def cpi(self) -> float:
        """Coherent processing interval in seconds."""
        return self.pulses_per_cpi / self.prf

    @property
    def range_bin_size(self) -> float:
        return SPEED_OF_LIGHT / (2.0 * self.bandwidth)

    @property
    def max_range(self) -> float:
        return self.range_bins * self.range_bin_size

    def azimuth_at(self, t: float) -> float:
        return self.beam_azimuth + self.scan_rate * t


@dataclass(frozen=True)
class LinkBudget:
    transmit_power: float
    tx_gain: float
    rx_gain: float
    system_noise_temp: float
    noise_bandwidth: float
    system_losses: float = 1.0

    def __post_init__(self):
        for name in ("transmit_power", "tx_gain", "rx_gain", "system_noise_temp", "noise_bandwidth"):
            _require(getattr(self, name) > 0, f"{name} must be > 0")
        _require(self.system_losses >= 1.0, "system_losses must be >= 1")


@dataclass(frozen=True)
class BladeSet:
    """One rotor: ``blade_count`` identical, equally spaced blades.

    ``rotation_rate`` is in rad/s. ``drift`` is the fractional change of the
    rotation rate per second (linear ramp); ``wobble`` is the fractional
    amplitude of a sinusoidal rate modulation at ``wobble_rate`` Hz, used to
    mimic attitude-control speed changes on lifting rotors.
    """

    blade_count: int
    blade_length: float
    rotation_rate: float
    plane: str = "lifting"
    phase_offset: float = 0.0
    reflectivity_scale: float = 0.1
    drift: float = 0.0
    wobble: float = 0.0
    wobble_rate: float = 0.0

    def __post_init__(self):
        _require(int(self.blade_count) >= 1, "blade_count must be >= 1")
        _require(self.blade_length > 0, "blade length must be > 0")
        _require(self.rotation_rate >= 0, "rotation_rate must be >= 0")
        _require(self.plane in ("lifting", "puller"), f"unknown blade plane {self.plane!r}")
        _require(0 < self.reflectivity_scale <= 1, "reflectivity_scale must be in (0, 1]")
        _require(0 <= self.wobble < 1, "wobble must be in [0, 1)")
        object.__setattr__(self, "blade_count", int(self.blade_count))

    def rotation_angle(self, t):
        """Rotor angle of blade 0 at time(s) ``t`` including drift and wobble."""
        t = np.asarray(t, dtype=float)
        theta = self.rotation_rate * (t + 0.5 * self.drift * t * t) + self.phase_offset
        if self.wobble and self.wobble_rate > 0:
            w = 2 * np.pi * self.wobble_rate
            theta = theta + self.rotation_rate * self.wobble * (1 - np.cos(w * t)) / w
        return theta

    def rate_at(self, t):
        t = np.asarray(t, dtype=float)
        rate = self.rotation_rate * (1 + self.drift * t)
        if self.wobble and self.wobble_rate > 0:
            rate = rate + self.rotation_rate * self.wobble * np.sin(2 * np.pi * self.wobble_rate * t)
        return rate


@dataclass(frozen=True)
class Appendage:
    offset: float
    reflectivity: float

    def __post_init__(self):
        _require(self.offset >= 0, "appendage offset must be >= 0")
        _require(0 < self.reflectivity <= 1, "appendage reflectivity must be in (0, 1]")


def _waypoint(w, target_id):
    """Accept ``(t, x, y, z)`` or ``(t, (x, y, z))``."""
    if len(w) == 2:
        t, pos = w
    elif len(w) == 4:
        t, pos = w[0], w[1:]
    else:
        raise ScenarioError(f"target {target_id}: waypoint must be [t, x, y, z]")
    _require(len(pos) == 3, f"target {target_id}: waypoint position must have 3 components")
    return float(t), tuple(float(v) for v in pos)


@dataclass(frozen=True)
class TargetModel:
    id: str
    truth_category: str
    waypoints: tuple
    mean_rcs: Optional[float] = None
    sphere_radius: Optional[float] = None
    blade_sets: tuple = ()
    flap_rate: float = 0.0
    appendage: Optional[Appendage] = None

    def __post_init__(self):
        _require(self.truth_category in CATEGORY_NAMES, f"unknown category {self.truth_category!r}")
        _require(
            (self.mean_rcs is None) != (self.sphere_radius is None),
            f"target {self.id}: exactly one of rcs_m2 / sphere_radius_m required",
        )
        if self.mean_rcs is not None:
            _require(self.mean_rcs > 0, f"target {self.id}: rcs must be > 0")
        if self.sphere_radius is not None:
            _require(self.sphere_radius > 0, f"target {self.id}: sphere radius must be > 0")
        _require(len(self.waypoints) >= 1, f"target {self.id}: at least one waypoint required")
        wps = tuple(_waypoint(w, self.id) for w in self.waypoints)
        times = [w[0] for w in wps]
        _require(
            all(b > a for a, b in zip(times, times[1:])),
            f"target {self.id}: waypoint times must be strictly increasing",
        )
        _require(self.flap_rate >= 0, f"target {self.id}: flap_rate must be >= 0")
        object.__setattr__(self, "waypoints", wps)
        object.__setattr__(self, "blade_sets", tuple(self.blade_sets))

    def rcs(self, wavelength: float) -> float:
        if self.mean_rcs is not None:
            return self.mean_rcs
        from .scattering import sphere_rcs

        return sphere_rcs(self.sphere_radius, wavelength)


@dataclass(frozen=True)
class Clutter:
    clutter_to_noise: float  # dB
    doppler_spread: float  # m/s

    def __post_init__(self):
        _require(self.clutter_to_noise >= 0, "clutter_to_noise must be >= 0 dB")
        _require(self.doppler_spread >= 0, "doppler_spread must be >= 0")


@dataclass(frozen=True)
class Scenario:
    radar: RadarParams
    budget: LinkBudget
    targets: tuple = ()
    clutter: Optional[Clutter] = None
    noise_seed: int = 0
    noise_enabled: bool = True

    def __post_init__(self):
        ids = [t.id for t in self.targets]
        _require(len(ids) == len(set(ids)), "target ids must be unique")
        _require(int(self.noise_seed) >= 0, "noise_seed must be >= 0")
        object.__setattr__(self, "targets", tuple(self.targets))

    def target(self, target_id: str) -> TargetModel:
        for t in self.targets:
            if t.id == target_id:
                return t
        raise KeyError(f"unknown target id {target_id!r}")

    def with_radar(self, **changes) -> "Scenario":
        return replace(self, radar=replace(self.radar, **changes))


@dataclass(frozen=True)
class TargetState:
    position: np.ndarray
    velocity: np.ndarray
    radial_speed: float
    range: float
    azimuth: float


# --------------------------------------------------------------------------
# geometry


def _segment(target: TargetModel, t: float):
    wps = target.waypoints
    if t < wps[0][0]:
        raise ValueError(f"t={t} precedes first waypoint of target {target.id}")
    for (t_a, p_a), (t_b, p_b) in zip(wps, wps[1:]):
        if t_a <= t < t_b:
            p_a, p_b = np.asarray(p_a), np.asarray(p_b)
            vel = (p_b - p_a) / (t_b - t_a)
            return p_a + vel * (t - t_a), vel
    return np.asarray(wps[-1][1], dtype=float), np.zeros(3)


def target_state_at(scenario: Scenario, target_id: str, t: float) -> TargetState:
    """Truth kinematics of one target at time ``t``.

    Positions are linear between waypoints and held after the last one.
    ``radial_speed`` is positive for approaching targets.
    """
    target = scenario.target(target_id)
    pos, vel = _segment(target, t)
    los = pos - np.asarray(scenario.radar.position)
    rng = float(np.linalg.norm(los))
    radial = -float(vel @ los) / rng if rng > 0 else 0.0
    azimuth = math.atan2(los[0], los[1])
    return TargetState(position=pos, velocity=vel, radial_speed=radial, range=rng, azimuth=azimuth)


def target_positions(target: TargetModel, times: np.ndarray) -> np.ndarray:
    """Vectorised truth positions, shape ``(len(times), 3)``."""
    times = np.asarray(times, dtype=float)
    wt = np.array([w[0] for w in target.waypoints])
    wp = np.array([w[1] for w in target.waypoints])
    if len(wt) == 1:
        return np.broadcast_to(wp[0], (len(times), 3)).copy()
    clipped = np.clip(times, wt[0], wt[-1])
    return np.stack([np.interp(clipped, wt, wp[:, i]) for i in range(3)], axis=1)


def los_geometry(radar_position: Sequence[float], state: TargetState, blade_set: BladeSet):
    """Return ``(alpha, beta)`` of the line of sight relative to a rotor plane.

    ``beta`` is the angle between the LOS and the rotor plane, ``alpha`` the
    azimuth of the LOS projection inside that plane measured from the rotor
    reference axis. Lifting rotors lie in the horizontal plane with the
    target heading (north when hovering) as reference; puller rotors lie in
    the vertical plane whose normal is the horizontal heading, referenced to
    the horizontal in-plane axis.
    """
    los = np.asarray(state.position, dtype=float) - np.asarray(radar_position, dtype=float)
    rng = float(np.linalg.norm(los))
    if rng == 0:
        raise ValueError("zero range: line of sight undefined")
    u = los / rng
    heading = np.array([state.velocity[0], state.velocity[1], 0.0])
    hn = np.linalg.norm(heading)
    heading = heading / hn if hn > 0 else np.array([0.0, 1.0, 0.0])
    if blade_set.plane == "lifting":
        normal = np.array([0.0, 0.0, 1.0])
        ref = heading
    else:
        normal = heading
        ref = np.cross(heading, [0.0, 0.0, 1.0])
    sin_beta = float(np.clip(u @ normal, -1.0, 1.0))
    beta = math.asin(abs(sin_beta))
    proj = u - sin_beta * normal
    pn = np.linalg.norm(proj)
    if pn < 1e-12:
        return 0.0, math.pi / 2
    proj = proj / pn
    other = np.cross(normal, ref)
    alpha = math.atan2(float(proj @ other), float(proj @ ref))
    return alpha, beta


# --------------------------------------------------------------------------
# serialisation


def _get(d: dict, key: str, where: str, default=...):
    if key in d and d[key] is not None:
        return d[key]
    if default is ...:
        raise ScenarioError(f"{key} required ({where})")
    return default


def _blade_from_doc(b: dict, where: str) -> BladeSet:
    return BladeSet(
        blade_count=int(_get(b, "count", where)),
        blade_length=float(_get(b, "length_m", where)),
        rotation_rate=2 * math.pi * float(_get(b, "rate_hz", where)),
        plane=str(_get(b, "plane", where, "lifting")),
        phase_offset=float(_get(b, "phase_offset_rad", where, 0.0)),
        reflectivity_scale=float(_get(b, "reflectivity", where, 0.1)),
        drift=float(_get(b, "drift_per_s", where, 0.0)),
        wobble=float(_get(b, "wobble", where, 0.0)),
        wobble_rate=float(_get(b, "wobble_hz", where, 0.0)),
    )


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    r = _get(doc, "radar", "document")
    radar = RadarParams(
        carrier_frequency=float(_get(r, "carrier_frequency", "radar")),
        prf=float(_get(r, "prf", "radar")),
        pulses_per_cpi=int(_get(r, "pulses_per_cpi", "radar")),
        bandwidth=float(_get(r, "bandwidth", "radar")),
        range_bins=int(_get(r, "range_bins", "radar")),
        beam_azimuth=float(_get(r, "beam_azimuth", "radar", 0.0)),
        scan_rate=float(_get(r, "scan_rate", "radar", 0.0)),
        position=tuple(_get(r, "position", "radar", (0.0, 0.0, 0.0))),
    )
    b = _get(doc, "budget", "document")
    budget = LinkBudget(
        transmit_power=float(_get(b, "transmit_power", "budget")),
        tx_gain=float(_get(b, "tx_gain", "budget")),
        rx_gain=float(_get(b, "rx_gain", "budget")),
        system_noise_temp=float(_get(b, "system_noise_temp", "budget")),
        noise_bandwidth=float(_get(b, "noise_bandwidth", "budget")),
        system_losses=float(_get(b, "system_losses", "budget", 1.0)),
    )
    c = doc.get("clutter")
    clutter = None
    if c:
        clutter = Clutter(
            clutter_to_noise=float(_get(c, "clutter_to_noise_db", "clutter")),
            doppler_spread=float(_get(c, "doppler_spread", "clutter", 0.0)),
        )
    targets = []
    for i, t in enumerate(_get(doc, "targets", "document", [])):
        where = f"targets[{i}]"
        app = t.get("appendage")
        targets.append(
            TargetModel(
                id=str(_get(t, "id", where)),
                truth_category=str(_get(t, "category", where)),
                mean_rcs=t.get("rcs_m2"),
                sphere_radius=t.get("sphere_radius_m"),
                waypoints=tuple(tuple(w) for w in _get(t, "waypoints", where)),
                blade_sets=tuple(_blade_from_doc(bd, where) for bd in t.get("blades", [])),
                flap_rate=float(t.get("flap_rate_hz", 0.0) or 0.0),
                appendage=(
                    Appendage(float(_get(app, "offset_m", where)), float(_get(app, "reflectivity", where)))
                    if app
                    else None
                ),
            )
        )
    return Scenario(
        radar=radar,
        budget=budget,
        targets=tuple(targets),
        clutter=clutter,
        noise_seed=int(doc.get("noise_seed", 0)),
        noise_enabled=bool(doc.get("noise_enabled", True)),
    )


def load_scenario(text: str) -> Scenario:
    """Parse and validate a scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return scenario_from_dict(doc)
    except (TypeError, AttributeError, IndexError) as exc:
        raise ScenarioError(f"malformed scenario document: {exc}") from exc


def scenario_to_dict(s: Scenario) -> dict:
    r, b = s.radar, s.budget
    doc = {
        "radar": {
            "carrier_frequency": r.carrier_frequency,
            "prf": r.prf,
            "pulses_per_cpi": r.pulses_per_cpi,
            "bandwidth": r.bandwidth,
            "range_bins": r.range_bins,
            "beam_azimuth": r.beam_azimuth,
            "scan_rate": r.scan_rate,
            "position": list(r.position),
        },
        "budget": {
            "transmit_power": b.transmit_power,
            "tx_gain": b.tx_gain,
            "rx_gain": b.rx_gain,
            "system_noise_temp": b.system_noise_temp,
            "noise_bandwidth": b.noise_bandwidth,
            "system_losses": b.system_losses,
        },
        "clutter": (
            None
            if s.clutter is None
            else {"clutter_to_noise_db": s.clutter.clutter_to_noise, "doppler_spread": s.clutter.doppler_spread}
        ),
        "noise_seed": s.noise_seed,
        "noise_enabled": s.noise_enabled,
        "targets": [],
    }
    for t in s.targets:
        td = {"id": t.id, "category": t.truth_category, "waypoints": [[w[0], *w[1]] for w in t.waypoints]}
        if t.mean_rcs is not None:
            td["rcs_m2"] = t.mean_rcs
        else:
            td["sphere_radius_m"] = t.sphere_radius
        td["blades"] = [
            {
                "count": bs.blade_count,
                "length_m": bs.blade_length,
                "rate_hz": bs.rotation_rate / (2 * math.pi),
                "plane": bs.plane,
                "phase_offset_rad": bs.phase_offset,
                "reflectivity": bs.reflectivity_scale,
                "drift_per_s": bs.drift,
                "wobble": bs.wobble,
                "wobble_hz": bs.wobble_rate,
            }
            for bs in t.blade_sets
        ]
        td["flap_rate_hz"] = t.flap_rate
        if t.appendage is not None:
            td["appendage"] = {"offset_m": t.appendage.offset, "reflectivity": t.appendage.reflectivity}
        doc["targets"].append(td)
    return doc


def dump_scenario(s: Scenario) -> str:
    """Canonical JSON text (sorted keys, 2-space indent)."""
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True) + "\n"
