"""Slow-time I/Q synthesis: one complex sample per pulse per range bin.

Noise is unit power per cell; a target's amplitude is the square root of its
single-pulse SNR from the radar equation, so post-FFT powers read directly
as SNR. Approaching targets have positive Doppler.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import BOLTZMANN, FOUR_PI_CUBED
from .scenario import BladeSet, LinkBudget, RadarParams, Scenario, TargetModel, los_geometry, target_positions, target_state_at

log = logging.getLogger(__name__)

SCATTERERS_PER_BLADE = 8
FLAP_SPEED_EXCURSION = 2.0  # m/s peak Doppler excursion of a flapping bird
FLAP_AM_DEPTH = 0.5  # fractional amplitude modulation at the flap rate


@dataclass(frozen=True)
class IqCube:
    samples: np.ndarray  # complex64, (pulses, range_bins)
    t0: float
    prf: float
    range_bin_size: float
    beam_azimuth: float
    wavelength: float
    bin_azimuth: np.ndarray = field(default=None, repr=False)
    warnings: tuple = ()
    aliased: tuple = ()

    @property
    def pulses(self) -> int:
        return self.samples.shape[0]

    @property
    def range_bins(self) -> int:
        return self.samples.shape[1]


# --------------------------------------------------------------------------
# radar equation


def single_pulse_snr_linear(budget: LinkBudget, radar: RadarParams, rcs, range_m):
    rcs = np.asarray(rcs, dtype=float)
    range_m = np.asarray(range_m, dtype=float)
    if np.any(rcs <= 0) or np.any(range_m <= 0):
        raise ValueError("rcs and range must be positive")
    num = budget.transmit_power * budget.tx_gain * budget.rx_gain * radar.wavelength**2 * rcs
    den = (
        FOUR_PI_CUBED
        * BOLTZMANN
        * budget.system_noise_temp
        * budget.noise_bandwidth
        * budget.system_losses
        * range_m**4
    )
    return num / den


def single_pulse_snr(budget: LinkBudget, radar: RadarParams, rcs: float, range_m: float) -> float:
    """Single-pulse SNR in dB from the radar equation."""
    return float(10 * np.log10(single_pulse_snr_linear(budget, radar, rcs, range_m)))


# --------------------------------------------------------------------------
# blades


def micro_doppler_shift(blade: BladeSet, alpha: float, beta: float, body_doppler: float, wavelength: float, t):
    """Instantaneous Doppler (Hz) of blade 0's tip.

    (L / lambda) * omega * cos(alpha) * cos(beta) * cos(omega t + phase) + f_body,
    with omega replaced by the instantaneous rate when drift/wobble is set.
    """
    geom = math.cos(alpha) * math.cos(beta)
    return (
        blade.blade_length / wavelength * blade.rate_at(t) * geom * np.cos(blade.rotation_angle(t))
        + body_doppler
    )


def _radii(blade: BladeSet, scatterers: int) -> np.ndarray:
    if scatterers < 2:
        raise ValueError("need at least 2 scatterers per blade")
    return blade.blade_length * np.arange(1, scatterers + 1) / scatterers


def blade_scatterer_phases(
    blade: BladeSet,
    alpha: float,
    beta: float,
    wavelength: float,
    t: float,
    scatterers: int = SCATTERERS_PER_BLADE,
    mean_rcs: float = 1.0,
) -> list[tuple[float, float]]:
    """(phase, amplitude) of every point scatterer on every blade at time ``t``.

    Blade k sits at rotor angle theta + 2 pi k / N. The phase law makes the
    tip's instantaneous frequency equal :func:`micro_doppler_shift` with zero
    body Doppler.
    """
    radii = _radii(blade, scatterers)
    geom = math.cos(alpha) * math.cos(beta)
    amp = math.sqrt(blade.reflectivity_scale * mean_rcs / (blade.blade_count * scatterers))
    theta = float(blade.rotation_angle(t))
    out = []
    for k in range(blade.blade_count):
        s = math.sin(theta + 2 * math.pi * k / blade.blade_count)
        for rho in radii:
            out.append((2 * math.pi / wavelength * rho * geom * s, amp))
    return out


def blade_returns(
    blade: BladeSet,
    alpha: float,
    beta: float,
    wavelength: float,
    times: np.ndarray,
    scatterers: int = SCATTERERS_PER_BLADE,
) -> np.ndarray:
    """Coherent sum over all scatterers of one rotor, unit per-scatterer amplitude.

    Evenly spaced radii make the per-blade sum a geometric series, so the
    cost is independent of ``scatterers``.
    """
    times = np.asarray(times, dtype=float)
    geom = math.cos(alpha) * math.cos(beta)
    # reduce in double precision, then evaluate the trig in single precision
    theta = np.mod(blade.rotation_angle(times), 2 * math.pi)
    scale = np.float32(math.pi / wavelength * blade.blade_length * geom / scatterers)
    s_count = np.float32(scatterers)
    re = np.zeros(times.shape, dtype=np.float32)
    im = np.zeros(times.shape, dtype=np.float32)
    for k in range(blade.blade_count):
        # sum_{m=1..S} exp(j m 2u) = exp(j (S+1) u) sin(S u) / sin(u)
        u = scale * np.sin((theta + 2 * math.pi * k / blade.blade_count).astype(np.float32))
        den = np.sin(u)
        small = np.abs(den) < 1e-4
        mag = np.sin(s_count * u) / np.where(small, np.float32(1), den)
        if small.any():
            us = u[small]
            mag[small] = s_count * np.cos(s_count * us) / np.cos(us)
        ph = (s_count + 1) * u
        re += mag * np.cos(ph)
        im += mag * np.sin(ph)
    total = re + 1j * im.astype(float)
    return total


# --------------------------------------------------------------------------
# target and clutter returns


def _target_series(scenario: Scenario, target: TargetModel, times: np.ndarray, t_ref: float, scatterers: int):
    """Complex return of one target over ``times`` plus its range at ``t_ref``."""
    radar = scenario.radar
    lam = radar.wavelength
    state = target_state_at(scenario, target.id, t_ref)
    if state.range <= 0:
        return None, state
    rcs = target.rcs(lam)
    amp = math.sqrt(float(single_pulse_snr_linear(scenario.budget, radar, rcs, state.range)))
    pos = target_positions(target, times)
    ranges = np.linalg.norm(pos - np.asarray(radar.position), axis=1)
    carrier = np.exp(-1j * 4 * np.pi / lam * ranges)

    body = np.full(times.shape, amp, dtype=complex)
    if target.flap_rate > 0:
        w = 2 * np.pi * target.flap_rate
        excursion = 2 * FLAP_SPEED_EXCURSION / lam
        body = body * (1 + FLAP_AM_DEPTH * np.sin(w * times))
        body = body * np.exp(-1j * excursion / target.flap_rate * np.cos(w * times))
    series = body
    if target.appendage is not None:
        series = series + amp * math.sqrt(target.appendage.reflectivity) * np.exp(
            -1j * 4 * np.pi / lam * target.appendage.offset
        )
    for blade in target.blade_sets:
        alpha, beta = los_geometry(radar.position, state, blade)
        per_scatterer = amp * math.sqrt(blade.reflectivity_scale / (blade.blade_count * scatterers))
        series = series + per_scatterer * blade_returns(blade, alpha, beta, lam, times, scatterers)
    return series * carrier, state


def _clutter(rng: np.random.Generator, scenario: Scenario, n: int, bins: int) -> np.ndarray:
    """Zero-Doppler Gaussian clutter, shape (n, bins), Gaussian Doppler spectrum."""
    c = scenario.clutter
    white = (rng.standard_normal((n, bins)) + 1j * rng.standard_normal((n, bins))) / math.sqrt(2)
    freqs = np.fft.fftfreq(n, d=1 / scenario.radar.prf)
    sigma_f = 2 * c.doppler_spread / scenario.radar.wavelength
    if sigma_f > 0:
        psd = np.exp(-0.5 * (freqs / sigma_f) ** 2)
    else:
        psd = (freqs == 0).astype(float)
    shaping = np.sqrt(psd * n / psd.sum())[:, None]
    cl = np.fft.ifft(np.fft.fft(white, axis=0) * shaping, axis=0)
    return cl * math.sqrt(10 ** (c.clutter_to_noise / 10))


def _noise(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-power circular complex Gaussian noise, single precision."""
    n, m = shape if len(shape) == 2 else (1, shape[0])
    re_im = rng.standard_normal((n, 2 * m), dtype=np.float32)
    re_im *= np.float32(1 / math.sqrt(2))
    out = re_im.view(np.complex64)
    return out if len(shape) == 2 else out[0]


def noise_generator(*key: int) -> np.random.Generator:
    """Independent, reproducible stream for a key such as (seed, CPI index)."""
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence([int(k) for k in key])))


def cpi_index(scenario: Scenario, t0: float) -> int:
    """Index of the first pulse of a CPI starting at ``t0``; seeds the noise stream."""
    return int(round(t0 * scenario.radar.prf))


def synth_cpi(scenario: Scenario, t0: float, scatterers: int = SCATTERERS_PER_BLADE, dtype=np.complex64) -> IqCube:
    """Synthesize one CPI of slow-time samples starting at ``t0``.

    Samples are stored as ``dtype``; complex128 keeps sums of target returns
    exact to double precision.
    """
    radar = scenario.radar
    n, bins = radar.pulses_per_cpi, radar.range_bins
    times = t0 + np.arange(n) / radar.prf
    rng = None
    if scenario.noise_enabled or scenario.clutter is not None:
        rng = noise_generator(scenario.noise_seed, cpi_index(scenario, t0))
    if scenario.noise_enabled:
        samples = _noise(rng, (n, bins)).astype(dtype, copy=False)
    else:
        samples = np.zeros((n, bins), dtype=dtype)
    bin_az = np.full(bins, radar.azimuth_at(t0))
    az_weight = np.zeros(bins)
    az_sum = np.zeros(bins)
    warnings, aliased = [], []

    for target in scenario.targets:
        if t0 < target.waypoints[0][0]:
            continue
        state = target_state_at(scenario, target.id, t0)
        rbin = int(math.floor(state.range / radar.range_bin_size))
        if rbin >= bins:
            msg = f"target {target.id} at {state.range:.1f} m beyond unambiguous range {radar.max_range:.1f} m"
            log.warning(msg)
            warnings.append(msg)
            continue
        if abs(2 * state.radial_speed / radar.wavelength) > radar.prf / 2:
            aliased.append(target.id)
        series, _ = _target_series(scenario, target, times, t0, scatterers)
        if series is None:
            continue
        samples[:, rbin] += series
        w = float(np.mean(np.abs(series) ** 2))
        az_weight[rbin] += w
        az_sum[rbin] += w * state.azimuth

    hit = az_weight > 0
    bin_az[hit] = az_sum[hit] / az_weight[hit]

    if scenario.clutter is not None:
        samples += _clutter(rng, scenario, n, bins).astype(dtype)

    return IqCube(
        samples=samples,
        t0=t0,
        prf=radar.prf,
        range_bin_size=radar.range_bin_size,
        beam_azimuth=radar.azimuth_at(t0),
        wavelength=radar.wavelength,
        bin_azimuth=bin_az,
        warnings=tuple(warnings),
        aliased=tuple(aliased),
    )


def synth_cell_series(
    scenario: Scenario, t0: float, range_bin: int, n_pulses: int, scatterers: int = SCATTERERS_PER_BLADE
) -> np.ndarray:
    """Long slow-time record of one range cell for recognition.

    The range gate follows the targets that occupy ``range_bin`` at ``t0``,
    so no range migration occurs over the record. Noise and clutter come from
    a stream keyed by (seed, CPI index, cell), independent of the CPI cube.
    """
    radar = scenario.radar
    times = t0 + np.arange(n_pulses) / radar.prf
    out = np.zeros(n_pulses, dtype=complex)
    for target in scenario.targets:
        if t0 < target.waypoints[0][0]:
            continue
        state = target_state_at(scenario, target.id, t0)
        if int(math.floor(state.range / radar.range_bin_size)) != range_bin:
            continue
        series, _ = _target_series(scenario, target, times, t0, scatterers)
        if series is not None:
            out += series
    if scenario.noise_enabled or scenario.clutter is not None:
        rng = noise_generator(scenario.noise_seed, cpi_index(scenario, t0), 1, range_bin)
        if scenario.noise_enabled:
            out += _noise(rng, (n_pulses,))
        if scenario.clutter is not None:
            out += _clutter(rng, scenario, n_pulses, 1)[:, 0]
    return out


# --------------------------------------------------------------------------
# binary dump


def write_cube(cube: IqCube, path) -> Path:
    """Write ``<path>.iq`` (little-endian float32 re/im, pulses x bins) and a JSON sidecar."""
    path = Path(path)
    data = np.empty(cube.samples.shape + (2,), dtype="<f4")
    data[..., 0] = cube.samples.real
    data[..., 1] = cube.samples.imag
    bin_path = path.with_suffix(".iq")
    data.tofile(bin_path)
    meta = {
        "pulses": cube.pulses,
        "range_bins": cube.range_bins,
        "dtype": "float32le interleaved re,im, row-major pulses x bins",
        "t0": cube.t0,
        "prf": cube.prf,
        "range_bin_size": cube.range_bin_size,
        "beam_azimuth": cube.beam_azimuth,
        "wavelength": cube.wavelength,
        "warnings": list(cube.warnings),
        "aliased": list(cube.aliased),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return bin_path


def read_cube(path) -> IqCube:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    raw = np.fromfile(path.with_suffix(".iq"), dtype="<f4").reshape(meta["pulses"], meta["range_bins"], 2)
    return IqCube(
        samples=np.ascontiguousarray(raw).view(np.complex64)[..., 0],
        t0=meta["t0"],
        prf=meta["prf"],
        range_bin_size=meta["range_bin_size"],
        beam_azimuth=meta["beam_azimuth"],
        wavelength=meta["wavelength"],
        warnings=tuple(meta["warnings"]),
        aliased=tuple(meta["aliased"]),
    )
