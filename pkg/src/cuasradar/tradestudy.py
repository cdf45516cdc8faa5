"""Radar design calculators, dwell-time sweeps and a dwell-adaptation loop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import BOLTZMANN, FOUR_PI_CUBED, SPEED_OF_LIGHT
from .detector import PRESETS
from .dsp import noise_floor, window_taps
from .echo_synth import synth_cpi
from .scenario import LinkBudget, RadarParams, Scenario, target_state_at

MIN_DWELL_MS = 1.0
MAX_DWELL_MS = 200.0
ADAPT_FACTOR = 1.5


@dataclass(frozen=True)
class LatencyBudget:
    """End-to-end counter-UAS latency in ms: radar detection, EO search and recognition, comms."""

    drl_radar: float
    srl_eo: float
    rrl_eo: float
    t_com: float
    total: float

    def __post_init__(self):
        parts = (self.drl_radar, self.srl_eo, self.rrl_eo, self.t_com)
        if min(parts) < 0:
            raise ValueError("latency components must be >= 0")
        if not math.isclose(self.total, sum(parts), rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("total must equal the sum of the components")


@dataclass(frozen=True)
class SensorResolution:
    wavelength: float
    aperture: float

    @property
    def angular_resolution(self) -> float:
        return angular_resolution(self.wavelength, self.aperture)


def _wavelength(radar) -> float:
    return radar.wavelength if isinstance(radar, RadarParams) else float(radar)


def detection_range(budget: LinkBudget, radar, rcs: float, snr_required: float) -> float:
    """Range (m) at which a target of ``rcs`` reaches ``snr_required`` dB single-pulse SNR.

    ``radar`` is a :class:`RadarParams` or a wavelength in metres.
    """
    lam = _wavelength(radar)
    if rcs <= 0 or lam <= 0:
        raise ValueError("rcs and wavelength must be positive")
    snr = 10 ** (snr_required / 10)
    num = budget.transmit_power * budget.tx_gain * budget.rx_gain * lam**2 * rcs
    den = FOUR_PI_CUBED * BOLTZMANN * budget.system_noise_temp * budget.noise_bandwidth * budget.system_losses * snr
    return (num / den) ** 0.25


def calibrate_power(budget: LinkBudget, radar, rcs: float, range_m: float, snr_required: float) -> LinkBudget:
    """Copy of ``budget`` whose transmit power puts ``rcs`` at ``range_m`` for ``snr_required``."""
    if range_m <= 0:
        raise ValueError("range must be positive")
    scale = (range_m / detection_range(budget, radar, rcs, snr_required)) ** 4
    return LinkBudget(
        transmit_power=budget.transmit_power * scale,
        tx_gain=budget.tx_gain,
        rx_gain=budget.rx_gain,
        system_noise_temp=budget.system_noise_temp,
        noise_bandwidth=budget.noise_bandwidth,
        system_losses=budget.system_losses,
    )


def scale_range(r0: float, sigma0: float, snr0: float, sigma1: float, snr1: float) -> float:
    """Range for (sigma1, snr1 dB) given that (sigma0, snr0 dB) is reached at ``r0``."""
    if min(r0, sigma0, sigma1) <= 0:
        raise ValueError("range and rcs must be positive")
    return r0 * ((sigma1 / sigma0) * 10 ** ((snr0 - snr1) / 10)) ** 0.25


def latency_budget(drl: float, srl: float, rrl: float, t_com: float) -> LatencyBudget:
    parts = (drl, srl, rrl, t_com)
    if min(parts) < 0:
        raise ValueError("latency components must be >= 0")
    return LatencyBudget(drl, srl, rrl, t_com, drl + srl + rrl + t_com)


def angular_resolution(wavelength: float, aperture: float) -> float:
    """Diffraction-limited angular resolution (rad) of a circular aperture."""
    if wavelength <= 0 or aperture <= 0:
        raise ValueError("wavelength and aperture must be positive")
    return 1.22 * wavelength / aperture


def alert_time(range_m: float, speed: float) -> float:
    """Seconds until a threat at ``range_m`` closing at ``speed`` m/s arrives."""
    if speed <= 0:
        raise ValueError("speed must be > 0")
    return range_m / speed


def kmh(speed_kmh: float) -> float:
    return speed_kmh / 3.6


def range_resolution(bandwidth: float) -> float:
    return SPEED_OF_LIGHT / (2 * bandwidth)


def velocity_resolution(carrier_frequency: float, cpi: float) -> float:
    return SPEED_OF_LIGHT / carrier_frequency / (2 * cpi)


# --------------------------------------------------------------------------
# dwell time


@dataclass(frozen=True)
class DwellRow:
    cpi_ms: float
    ratio: float
    detectable: bool
    pulses: int = 0
    body_snr_db: float = 0.0


SWEEP_FIELDS = ("cpi_ms", "ratio", "detectable")
SWEEP_WINDOW = "blackmanharris"
SWEEP_ZERO_PAD = 4
SWEEP_BODY_CELLS = 4  # natural cells either side of the body line excluded from the sidebands


def _bladed_target(scenario: Scenario):
    for t in scenario.targets:
        if t.blade_sets:
            return t
    raise ValueError("scenario has no bladed target")


def dwell_point(scenario: Scenario, pulses: int, t0: float = 0.0) -> DwellRow:
    """Synthesise one CPI of ``pulses`` pulses and measure the bladed target's sidebands.

    The ratio is the strongest sideband cell over the body line, counting
    only sidebands above the single-look detection floor (the 50 % Pd
    preset over the noise floor).
    """
    radar = scenario.radar
    if pulses < 2:
        raise ValueError("a CPI needs at least 2 pulses")
    s = scenario.with_radar(pulses_per_cpi=int(pulses))
    target = _bladed_target(s)
    state = target_state_at(s, target.id, t0)
    rb = int(state.range // radar.range_bin_size)
    if not 0 <= rb < radar.range_bins:
        raise ValueError(f"target {target.id} outside the range window")
    cube = synth_cpi(s, t0)
    w = window_taps(SWEEP_WINDOW, pulses)
    nfft = SWEEP_ZERO_PAD * pulses
    all_bins = np.abs(np.fft.fft(cube.samples * w[:, None], nfft, axis=0)) ** 2
    floor = noise_floor(all_bins)
    spec = np.fft.fftshift(all_bins[:, rb])
    k = int(np.argmax(spec))
    body = float(spec[k])
    side = np.ones(nfft, dtype=bool)
    half = SWEEP_BODY_CELLS * SWEEP_ZERO_PAD
    side[max(0, k - half) : k + half + 1] = False
    level = floor * 10 ** (PRESETS["pd50"] / 10)
    hot = side & (spec > level)
    ratio = float(spec[hot].max() / body) if hot.any() and body > 0 else 0.0
    snr = 10 * math.log10(body / floor) if floor > 0 and body > 0 else math.inf
    return DwellRow(1e3 * pulses / radar.prf, ratio, bool(hot.any()), int(pulses), snr)


def dwell_sweep(scenario: Scenario, cpi_list: Sequence[int], t0: float = 0.0) -> list[DwellRow]:
    """One :class:`DwellRow` per CPI length (pulse counts), in the order given."""
    cpis = list(cpi_list)
    if not cpis:
        raise ValueError("cpi_list is empty")
    return [dwell_point(scenario, int(p), t0) for p in cpis]


def pulses_for(cpi_ms: float, prf: float) -> int:
    return max(2, int(round(cpi_ms * 1e-3 * prf)))


def adapt_dwell(history: Sequence[tuple[float, float]]) -> float:
    """Next CPI (ms) from the ``(cpi_ms, ratio)`` pairs measured so far.

    A log-domain pattern search. Every CPI after the first is a probe taken
    one step from the best CPI seen; a probe that beats it becomes the new
    base and the step is kept, otherwise the step reverses and halves. The
    first step is x1.5 (or /1.5 near the upper bound). Results are clamped
    to [1, 200] ms; a probe cut short by a bound keeps its intended step.
    """
    if not history:
        raise ValueError("history is empty")
    base, best = history[0]
    step = math.log(ADAPT_FACTOR) if base * ADAPT_FACTOR <= MAX_DWELL_MS else -math.log(ADAPT_FACTOR)
    for cpi, ratio in history[1:]:
        moved = math.log(cpi / base)
        at_bound = cpi <= MIN_DWELL_MS or cpi >= MAX_DWELL_MS
        if at_bound and abs(moved) < abs(step):
            step = math.copysign(abs(step), moved if moved else step)
        elif moved:
            step = moved
        if ratio > best:
            base, best = cpi, ratio
        else:
            step = -0.5 * step
    return float(min(max(base * math.exp(step), MIN_DWELL_MS), MAX_DWELL_MS))
