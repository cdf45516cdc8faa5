"""Range-Doppler maps, spectrograms and resolution formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft
from scipy.signal import get_window

from .constants import SPEED_OF_LIGHT
from .echo_synth import IqCube
from .scenario import RadarParams

_TINY = 1e-30
# mean / median of an exponential (square-law noise) distribution
MEDIAN_TO_MEAN_DB = -10 * math.log10(math.log(2))


def to_db(power):
    return 10 * np.log10(np.maximum(power, _TINY))


def window_taps(name: str, n: int) -> np.ndarray:
    if name in ("rect", "rectangular", "boxcar"):
        return np.ones(n)
    return get_window(name, n, fftbins=True)


@dataclass(frozen=True)
class RangeDopplerMap:
    """Linear power, shape (range_bins, doppler_bins), zero Doppler centred.

    Doppler bin indices used elsewhere (``Detection.doppler_bin``) are FFT
    indices in ``[0, N)``; :meth:`column` maps them to the centred layout.
    """

    power: np.ndarray
    doppler_bin_size: float
    range_bin_size: float
    noise_floor: float  # linear
    t0: float
    wavelength: float
    beam_azimuth: float = 0.0
    bin_azimuth: np.ndarray = None
    window: str = "hann"

    @property
    def magnitude_db(self) -> np.ndarray:
        return to_db(self.power)

    @property
    def noise_floor_estimate(self) -> float:
        """Noise floor in dB."""
        return float(to_db(self.noise_floor))

    @property
    def range_bins(self) -> int:
        return self.power.shape[0]

    @property
    def doppler_bins(self) -> int:
        return self.power.shape[1]

    def column(self, doppler_bin: int) -> int:
        n = self.doppler_bins
        return (doppler_bin + n // 2) % n

    def doppler_bin_of_column(self, col):
        n = self.doppler_bins
        return (np.asarray(col) - n // 2) % n

    def doppler_frequency(self, doppler_bin):
        """Signed frequency (Hz) of FFT bin index/indices."""
        n = self.doppler_bins
        k = np.asarray(doppler_bin)
        return np.where(k < (n + 1) // 2, k, k - n) * self.doppler_bin_size

    @property
    def doppler_axis(self) -> np.ndarray:
        n = self.doppler_bins
        return (np.arange(n) - n // 2) * self.doppler_bin_size

    def spectrum(self, range_bin: int) -> np.ndarray:
        """Centred Doppler power spectrum of one range bin."""
        return self.power[range_bin]


@dataclass(frozen=True)
class Spectrogram:
    """STFT power, shape (frames, frequency_bins), zero frequency centred."""

    power: np.ndarray
    frame_hop: float  # s
    window_length: int
    frequencies: np.ndarray
    range_bin: int = -1

    @property
    def magnitude_db(self) -> np.ndarray:
        return to_db(self.power)

    @property
    def frames(self) -> int:
        return self.power.shape[0]

    @property
    def frame_times(self) -> np.ndarray:
        return np.arange(self.frames) * self.frame_hop


FLOOR_SAMPLE = 32768


def noise_floor(power: np.ndarray) -> float:
    """Median cell power corrected to the mean of square-law noise (linear).

    Large surfaces are subsampled on a fixed stride to at most
    :data:`FLOOR_SAMPLE` cells.
    """
    flat = np.asarray(power).ravel()
    step = max(1, -(-flat.size // FLOOR_SAMPLE))
    return float(np.median(flat[::step])) / math.log(2)


def range_doppler(cube: IqCube, window: str = "hann") -> RangeDopplerMap:
    """Windowed slow-time DFT of every range bin, in the cube's own precision."""
    n = cube.pulses
    double = cube.samples.dtype == np.complex128
    w = window_taps(window, n).astype(np.float64 if double else np.float32)
    # bins x pulses keeps the slow-time FFT on contiguous rows
    rows = np.ascontiguousarray(cube.samples.T, dtype=np.complex128 if double else np.complex64) * w[None, :]
    spec = sp_fft.fft(rows, axis=1, overwrite_x=True)
    power = np.fft.fftshift(spec.real**2 + spec.imag**2, axes=1)
    return RangeDopplerMap(
        power=power,
        doppler_bin_size=cube.prf / n,
        range_bin_size=cube.range_bin_size,
        noise_floor=noise_floor(power),
        t0=cube.t0,
        wavelength=cube.wavelength,
        beam_azimuth=cube.beam_azimuth,
        bin_azimuth=cube.bin_azimuth,
        window=window,
    )


def spectrogram(
    series,
    prf: float,
    window_length: int,
    hop: int | None = None,
    window: str = "hann",
    zero_pad: int = 4,
    range_bin: int = -1,
) -> Spectrogram:
    series = np.asarray(series)
    if hop is None:
        hop = max(1, window_length // 2)
    if window_length < 1 or hop < 1:
        raise ValueError("window_length and hop must be >= 1")
    if len(series) < window_length:
        raise ValueError(f"series of {len(series)} samples shorter than window {window_length}")
    frames = (len(series) - window_length) // hop + 1
    idx = np.arange(window_length)[None, :] + hop * np.arange(frames)[:, None]
    seg = series.astype(np.complex64)[idx] * window_taps(window, window_length).astype(np.float32)[None, :]
    nfft = window_length * zero_pad
    spec = np.fft.fftshift(sp_fft.fft(seg, n=nfft, axis=1, overwrite_x=True), axes=1)
    freqs = np.fft.fftshift(np.fft.fftfreq(nfft, d=1 / prf))
    return Spectrogram(
        power=(spec.real**2 + spec.imag**2).astype(float),
        frame_hop=hop / prf,
        window_length=window_length,
        frequencies=freqs,
        range_bin=range_bin,
    )


def default_spectrogram_params(radar: RadarParams) -> tuple[int, int]:
    window = max(2, radar.pulses_per_cpi // 4)
    return window, max(1, window // 2)


def resolutions(radar: RadarParams) -> dict:
    doppler = radar.prf / radar.pulses_per_cpi
    return {
        "range_resolution": SPEED_OF_LIGHT / (2 * radar.bandwidth),
        "doppler_resolution": doppler,
        "velocity_resolution": doppler * radar.wavelength / 2,
    }


def cross_range_separation(scatterer_distance: float, rotation_rate: float, wavelength: float) -> float:
    """Doppler separation (Hz) of two scatterers ``scatterer_distance`` apart in cross-range."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    return 2 * scatterer_distance * rotation_rate / wavelength


# --------------------------------------------------------------------------
# export


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def write_map_csv(rd: RangeDopplerMap, path) -> None:
    """Rows are range bins; header row holds Doppler axis values in Hz."""
    db = rd.magnitude_db
    lines = ["range_m," + ",".join(_fmt(f) for f in rd.doppler_axis)]
    for i, row in enumerate(db):
        lines.append(_fmt(i * rd.range_bin_size) + "," + ",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_spectrogram_csv(spec: Spectrogram, path) -> None:
    db = spec.magnitude_db
    lines = ["time_s," + ",".join(_fmt(f) for f in spec.frequencies)]
    for t, row in zip(spec.frame_times, db):
        lines.append(_fmt(t) + "," + ",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_pgm(db: np.ndarray, path, floor_db: float | None = None) -> None:
    """16-bit binary PGM scaled linearly in dB between ``floor_db`` and the peak."""
    db = np.asarray(db, dtype=float)
    peak = float(np.max(db))
    lo = float(np.median(db)) if floor_db is None else floor_db
    span = max(peak - lo, 1e-9)
    img = np.clip((db - lo) / span, 0, 1)
    data = np.round(img * 65535).astype(">u2")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
