import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuasradar.dsp import (
    RangeDopplerMap,
    cross_range_separation,
    default_spectrogram_params,
    noise_floor,
    range_doppler,
    resolutions,
    spectrogram,
    window_taps,
    write_map_csv,
    write_pgm,
    write_spectrogram_csv,
)
from cuasradar.echo_synth import IqCube, noise_generator
from cuasradar.scenario import RadarParams

from oracles import window_peak_sidelobe_db

# peak sidelobe of a 128-tap periodic hann window (oracles.window_peak_sidelobe_db)
HANN_PEAK_SIDELOBE_DB = -31.4676


def cube_of(samples, prf=5000.0):
    return IqCube(np.asarray(samples), 0.0, prf, 12.0, 0.0, 0.03)


def tone(n, k, bins=4, amp=1.0):
    t = np.arange(n)
    return np.repeat((amp * np.exp(2j * np.pi * k * t / n))[:, None], bins, axis=1)


def test_tone_lands_in_bin_3():
    rd = range_doppler(cube_of(tone(64, 3)), "rect")
    c = int(np.argmax(rd.power[0]))
    assert rd.doppler_bin_of_column(c) == 3
    assert rd.doppler_frequency(3) == pytest.approx(3 * rd.doppler_bin_size)


def test_negative_frequency_bins():
    rd = range_doppler(cube_of(tone(64, -5)), "rect")
    k = int(rd.doppler_bin_of_column(np.argmax(rd.power[0])))
    assert k == 59
    assert rd.doppler_frequency(k) == pytest.approx(-5 * rd.doppler_bin_size)


def test_parseval_rectangular():
    x = noise_generator(1, 2).standard_normal((64, 32)) + 1j * noise_generator(3).standard_normal((64, 32))
    rd = range_doppler(cube_of(x.astype(np.complex128)), "rect")
    assert rd.power.sum() / 64 == pytest.approx(np.sum(np.abs(x) ** 2), rel=1e-6)


def test_hann_oracle_frozen():
    assert window_peak_sidelobe_db(window_taps("hann", 128)) == pytest.approx(HANN_PEAK_SIDELOBE_DB, abs=1e-3)


def test_hann_sidelobes_below_31db():
    n = 128
    rd = range_doppler(cube_of(tone(n, 0, 1).astype(np.complex128)), "hann")
    p = rd.power[0]
    peak = p.max()
    c = int(np.argmax(p))
    side = np.delete(p, [c - 1, c, c + 1])  # on-bin hann: main lobe is 3 cells
    assert 10 * np.log10(side.max() / peak + 1e-300) <= -31.0
    # continuous response of the same taps
    assert window_peak_sidelobe_db(window_taps("hann", n)) <= -31.0


def test_dimensions_and_bin_size():
    rd = range_doppler(cube_of(np.zeros((100, 7), complex)))
    assert rd.power.shape == (7, 100)
    assert rd.doppler_bin_size == pytest.approx(50.0)
    assert rd.doppler_bins == 100


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.01, 100.0), seed=st.integers(0, 1000))
def test_linearity(a, seed):
    g = noise_generator(seed)
    x = g.standard_normal((32, 8)) + 1j * g.standard_normal((32, 8))
    p1 = range_doppler(cube_of(x)).power
    p2 = range_doppler(cube_of(a * x)).power
    np.testing.assert_allclose(p2, a * a * p1, rtol=1e-9, atol=1e-12 * a * a * p1.max())


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000))
def test_conjugate_mirrors_doppler(seed):
    g = noise_generator(seed)
    n = 32
    x = g.standard_normal((n, 4)) + 1j * g.standard_normal((n, 4))
    p = range_doppler(cube_of(x), "rect").power
    q = range_doppler(cube_of(np.conj(x)), "rect").power
    # FFT index k of the conjugate holds index -k of the original
    mirrored = np.empty_like(p)
    for c in range(n):
        k = (c - n // 2) % n
        mirrored[:, c] = p[:, (((-k) % n) + n // 2) % n]
    np.testing.assert_allclose(q, mirrored, rtol=1e-9, atol=1e-12)


def test_noise_floor_unit_noise():
    g = noise_generator(7)
    x = (g.standard_normal((128, 512)) + 1j * g.standard_normal((128, 512))) / math.sqrt(2)
    rd = range_doppler(cube_of(x), "rect")
    # unit noise per sample, 128-point DFT: mean cell power 128
    assert rd.noise_floor == pytest.approx(128.0, rel=0.03)
    assert noise_floor(np.ones(10)) == pytest.approx(1 / math.log(2))


def test_spectrogram_constant_tone_ridge():
    prf, f0 = 1000.0, 125.0
    x = np.exp(2j * np.pi * f0 * np.arange(2000) / prf)
    spec = spectrogram(x, prf, 64, 32)
    ridge = spec.frequencies[np.argmax(spec.power, axis=1)]
    np.testing.assert_allclose(ridge, f0, atol=prf / (64 * 4))
    assert spec.frequencies[0] == pytest.approx(-prf / 2)
    assert spec.frequencies.max() < prf / 2


@settings(max_examples=30, deadline=None)
@given(n=st.integers(16, 400), window=st.integers(1, 16), hop=st.integers(1, 16))
def test_spectrogram_frame_count(n, window, hop):
    spec = spectrogram(np.ones(n, complex), 100.0, window, hop)
    assert spec.frames == (n - window) // hop + 1


def test_spectrogram_single_frame_and_short_series():
    assert spectrogram(np.ones(64, complex), 100.0, 64, 8).frames == 1
    with pytest.raises(ValueError, match="shorter than window"):
        spectrogram(np.ones(10, complex), 100.0, 64, 8)


def test_spectrogram_defaults_from_radar():
    radar = RadarParams(1e10, 5000.0, 100, 12.5e6, 64)
    assert default_spectrogram_params(radar) == (25, 12)


def test_resolutions_exact():
    radar = RadarParams(1e10, 5000.0, 100, 12.5e6, 64)
    r = resolutions(radar)
    assert r["range_resolution"] == 12.0
    assert r["doppler_resolution"] == pytest.approx(50.0)
    assert r["velocity_resolution"] == pytest.approx(0.75, abs=1e-12)
    nine = resolutions(RadarParams(9e9, 5000.0, 100, 12.5e6, 64))
    assert nine["velocity_resolution"] == pytest.approx(0.8333, abs=1e-4)


def test_cross_range_separation():
    assert cross_range_separation(1.0, 1.0, 0.03) == pytest.approx(66.6667, abs=1e-4)
    assert cross_range_separation(1.0, 0.0, 0.03) == 0.0
    assert cross_range_separation(2.0, 3.0, 0.015) == pytest.approx(2 * cross_range_separation(2.0, 3.0, 0.03))
    with pytest.raises(ValueError):
        cross_range_separation(1.0, 1.0, 0.0)


def test_exports(tmp_path):
    rd = range_doppler(cube_of(tone(16, 2, 3)))
    write_map_csv(rd, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert len(lines) == 4 and lines[0].startswith("range_m,")
    assert len(lines[1].split(",")) == 17
    write_pgm(rd.magnitude_db, tmp_path / "m.pgm")
    raw = (tmp_path / "m.pgm").read_bytes()
    assert raw.startswith(b"P5\n16 3\n65535\n")
    assert len(raw) == len(b"P5\n16 3\n65535\n") + 16 * 3 * 2
    spec = spectrogram(np.ones(64, complex), 100.0, 16, 8)
    write_spectrogram_csv(spec, tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == spec.frames + 1
