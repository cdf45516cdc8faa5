import math
from dataclasses import asdict, fields, replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cuasradar.atr import (
    UNKNOWN,
    Category,
    ClassifierThresholds,
    FeatureVector,
    KineticFeatures,
    TargetCategory,
    classify,
    default_thresholds,
    extract_features,
    invert_blade_length,
    jem_line_spacing,
    kinetic_features,
    ridge_excursion,
)
from cuasradar.detector import Detection
from cuasradar.dsp import range_doppler, spectrogram
from cuasradar.echo_synth import blade_returns, synth_cell_series, synth_cpi
from cuasradar.scenario import BladeSet, Scenario, TargetModel, target_state_at

from conftest import point_target, rotor, unit_budget, xband
from oracles import circle_trace

TIP_DOPPLER_HZ = 2010.6192982974676  # see test_echo_synth


def features_for(scenario: Scenario, tid: str, t0: float = 0.0, pulses: int = 5000):
    """Detection at the truth cell, its recognition spectrogram and the extracted features."""
    radar = scenario.radar
    rd = range_doppler(synth_cpi(scenario, t0))
    state = target_state_at(scenario, tid, t0)
    rb = int(state.range // radar.range_bin_size)
    col = int(np.argmax(rd.power[rb]))
    k = int(rd.doppler_bin_of_column(col))
    det = Detection(rb, k, rb * radar.range_bin_size, float(rd.doppler_frequency(k)) * radar.wavelength / 2,
                    10 * math.log10(rd.power[rb, col] / rd.noise_floor), t0, 0.0)
    window = 4 * radar.pulses_per_cpi
    series = synth_cell_series(scenario, t0, rb, pulses)
    spec = spectrogram(series, radar.prf, window, window // 4, "blackmanharris", 4, rb)
    return det, spec, rd, extract_features(det, spec, rd, radar, scenario.budget)


def only(scenario, tid, **changes):
    t = replace(scenario.target(tid), **changes)
    return replace(scenario, targets=(t,))


# --------------------------------------------------------------------------
# JEM spacing


def rotor_spectrum(n_blades, rate_hz=80.0, prf=20000.0, n=8192):
    x = blade_returns(BladeSet(n_blades, 0.12, 2 * math.pi * rate_hz), 0.0, 0.0, 0.03, np.arange(n) / prf)
    w = np.hanning(n)
    spec = np.fft.fftshift(np.abs(np.fft.fft(x * w)) ** 2)
    # add a small noise floor so the floor estimate is meaningful
    return spec + spec.max() * 1e-6, prf / n


def test_four_blades_320hz():
    spec, bin_hz = rotor_spectrum(4)
    spacing, count = jem_line_spacing(spec, bin_hz)
    assert spacing == pytest.approx(320.0, abs=bin_hz)
    assert count >= 3


def test_single_peak():
    s = np.ones(64)
    s[20] = 1e3
    assert jem_line_spacing(s) == (0.0, 1)


def test_too_short():
    with pytest.raises(ValueError):
        jem_line_spacing(np.ones(7))


@settings(max_examples=20, deadline=None)
@given(c=st.floats(1e-6, 1e6))
def test_scale_invariant(c):
    spec, bin_hz = rotor_spectrum(3)
    got, ref = jem_line_spacing(spec * c, bin_hz), jem_line_spacing(spec, bin_hz)
    assert got[1] == ref[1]
    assert got[0] == pytest.approx(ref[0], rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(spacing=st.integers(12, 40), n_lines=st.integers(3, 9), start=st.integers(5, 30))
def test_comb_oracle(spacing, n_lines, start):
    s = np.ones(512)
    for i in range(n_lines):
        s[start + i * spacing] = 1e3
    got, count = jem_line_spacing(s, 2.5)
    assert count == n_lines
    assert got == pytest.approx(2.5 * spacing)


# --------------------------------------------------------------------------
# blade length


def test_invert_examples():
    assert invert_blade_length(TIP_DOPPLER_HZ, 2 * math.pi * 80, 0.03, 0, 0) == pytest.approx(0.12, rel=1e-12)
    assert invert_blade_length(2 * TIP_DOPPLER_HZ, 2 * math.pi * 80, 0.03, 0, 0) == pytest.approx(0.24, rel=1e-12)
    with pytest.raises(ValueError, match="geometry unobservable"):
        invert_blade_length(100.0, 10.0, 0.03, 0.0, math.pi / 2)
    with pytest.raises(ValueError):
        invert_blade_length(100.0, 0.0, 0.03, 0.0, 0.0)


@pytest.mark.parametrize("alpha, beta, length", [(0.0, 0.0, 0.12), (0.5, 0.3, 0.2), (-0.8, 0.6, 0.3)])
def test_ridge_round_trip_within_15pct(alpha, beta, length):
    prf, lam = 20000.0, 0.03
    blade = BladeSet(1, length, 2 * math.pi * 40.0)
    x = blade_returns(blade, alpha, beta, lam, np.arange(8000) / prf)
    spec = spectrogram(x, prf, 128, 16, "hann", 4)
    exc = ridge_excursion(spec, 0.0, window="hann")
    est = invert_blade_length(exc, blade.rotation_rate, lam, alpha, beta)
    assert est == pytest.approx(length, rel=0.15)


# --------------------------------------------------------------------------
# kinetics


def test_constant_velocity_trace():
    pts = [(t, (3.0 * t, -4.0 * t), 5.0) for t in np.arange(6.0)]
    k = kinetic_features(pts)
    assert k.mean_speed == pytest.approx(5.0)
    assert k.speed_variance == pytest.approx(0.0, abs=1e-20)
    assert k.heading_change_rate == pytest.approx(0.0, abs=1e-12)
    assert k.acceleration == pytest.approx(0.0, abs=1e-12)
    assert k.track_duration == 5.0


@pytest.mark.parametrize("radius, speed", [(200.0, 10.0), (50.0, 5.0), (1000.0, 40.0)])
def test_circle_heading_rate(radius, speed):
    k = kinetic_features(circle_trace(radius, speed, 40, 0.1))
    assert k.heading_change_rate == pytest.approx(speed / radius, rel=0.02)
    assert k.acceleration == pytest.approx(speed**2 / radius, rel=0.02)


def test_trace_errors():
    with pytest.raises(ValueError, match="insufficient trace"):
        kinetic_features([(0, (0, 0), 0), (1, (1, 0), 1)])
    with pytest.raises(ValueError):
        kinetic_features([(0, (0, 0), 0), (0, (1, 0), 1), (1, (2, 0), 1)])


# --------------------------------------------------------------------------
# features


def test_quad_rotor_features(six_targets):
    _, _, _, f = features_for(only(six_targets, "mr1"), "mr1")
    assert f.jem_line_count >= 2
    assert f.micro_body_ratio > 0.01
    assert f.rotation_rate_estimate == pytest.approx(80.0, abs=5.0)
    assert f.rotation_rate_estimate == pytest.approx(f.jem_spacing / f.blade_count_estimate)


def test_bladeless_noise_off(six_targets):
    s = replace(only(six_targets, "sh1"), noise_enabled=False)
    with np.errstate(divide="ignore"):
        _, _, _, f = features_for(s, "sh1")
    assert f.micro_body_ratio < 1e-6
    assert f.jem_spacing == 0.0
    assert f.body_speed == pytest.approx(abs(target_state_at(s, "sh1", 0.0).radial_speed), abs=0.05)


def test_bird_flap_rate(six_targets):
    s = only(six_targets, "sb1", flap_rate=4.0)
    _, _, _, f = features_for(s, "sb1")
    assert f.flap_rate_estimate == pytest.approx(4.0, abs=0.5)
    assert f.jem_spacing == 0.0


def test_feature_invariants(six_targets):
    for tid in ("mr1", "fw1", "lb1"):
        _, _, _, f = features_for(only(six_targets, tid), tid)
        assert f.micro_body_ratio >= 0 and f.md_bandwidth >= 0
        assert (f.jem_spacing == 0) == (f.jem_line_count < 2)


def test_range_bin_mismatch(six_targets):
    det, spec, rd, _ = features_for(only(six_targets, "mr1"), "mr1")
    bad = replace(spec, range_bin=det.range_bin + 3)
    with pytest.raises(ValueError, match="does not match"):
        extract_features(det, bad, rd, six_targets.radar, six_targets.budget)


@settings(max_examples=8, deadline=None)
@given(c=st.floats(1e-3, 1e3))
def test_amplitude_scaling_keeps_category(six_targets, c):
    s = only(six_targets, "mr1")
    det, spec, rd, f = features_for(s, "mr1")
    scaled = extract_features(
        det, replace(spec, power=spec.power * c),
        replace(rd, power=rd.power * c, noise_floor=rd.noise_floor * c), s.radar, s.budget,
    )
    assert classify(scaled) == classify(f)
    for name in ("jem_line_count", "blade_count_estimate", "appendage_flag"):
        assert getattr(scaled, name) == getattr(f, name)
    assert scaled.jem_spacing == pytest.approx(f.jem_spacing, rel=1e-9)
    assert scaled.micro_body_ratio == pytest.approx(f.micro_body_ratio, rel=1e-9)


# --------------------------------------------------------------------------
# classification


def test_phantom_like_multirotor(six_targets):
    _, _, _, f = features_for(only(six_targets, "mr1"), "mr1")
    assert classify(f).category is Category.MULTI_ROTOR


def test_ship(six_targets):
    ship = six_targets.target("sh1")
    (t0, p0), _ = ship.waypoints
    # 10 m/s straight toward the radar
    u = -np.asarray(p0) / np.linalg.norm(p0)
    wps = ((0.0, p0), (60.0, tuple(np.asarray(p0) + 600.0 * u)))
    s = only(six_targets, "sh1", waypoints=wps)
    _, _, _, f = features_for(s, "sh1")
    assert f.body_speed == pytest.approx(10.0, abs=0.5)
    assert classify(f).category is Category.SHIP


def test_all_zero_unknown():
    assert classify(FeatureVector()) == UNKNOWN
    assert classify(FeatureVector()).confidence == 0.0


def test_helicopter_rule():
    f = FeatureVector(micro_body_ratio=0.2, jem_spacing=40.0, jem_line_count=5, rotation_rate_estimate=20.0,
                      blade_count_estimate=2, rcs_estimate=5.0, blade_length_estimate=4.0)
    th = replace(ClassifierThresholds(), min_rotation_hz=10.0)
    assert classify(f, thresholds=th).category is Category.HELICOPTER


@pytest.mark.parametrize(
    "inst, stable, expect",
    [(0.5, 0.0, Category.MULTI_ROTOR), (0.5, 0.2, Category.VTOL_HYBRID), (0.05, 0.8, Category.FIXED_WING)],
)
def test_drone_subclass_rules(inst, stable, expect):
    f = FeatureVector(micro_body_ratio=0.1, jem_spacing=160.0, jem_line_count=6, rotation_rate_estimate=80.0,
                      blade_count_estimate=2, rcs_estimate=0.05, md_instability=inst, stable_fraction=stable)
    out = classify(f)
    assert out.category is expect
    assert out.confidence == 1.0


def test_bird_rules():
    f = FeatureVector(flap_rate_estimate=3.0, rcs_estimate=0.1, appendage_flag=True)
    assert classify(f).category is Category.LARGE_BIRD
    assert classify(replace(f, appendage_flag=False)).category is Category.SMALL_BIRD


def test_clutter_and_vehicle_rules():
    assert classify(FeatureVector(rcs_estimate=3.0, body_speed=0.1)).category is Category.CLUTTER
    assert classify(FeatureVector(rcs_estimate=3.0, body_speed=25.0)).category is Category.VEHICLE


def test_kinetics_refine_confidence():
    f = FeatureVector(flap_rate_estimate=3.0, rcs_estimate=0.1)
    fast = KineticFeatures(45.0, 0.0, 0.0, 0.0, 10.0)
    assert classify(f, fast).confidence < classify(f).confidence


feature_values = st.fixed_dictionaries(
    {
        "body_speed": st.floats(0, 100), "rcs_estimate": st.floats(0, 100), "micro_body_ratio": st.floats(0, 2),
        "md_bandwidth": st.floats(0, 3000), "jem_spacing": st.floats(0, 1000), "jem_line_count": st.integers(0, 20),
        "rotation_rate_estimate": st.floats(0, 500), "blade_count_estimate": st.integers(0, 4),
        "flap_rate_estimate": st.floats(0, 30), "appendage_flag": st.booleans(), "md_instability": st.floats(0, 2),
        "stable_fraction": st.floats(0, 1), "blade_length_estimate": st.floats(0, 10),
    }
)


@settings(max_examples=200, deadline=None)
@given(values=feature_values)
def test_classify_total_and_deterministic(values):
    f = FeatureVector(**values)
    a, b = classify(f), classify(f)
    assert a == b
    assert isinstance(a, TargetCategory)
    assert 0.0 <= a.confidence <= 1.0


def test_target_category_invariants():
    with pytest.raises(ValueError):
        TargetCategory(Category.SHIP, 1.5)
    with pytest.raises(ValueError):
        TargetCategory(Category.UNKNOWN, 0.4)
    assert TargetCategory("Ship", 0.5).category is Category.SHIP


def test_thresholds_file_round_trip():
    th = default_thresholds()
    assert th == ClassifierThresholds()
    assert ClassifierThresholds.from_json(th.to_json()) == th
    with pytest.raises(ValueError, match="unknown threshold keys"):
        ClassifierThresholds.from_json('{"bogus": 1}')
