import math
from dataclasses import replace
from pathlib import Path

import pytest

from cuasradar.scenario import (
    BladeSet,
    LinkBudget,
    RadarParams,
    Scenario,
    TargetModel,
    load_scenario,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "cuasradar" / "data"


def load_data(name: str) -> Scenario:
    return load_scenario((DATA / name).read_text())


@pytest.fixture(scope="session")
def six_targets() -> Scenario:
    return load_data("six_targets.json")


@pytest.fixture(scope="session")
def quad_rotor() -> Scenario:
    return load_data("quad_rotor.json")


def xband(pulses=128, bins=64, prf=5000.0) -> RadarParams:
    return RadarParams(carrier_frequency=1e10, prf=prf, pulses_per_cpi=pulses, bandwidth=12.5e6, range_bins=bins)


def unit_budget(power=1.0) -> LinkBudget:
    return LinkBudget(transmit_power=power, tx_gain=1000.0, rx_gain=1000.0, system_noise_temp=290.0, noise_bandwidth=1e6)


def budget_for_snr(radar: RadarParams, rcs: float, range_m: float, snr_db: float) -> LinkBudget:
    """Budget whose single-pulse SNR for (rcs, range) equals ``snr_db``."""
    from cuasradar.echo_synth import single_pulse_snr

    base = unit_budget()
    gap = snr_db - single_pulse_snr(base, radar, rcs, range_m)
    return replace(base, transmit_power=10 ** (gap / 10))


def point_target(tid="t1", y=600.0, z=0.0, speed=0.0, rcs=1.0, category="Vehicle", **kw) -> TargetModel:
    """Target on the +y axis moving toward the radar at ``speed``."""
    wps = ((0.0, (0.0, y, z)),) if speed == 0 else ((0.0, (0.0, y, z)), (100.0, (0.0, y - 100.0 * speed, z)))
    return TargetModel(tid, category, wps, mean_rcs=rcs, **kw)


def rotor(n=2, length=0.12, rate_hz=80.0, plane="lifting", refl=0.25, **kw) -> BladeSet:
    return BladeSet(n, length, 2 * math.pi * rate_hz, plane, reflectivity_scale=refl, **kw)


# acceptance criteria report one line each; the summary repeats them after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
