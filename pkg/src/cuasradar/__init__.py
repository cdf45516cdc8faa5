"""Pulse-Doppler drone radar simulator with micro-Doppler recognition and design calculators."""

from .scenario import Scenario, load_scenario, target_state_at
from .tracker import FrameConfig, cws_frame, run_frames

__version__ = "0.1.0"

__all__ = ["Scenario", "load_scenario", "target_state_at", "FrameConfig", "cws_frame", "run_frames", "__version__"]
