"""Toric-code memory simulation with leakage, leakage reduction circuits and heralded decoding."""

from .circuits import Scheme, build_schedule
from .lattice import build_lattice
from .montecarlo import RunStats, SimConfig, run_batch, run_trial
from .noise import NoiseParams

__all__ = ["NoiseParams", "RunStats", "Scheme", "SimConfig", "build_lattice", "build_schedule", "run_batch",
           "run_trial"]
