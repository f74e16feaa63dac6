import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from levspec.params import ModelParams, OscillatorParams, SignalParams, SimulationConfig

OMEGA_B = 2 * math.pi * 1e5  # Appendix-style natural frequency


@pytest.fixture(scope="session")
def fig2_model():
    return ModelParams(phi=0.75, omega=OMEGA_B, gamma=2e4)


@pytest.fixture(scope="session")
def osc_b():
    return OscillatorParams(omega=OMEGA_B, gamma=2e4, temperature=300.0,
                            mass=1e-18)


@pytest.fixture(scope="session")
def short_position(osc_b):
    """Shared 0.05 s trajectory at 10 MS/s, dt = 10 ns (5e6 steps)."""
    from levspec.sde import simulate_trajectory
    cfg = SimulationConfig(dt=1e-8, sample_rate=1e7, duration=0.05, seed=901)
    return simulate_trajectory(osc_b, cfg), cfg


@pytest.fixture(scope="session")
def fig2_signal():
    return SignalParams(carrier_freq=3e6, phi=0.75, noise_floor=1e-8)
