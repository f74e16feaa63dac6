import math

import pytest

from levspec.errors import InvalidConfigError
from levspec.params import (
    K_BOLTZMANN,
    ModelParams,
    OscillatorParams,
    RinDrift,
    SignalParams,
    SimulationConfig,
)


def test_oscillator_invariants():
    OscillatorParams(omega=1.0, gamma=1.0, temperature=0.0, mass=1.0)
    for bad in (dict(omega=0), dict(gamma=-1), dict(temperature=-1), dict(mass=0)):
        kw = dict(omega=1.0, gamma=1.0, temperature=1.0, mass=1.0) | bad
        with pytest.raises(InvalidConfigError):
            OscillatorParams(**kw)


def test_equipartition_values():
    osc = OscillatorParams(omega=2 * math.pi * 1e5, gamma=2e4,
                           temperature=300.0, mass=1e-18)
    assert osc.var_z == pytest.approx(
        K_BOLTZMANN * 300.0 / (1e-18 * (2 * math.pi * 1e5) ** 2))
    # Appendix-style magnitude check
    assert osc.var_z == pytest.approx(1.05e-14, rel=0.01)


def test_signal_exactly_one_of_kappa_phi():
    SignalParams(carrier_freq=1e6, phi=0.5)
    SignalParams(carrier_freq=1e6, kappa=1e7)
    with pytest.raises(InvalidConfigError):
        SignalParams(carrier_freq=1e6)
    with pytest.raises(InvalidConfigError):
        SignalParams(carrier_freq=1e6, phi=0.5, kappa=1e7)


def test_sensitivity_from_phi():
    osc = OscillatorParams(omega=2 * math.pi * 1e5, gamma=2e4,
                           temperature=300.0, mass=1e-18)
    sig = SignalParams(carrier_freq=3e6, phi=0.75)
    kappa = sig.sensitivity_for(osc)
    assert kappa * math.sqrt(osc.var_z) == pytest.approx(0.75, rel=1e-12)
    direct = SignalParams(carrier_freq=3e6, kappa=kappa)
    assert direct.sensitivity_for(osc) == kappa


def test_simconfig_decimation():
    cfg = SimulationConfig(dt=1e-9, sample_rate=1e7, duration=1.0, seed=0)
    assert cfg.decimation == 100
    assert cfg.n_samples == 10_000_000
    with pytest.raises(InvalidConfigError):
        SimulationConfig(dt=4e-8, sample_rate=1e7, duration=1.0, seed=0)
    with pytest.raises(InvalidConfigError):
        SimulationConfig(dt=1e-9, sample_rate=1e7, duration=1e-8, seed=0)
    with pytest.raises(InvalidConfigError):
        SimulationConfig(dt=-1e-9, sample_rate=1e7, duration=1.0, seed=0)


def test_rin_model_validation():
    RinDrift(width=0.01)
    RinDrift(width=0.01, model="ramp")
    with pytest.raises(InvalidConfigError):
        RinDrift(width=-0.1)
    with pytest.raises(InvalidConfigError):
        RinDrift(width=0.1, model="sawtooth")


def test_model_params_validation():
    ModelParams(phi=0.0, omega=1.0, gamma=1.0)
    with pytest.raises(InvalidConfigError):
        ModelParams(phi=-0.1, omega=1.0, gamma=1.0)
    with pytest.raises(InvalidConfigError):
        ModelParams(phi=0.1, omega=0.0, gamma=1.0)
