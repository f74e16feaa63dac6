"""Physical and simulation parameter bundles.

All angular frequencies (``omega``, rad/s) and damping rates (``gamma``, 1/s)
are kept in SI angular units internally; true frequencies (carrier, sample
rate, grids) are in Hz.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .errors import InvalidConfigError

#: Boltzmann constant, J/K (exact SI value).
K_BOLTZMANN = 1.380649e-23


@dataclass(frozen=True)
class OscillatorParams:
    """Stochastic harmonic oscillator: z'' + gamma*z' + omega^2 z = w(t)."""

    omega: float        # natural angular frequency, rad/s
    gamma: float        # damping rate, 1/s
    temperature: float  # centre-of-mass temperature, K
    mass: float         # particle mass, kg

    def __post_init__(self):
        if not (self.omega > 0):
            raise InvalidConfigError(f"omega must be > 0, got {self.omega}")
        if not (self.gamma > 0):
            raise InvalidConfigError(f"gamma must be > 0, got {self.gamma}")
        if self.temperature < 0:
            raise InvalidConfigError(f"temperature must be >= 0, got {self.temperature}")
        if not (self.mass > 0):
            raise InvalidConfigError(f"mass must be > 0, got {self.mass}")

    @property
    def kt_over_m(self) -> float:
        return K_BOLTZMANN * self.temperature / self.mass

    @property
    def var_z(self) -> float:
        """Equipartition position variance k_B T / (M omega^2), m^2."""
        return self.kt_over_m / self.omega**2

    @property
    def var_v(self) -> float:
        """Equipartition velocity variance k_B T / M, (m/s)^2."""
        return self.kt_over_m

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SignalParams:
    """Heterodyne detection: v(t) = v0 (1+r(t)) sin(2 pi f0 t + theta0 + kappa z)."""

    carrier_freq: float             # f0, Hz
    amplitude: float = 1.0          # v0, dimensionless
    phase_offset: float = 0.0       # theta0, rad
    kappa: Optional[float] = None   # position-to-phase sensitivity, rad/m
    phi: Optional[float] = None     # target RMS modulation depth, rad (alternative to kappa)
    noise_floor: float = 0.0        # two-sided PSD of additive white detector noise, 1/Hz

    def __post_init__(self):
        if not (self.carrier_freq > 0):
            raise InvalidConfigError(f"carrier_freq must be > 0, got {self.carrier_freq}")
        if not (self.amplitude > 0):
            raise InvalidConfigError(f"amplitude must be > 0, got {self.amplitude}")
        if self.noise_floor < 0:
            raise InvalidConfigError(f"noise_floor must be >= 0, got {self.noise_floor}")
        if (self.kappa is None) == (self.phi is None):
            raise InvalidConfigError("exactly one of {kappa, phi} must be supplied")
        if self.phi is not None and self.phi < 0:
            raise InvalidConfigError(f"phi must be >= 0, got {self.phi}")

    def sensitivity_for(self, osc: OscillatorParams) -> float:
        """kappa in rad/m, deriving it from phi via Phi^2 = kappa^2 <z^2> if needed."""
        if self.kappa is not None:
            return self.kappa
        var_z = osc.var_z
        if var_z <= 0:
            raise InvalidConfigError("phi-specified signal requires a thermal oscillator (T > 0)")
        return self.phi / math.sqrt(var_z)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RinDrift:
    """Slow relative-intensity drift of fractional width R."""

    width: float          # R, dimensionless
    model: str = "constant"  # "constant" (one N(0, R^2) offset per run) or "ramp" (-R -> +R)

    def __post_init__(self):
        if self.width < 0:
            raise InvalidConfigError(f"rin width must be >= 0, got {self.width}")
        if self.model not in ("constant", "ramp"):
            raise InvalidConfigError(f"rin model must be 'constant' or 'ramp', got {self.model!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """Integration / sampling / reproducibility settings."""

    dt: float               # integrator step, s
    sample_rate: float      # output rate, S/s
    duration: float         # s
    seed: int               # 64-bit RNG seed
    rin_drift: Optional[RinDrift] = None

    def __post_init__(self):
        if not (self.dt > 0):
            raise InvalidConfigError(f"dt must be > 0, got {self.dt}")
        if not (self.sample_rate > 0):
            raise InvalidConfigError(f"sample_rate must be > 0, got {self.sample_rate}")
        if self.sample_rate * self.dt > 1 + 1e-12:
            raise InvalidConfigError("sample_rate * dt must be <= 1")
        k = 1.0 / (self.sample_rate * self.dt)
        if abs(k - round(k)) > 1e-6 * k:
            raise InvalidConfigError(
                f"1/(sample_rate*dt) = {k} is not an integer decimation factor")
        if self.duration * self.sample_rate < 2:
            raise InvalidConfigError("duration * sample_rate must be >= 2 samples")

    @property
    def decimation(self) -> int:
        return round(1.0 / (self.sample_rate * self.dt))

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass(frozen=True)
class ModelParams:
    """Spectral-shape parameters alpha = (Phi, Omega, Gamma) of the heterodyne model."""

    phi: float    # RMS phase-modulation depth, rad
    omega: float  # natural angular frequency, rad/s
    gamma: float  # damping rate, 1/s

    def __post_init__(self):
        if self.phi < 0:
            raise InvalidConfigError(f"phi must be >= 0, got {self.phi}")
        if not (self.omega > 0):
            raise InvalidConfigError(f"omega must be > 0, got {self.omega}")
        if not (self.gamma > 0):
            raise InvalidConfigError(f"gamma must be > 0, got {self.gamma}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(phi=d["phi"], omega=d["omega"], gamma=d["gamma"])
