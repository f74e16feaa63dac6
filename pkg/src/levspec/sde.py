"""Thermal-oscillator trajectories and heterodyne signal synthesis.

simulate_trajectory integrates z'' + gamma z' + omega^2 z = w(t) by plain
Euler-Maruyama at step ``dt`` and decimates to the output rate; the Wiener
increment on the velocity has standard deviation sqrt(2 kB T gamma / M * dt),
which reproduces the Lorentzian position spectrum and equipartition. The
initial state is drawn from the exact stationary distribution of the
discrete (EM) chain, so trajectories are stationary from the first sample.

Two integrator backends are provided: a compiled Cython kernel and a blocked
pure-numpy fallback, selected at import (override per call or with the
LEVSPEC_BACKEND environment variable). Both consume the identical Philox
draw sequence; outputs agree to ~1e-12 relative (float reassociation only),
so bit-level determinism holds per backend.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .errors import AliasingError, InvalidConfigError, UnstableStepError
from .params import OscillatorParams, SignalParams, SimulationConfig
from .rng import STREAM_DETECTOR, STREAM_RIN, STREAM_TRAJECTORY, stream_generator

try:
    from . import _em_kernel

    DEFAULT_BACKEND = "cython"
except ImportError:  # pragma: no cover - build-environment dependent
    _em_kernel = None
    DEFAULT_BACKEND = "numpy"

from ._em_fallback import BlockedIntegrator, _step_matrix

# draws per integrator chunk; a multiple of any sane decimation factor
_CHUNK_STEPS = 1 << 22


@dataclass
class TimeSeries:
    """Uniformly sampled real signal plus provenance metadata."""

    sample_rate: float
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise InvalidConfigError("time series must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidConfigError("time series contains non-finite values")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.n / self.sample_rate

    def times(self) -> np.ndarray:
        return np.arange(self.n) / self.sample_rate


def em_stationary_moments(osc: OscillatorParams, dt: float) -> tuple[float, float, float]:
    """Exact stationary (var_z, var_v, cov_zv) of the discrete EM chain.

    Solves  Sigma = A Sigma A^T + diag(0, q^2)  for the one-step update
    matrix A; as dt -> 0 these tend to the equipartition values. The
    leading-order position-variance inflation is ~ omega^2 dt / gamma.
    """
    # nondimensionalized state (omega*z, v) with kT/M = 1 keeps the solve
    # well-conditioned; physical scales are restored afterwards
    w, g = osc.omega, osc.gamma
    A = np.array([[1.0, w * dt], [-w * dt, 1.0 - g * dt]])
    G = np.array([[0.0, 0.0], [0.0, 2.0 * g * dt]])
    S = solve_discrete_lyapunov(A, G)
    s = osc.kt_over_m
    return float(s * S[0, 0] / w**2), float(s * S[1, 1]), float(s * S[0, 1] / w)


def em_effective_params(osc: OscillatorParams, dt: float) -> tuple[float, float]:
    """(omega_eff, gamma_eff) of the EM chain from its pole pair.

    The EM update is an exact AR(2) process; mapping its poles
    lambda = exp((-gamma_eff/2 +- i omega_1,eff) dt) back to continuous time
    gives the oscillator the simulation actually realizes. Useful as the
    truth reference for simulation-twin validation.
    """
    h = dt
    g, w2 = osc.gamma, osc.omega**2
    det = 1.0 - g * h + w2 * h * h
    disc = g * g - 4.0 * w2
    if disc >= 0:
        raise InvalidConfigError("em_effective_params requires an underdamped oscillator")
    gamma_eff = -math.log(det) / h
    omega1 = math.atan2(0.5 * h * math.sqrt(-disc), 1.0 - 0.5 * g * h) / h
    omega_eff = math.sqrt(omega1**2 + 0.25 * gamma_eff**2)
    return omega_eff, gamma_eff


def _select_backend(backend: Optional[str]) -> str:
    name = backend or os.environ.get("LEVSPEC_BACKEND") or DEFAULT_BACKEND
    if name not in ("cython", "numpy"):
        raise InvalidConfigError(f"unknown backend {name!r}")
    if name == "cython" and _em_kernel is None:
        raise InvalidConfigError("cython backend requested but extension not built")
    return name


def simulate_trajectory(
    params: OscillatorParams,
    config: SimulationConfig,
    backend: Optional[str] = None,
) -> TimeSeries:
    """Simulate the position z(t), decimated to config.sample_rate.

    Deterministic given (params, config.seed, backend). Raises
    UnstableStepError when dt * omega > 0.1.
    """
    if config.dt * params.omega > 0.1:
        raise UnstableStepError(
            f"dt*omega = {config.dt * params.omega:.3g} > 0.1; reduce dt")
    backend = _select_backend(backend)

    k = config.decimation
    n = config.n_samples
    n_steps = (n - 1) * k
    dt, gamma, omega2 = config.dt, params.gamma, params.omega**2
    q = math.sqrt(2.0 * params.kt_over_m * params.gamma * dt)

    gen = stream_generator(config.seed, STREAM_TRAJECTORY)
    # stationary initial state of the exact EM chain (2 float64 draws)
    var_z, var_v, cov = em_stationary_moments(params, dt)
    a = math.sqrt(var_z) if var_z > 0 else 0.0
    b = cov / a if a > 0 else 0.0
    c = math.sqrt(max(var_v - b * b, 0.0))
    xi0, xi1 = gen.standard_normal(2)
    z = a * xi0
    v = b * xi0 + c * xi1

    out = np.empty(n)
    out[0] = z
    if backend == "cython":
        state = (z, v)
        pos = 1
        remaining = n_steps
        chunk_cap = (_CHUNK_STEPS // k) * k if k <= _CHUNK_STEPS else k
        while remaining:
            m = min(remaining, chunk_cap)
            noise = gen.standard_normal(m, dtype=np.float32)
            state = _em_kernel.em_chunk(
                state[0], state[1], dt, gamma, omega2, q, noise, k, out, pos)
            pos += m // k
            remaining -= m
    else:
        integ = BlockedIntegrator(dt, gamma, omega2, q, k)
        state = np.array([z, v])
        pos = 1
        remaining = n_steps
        chunk_cap = (_CHUNK_STEPS // k) * k if k <= _CHUNK_STEPS else k
        while remaining:
            m = min(remaining, chunk_cap)
            noise = gen.standard_normal(m, dtype=np.float32)
            state = integ.run_chunk(state, noise, out, pos)
            pos += m // k
            remaining -= m

    meta = {
        "kind": "position",
        "backend": backend,
        "seed": config.seed,
        "oscillator": params.to_dict(),
        "config": config.to_dict(),
    }
    return TimeSeries(sample_rate=config.sample_rate, samples=out, metadata=meta)


def _rin_profile(sig_n: int, config: SimulationConfig, gen: np.random.Generator):
    """Multiplicative intensity factor r(t); always consumes one rin draw."""
    r_draw = gen.normal()
    drift = config.rin_drift
    if drift is None or drift.width == 0.0:
        return 0.0, 0.0
    if drift.model == "constant":
        r = drift.width * r_draw
        return r, r
    ramp = np.linspace(-drift.width, drift.width, sig_n)
    return ramp, float(np.mean(ramp))


def synthesize_signal(
    z: TimeSeries,
    sig: SignalParams,
    config: SimulationConfig,
    osc: Optional[OscillatorParams] = None,
) -> TimeSeries:
    """Heterodyne detector voltage from a position trajectory.

    v(t) = v0 (1 + r(t)) sin(2 pi f0 t + theta0 + kappa z(t)) + white noise
    with the requested two-sided noise-floor PSD. Detector noise and the RIN
    offset come from streams independent of the trajectory, all derived from
    config.seed.
    """
    fs = z.sample_rate
    if sig.carrier_freq >= fs / 2:
        raise AliasingError("carrier_freq must be below Nyquist")
    if osc is None:
        od = z.metadata.get("oscillator")
        if od is None and sig.kappa is None:
            raise InvalidConfigError(
                "phi-specified signal needs oscillator params (pass osc or use a "
                "trajectory with metadata)")
        osc = OscillatorParams(**od) if od is not None else None
    if osc is not None:
        bandwidth_guard = sig.carrier_freq + 10.0 * osc.omega / (2 * math.pi)
        if bandwidth_guard > fs / 2:
            raise AliasingError(
                f"carrier + 10*Omega/2pi = {bandwidth_guard:.3g} Hz exceeds Nyquist "
                f"{fs / 2:.3g} Hz")
        kappa = sig.sensitivity_for(osc)
    else:
        kappa = sig.kappa

    t = z.times()
    rin_gen = stream_generator(config.seed, STREAM_RIN)
    r, r_mean = _rin_profile(z.n, config, rin_gen)

    phase = 2.0 * math.pi * sig.carrier_freq * t + sig.phase_offset + kappa * z.samples
    v = sig.amplitude * (1.0 + r) * np.sin(phase)
    if sig.noise_floor > 0:
        det_gen = stream_generator(config.seed, STREAM_DETECTOR)
        sigma = math.sqrt(sig.noise_floor * fs)
        v = v + sigma * det_gen.standard_normal(z.n, dtype=np.float32)

    meta = dict(z.metadata)
    meta.update({
        "kind": "detector",
        "signal": sig.to_dict(),
        "kappa": kappa,
        "rin_mean": r_mean,
    })
    return TimeSeries(sample_rate=fs, samples=v, metadata=meta)
