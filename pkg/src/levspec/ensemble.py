"""Ensemble simulation-and-recovery validation.

Simulates many trajectories with distinct seeds, fits each spectrum, and
compares the spread of the maximum-likelihood estimates with the
profile-likelihood uncertainties: an estimator is calibrated when the
empirical SD matches the mean profile SD and the credible intervals cover
the truth at their nominal rate.

"Truth" here is the effective parameter set the discrete simulation
actually realizes (see sde.em_effective_params): the Euler-Maruyama chain
is an exact AR(2) process whose damping and variance differ from the
nominal inputs at order omega^2*dt/gamma.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from .errors import NonConvergenceError
from .inference import FitOptions, FitWindow, mle_fit, profile_scan
from .params import ModelParams, OscillatorParams, SignalParams, SimulationConfig
from .sde import em_effective_params, em_stationary_moments, simulate_trajectory, synthesize_signal
from .spectral import bartlett
from .theory import poisson_weights


def effective_truth(osc: OscillatorParams, sig: SignalParams,
                    config: SimulationConfig) -> ModelParams:
    """Model parameters realized by the EM simulation at this step size."""
    omega_eff, gamma_eff = em_effective_params(osc, config.dt)
    var_z, _, _ = em_stationary_moments(osc, config.dt)
    kappa = sig.sensitivity_for(osc)
    return ModelParams(phi=kappa * math.sqrt(var_z), omega=omega_eff,
                       gamma=gamma_eff)


def default_fit_window(model: ModelParams, carrier_freq: float,
                       exclusion_bins: int = 3) -> FitWindow:
    """Window covering the series support plus one harmonic of margin."""
    weights, _ = poisson_weights(model.phi, 1e-6)
    n_max = max(len(weights) - 1, 1)
    half = ((n_max + 1) * model.omega + 10.0 * model.gamma) / (2 * math.pi)
    return FitWindow(carrier_freq=carrier_freq,
                     intervals=((carrier_freq - half, carrier_freq + half),),
                     exclusion_bins=exclusion_bins)


@dataclass
class EnsembleRun:
    seed: int
    converged: bool
    phi: float = math.nan
    omega: float = math.nan
    gamma: float = math.nan
    nll: float = math.nan
    profile_sd: float = math.nan
    interval: tuple = (math.nan, math.nan)


@dataclass
class EnsembleReport:
    truth: ModelParams
    nominal: ModelParams
    level: float
    n_runs: int
    n_converged: int
    mean: dict = field(default_factory=dict)
    sd: dict = field(default_factory=dict)
    bias: dict = field(default_factory=dict)
    se_mean: dict = field(default_factory=dict)
    sd_ratio_phi: float = math.nan
    coverage_phi: float = math.nan
    coverage_band: tuple = (math.nan, math.nan)
    runs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["truth"] = self.truth.to_dict()
        d["nominal"] = self.nominal.to_dict()
        return d


def _one_run(args: tuple) -> EnsembleRun:
    (osc, sig, config, seed, window, segment_length, opts_dict,
     init, level) = args
    cfg = replace(config, seed=seed)
    z = simulate_trajectory(osc, cfg)
    v = synthesize_signal(z, sig, cfg, osc=osc)
    est = bartlett(v, segment_length)
    opts = FitOptions(**opts_dict)
    fit = mle_fit(est, init, window, opts)
    if not fit.converged:
        return EnsembleRun(seed=seed, converged=False)
    scan = profile_scan(est, fit, "phi", window, level=level, options=opts)
    return EnsembleRun(
        seed=seed, converged=True, phi=fit.model.phi, omega=fit.model.omega,
        gamma=fit.model.gamma, nll=fit.nll, profile_sd=scan.sd,
        interval=scan.interval)


def ensemble_validate(
    osc: OscillatorParams,
    sig: SignalParams,
    config: SimulationConfig,
    n_runs: int,
    *,
    window: Optional[FitWindow] = None,
    segment_length: int = 1 << 16,
    options: Optional[FitOptions] = None,
    init: Optional[ModelParams] = None,
    level: float = 0.68,
    threads: int = 1,
) -> EnsembleReport:
    """Simulate, fit, and profile n_runs trajectories with seeds seed+i.

    Reports per-parameter mean/SD/bias relative to the effective truth, the
    empirical-vs-profile SD ratio for phi, and the credible-interval coverage
    with its 95% binomial band. Raises NonConvergenceError when more than
    20% of the fits fail to converge.
    """
    if n_runs < 10:
        raise ValueError("ensemble_validate needs n_runs >= 10")
    truth = effective_truth(osc, sig, config)
    kappa = sig.sensitivity_for(osc)
    nominal = ModelParams(phi=kappa * math.sqrt(osc.var_z), omega=osc.omega,
                          gamma=osc.gamma)
    if window is None:
        window = default_fit_window(nominal, sig.carrier_freq)
    if init is None:
        init = nominal
    opts = options or FitOptions(restarts=1)
    opts_dict = asdict(opts)

    jobs = [(osc, sig, config, config.seed + i, window, segment_length,
             opts_dict, init, level) for i in range(n_runs)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_one_run, jobs))
    else:
        runs = [_one_run(j) for j in jobs]

    good = [r for r in runs if r.converged]
    report = EnsembleReport(
        truth=truth, nominal=nominal, level=level, n_runs=n_runs,
        n_converged=len(good), runs=runs)
    frac_bad = 1.0 - len(good) / n_runs
    if frac_bad > 0.2:
        raise NonConvergenceError(
            f"{frac_bad:.0%} of ensemble fits failed to converge")

    truth_vals = {"phi": truth.phi, "omega": truth.omega, "gamma": truth.gamma}
    for name in ("phi", "omega", "gamma"):
        vals = np.array([getattr(r, name) for r in good])
        report.mean[name] = float(vals.mean())
        report.sd[name] = float(vals.std(ddof=1))
        report.bias[name] = float(vals.mean() - truth_vals[name])
        report.se_mean[name] = report.sd[name] / math.sqrt(len(good))

    prof_sds = np.array([r.profile_sd for r in good])
    report.sd_ratio_phi = report.sd["phi"] / float(prof_sds.mean())
    covered = sum(r.interval[0] <= truth.phi <= r.interval[1] for r in good)
    report.coverage_phi = covered / len(good)
    lo, hi = stats.binom.interval(0.95, len(good), level)
    report.coverage_band = (lo / len(good), hi / len(good))
    return report
