"""Heterodyne spectra of thermally driven oscillators.

Simulation of stochastic-oscillator trajectories and their interferometric
(phase-modulated) detection, non-parametric spectral estimation, exact
theoretical spectra, and Whittle-likelihood parameter inference with
profile-likelihood uncertainties.
"""

from .ensemble import EnsembleReport, default_fit_window, effective_truth, ensemble_validate
from .inference import (
    FitOptions,
    FitResult,
    FitWindow,
    HeterodyneModel,
    NuisanceParams,
    ProfileScan,
    mle_fit,
    profile_nuisance,
    profile_scan,
    whittle_nll,
)
from .params import (
    K_BOLTZMANN,
    ModelParams,
    OscillatorParams,
    RinDrift,
    SignalParams,
    SimulationConfig,
)
from .sde import (
    DEFAULT_BACKEND,
    TimeSeries,
    em_effective_params,
    em_stationary_moments,
    simulate_trajectory,
    synthesize_signal,
)
from .spectral import (
    ResidualReport,
    SpectrumEstimate,
    WindowSpec,
    bartlett,
    fold_onesided,
    periodogram,
    residuals,
)
from .theory import (
    FrequencyGrid,
    TheorySpectrum,
    bessel_i_series,
    correlation_rphiphi,
    default_grid,
    harmonic_bessel_weights,
    middleton_series,
    narrowband_weights,
    poisson_weights,
    rin_broadened,
    sigma_zz,
    spectrum_from_correlation,
    szz,
)

__version__ = "0.1.0"
