"""Theoretical heterodyne spectrum of a phase-modulated carrier.

A carrier sinusoid phase-modulated by a Gaussian random process phi(t) with
correlation function R(t) and variance Phi^2 has autocorrelation
exp(R(t) - Phi^2) at baseband; its spectrum splits into an unbroadened
carrier line of mass exp(-Phi^2) plus a continuous part expressible as a
Poisson-weighted series of n-fold self-convolutions of the normalized
position spectrum. Both the series and the direct transform of the
correlation function are implemented; they are cross-checked in tests and
by the acceptance suite.

All spectra here are normalized: carrier_weight + integral(density) = 1.
Grids are uniform, centred on the carrier, with densities stored against
baseband offsets. Computation is at baseband; the carrier shift is applied
only at presentation/fitting time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.fft
from scipy import integrate, special

from .errors import (
    GridSpanError,
    InsufficientSpanError,
    InvalidConfigError,
    QuadratureDomainError,
    ResolutionError,
)
from .params import ModelParams, OscillatorParams


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of odd length centred on the carrier."""

    f0: float       # carrier frequency, Hz
    df: float       # spacing, Hz
    n_points: int   # odd

    def __post_init__(self):
        if not (self.df > 0):
            raise InvalidConfigError(f"df must be > 0, got {self.df}")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise InvalidConfigError("n_points must be an odd integer >= 3")

    @classmethod
    def centered(cls, f0: float, df: float, half_width: float) -> "FrequencyGrid":
        half = int(math.ceil(half_width / df))
        return cls(f0=f0, df=df, n_points=2 * half + 1)

    @property
    def half_width(self) -> float:
        return (self.n_points // 2) * self.df

    def offsets(self) -> np.ndarray:
        """Baseband offsets f - f0, Hz."""
        return (np.arange(self.n_points) - self.n_points // 2) * self.df

    def freqs(self) -> np.ndarray:
        return self.f0 + self.offsets()


@dataclass
class TheorySpectrum:
    """Continuous spectral density plus the symbolic carrier line.

    The n = 0 delta is never rasterized onto the grid; its mass
    exp(-Phi^2) is carried in ``carrier_weight``.
    """

    grid: FrequencyGrid
    density: np.ndarray            # 1/Hz, against grid offsets
    carrier_weight: float
    truncation_order: Optional[int] = None
    truncation_bound: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=np.float64)
        if self.density.shape != (self.grid.n_points,):
            raise InvalidConfigError("density length must match grid")

    def mass(self) -> float:
        """carrier_weight + integral of the continuous part."""
        return self.carrier_weight + float(
            np.trapezoid(self.density, dx=self.grid.df))


def szz(omega: Union[float, np.ndarray],
        params: Union[OscillatorParams, tuple[float, float]]) -> Union[float, np.ndarray]:
    """Two-sided position PSD (2 kB T / M) Gamma / ((w^2 - W^2)^2 + G^2 w^2).

    ``params`` is an OscillatorParams, or a bare (Omega, Gamma) pair for the
    unit-prefactor shape. Even in omega; finite everywhere for Gamma > 0.
    """
    if isinstance(params, OscillatorParams):
        omega0, gamma = params.omega, params.gamma
        pref = 2.0 * params.kt_over_m
    else:
        omega0, gamma = params
        pref = 1.0
    w2 = np.square(omega)
    return pref * gamma / (np.square(w2 - omega0**2) + gamma**2 * w2)


def _sigma_samples(omega0: float, gamma: float, f: np.ndarray) -> np.ndarray:
    """Normalized position spectrum sigma_zz(f) = S_zz(2 pi f)/<z^2>, 1/Hz."""
    w2 = np.square(2.0 * math.pi * f)
    return 2.0 * gamma * omega0**2 / (np.square(w2 - omega0**2) + gamma**2 * w2)


def lorentzian_tail_mass(omega0: float, gamma: float, half_width: float) -> float:
    """Fraction of sigma_zz mass beyond +-half_width (numerical tail integral)."""
    val, _ = integrate.quad(
        lambda f: _sigma_samples(omega0, gamma, np.asarray(f)),
        half_width, np.inf, limit=200)
    return 2.0 * val


def sigma_zz(omega0: float, gamma: float, grid: FrequencyGrid,
             tail_tol: float = 1e-4) -> np.ndarray:
    """sigma_zz sampled on the grid's baseband offsets (unit integral).

    Raises InsufficientSpanError when the mass beyond the grid's half-width
    exceeds ``tail_tol``.
    """
    if not (omega0 > 0 and gamma > 0):
        raise InvalidConfigError("omega0 and gamma must be positive")
    tail = lorentzian_tail_mass(omega0, gamma, grid.half_width)
    if tail > tail_tol:
        raise InsufficientSpanError(
            f"tail mass {tail:.2e} beyond half-width {grid.half_width:.3g} Hz "
            f"exceeds {tail_tol:.0e}; widen the grid")
    return _sigma_samples(omega0, gamma, grid.offsets())


def poisson_weights(phi: float, tol: float) -> tuple[np.ndarray, float]:
    """Weights e^{-Phi^2} Phi^{2n}/n! up to the order whose tail is < tol."""
    if phi < 0:
        raise InvalidConfigError("phi must be >= 0")
    if not (0.0 < tol < 1.0):
        raise InvalidConfigError("tol must lie in (0, 1)")
    phi2 = phi * phi
    w = [math.exp(-phi2)]
    cum = w[0]
    n = 0
    while 1.0 - cum >= tol:
        n += 1
        if n > 500:
            raise InvalidConfigError("Poisson series failed to reach tolerance")
        w.append(w[-1] * phi2 / n)
        cum += w[-1]
    return np.asarray(w), max(1.0 - cum, 0.0)


def default_grid(model: ModelParams, df: Optional[float] = None,
                 tol: float = 1e-8, f0: float = 0.0,
                 margin: float = 1.3) -> FrequencyGrid:
    """Grid sized to hold the convolution series for these parameters.

    Half-width = margin * (n_max Omega + 10 Gamma)/(2 pi); spacing defaults
    to the correlation-route resolution bound gamma/(20 pi).
    """
    weights, _ = poisson_weights(model.phi, tol)
    n_max = max(len(weights) - 1, 1)
    guard = (n_max * model.omega + 10.0 * model.gamma) / (2 * math.pi)
    if df is None:
        df = model.gamma / (2 * math.pi * 10.0)
    return FrequencyGrid.centered(f0, df, margin * guard)


class _PaddedFourier:
    """Shared padded-FFT layout used by both spectrum routes.

    Grid samples (centre index n0) are rolled so the centre sits at index 0
    of a length-P >= 2N-1 array: iterated circular convolutions then equal
    zero-padded linear convolutions with a fixed centre, and time-domain
    values come from a single FFT of the same array.
    """

    def __init__(self, n: int):
        self.n = n
        self.n0 = n // 2
        self.p = scipy.fft.next_fast_len(2 * n)
        self._src = (np.arange(n) - self.n0) % self.p

    def pack(self, samples: np.ndarray) -> np.ndarray:
        a = np.zeros(self.p)
        a[self._src] = samples
        return a

    def unpack(self, arr: np.ndarray) -> np.ndarray:
        return arr[self._src]


def _series_density(sigma_c: np.ndarray, sigma_o: Optional[np.ndarray],
                    df: float, weights: np.ndarray) -> np.ndarray:
    """Continuous part of the Middleton series on the sampling grid.

    sigma_c: centred samples; sigma_o: optional offset-grid samples used for
    the outermost convolution factor (None -> centred). weights[n] is the
    Poisson mass of order n; order 0 (the carrier delta) is excluded here.
    """
    pf = _PaddedFourier(sigma_c.size)
    fc = scipy.fft.fft(pf.pack(sigma_c * df))
    fo = fc if sigma_o is None else scipy.fft.fft(pf.pack(sigma_o * df))
    # poly = sum_{n>=1} w_n Fc^{n-1}, then total = Fo * poly  (Horner)
    poly = np.full(pf.p, weights[-1], dtype=complex)
    for n in range(len(weights) - 2, 0, -1):
        poly *= fc
        poly += weights[n]
    total = scipy.fft.ifft(fo * poly).real
    density = pf.unpack(total) / df
    if sigma_o is None:
        # centred grids are symmetric by construction; enforce it exactly
        density = 0.5 * (density + density[::-1])
    return np.maximum(density, 0.0)


def middleton_series(model: ModelParams, grid: FrequencyGrid,
                     tol: float = 1e-8, v0: float = 1.0,
                     tail_tol: float = 1e-4) -> TheorySpectrum:
    """Exact phase-modulation spectrum as a Poisson-weighted convolution series.

    sigma_vv = e^{-Phi^2} sum_n (Phi^{2n}/n!) sigma_zz^(*n), computed by
    iterated FFT convolution on a 2x zero-padded grid; the series is cut when
    the remaining Poisson tail drops below ``tol``. The n = 0 carrier line is
    reported separately in carrier_weight.
    """
    weights, tail = poisson_weights(model.phi, tol)
    n_max = len(weights) - 1
    guard = n_max * model.omega / (2 * math.pi) + 10.0 * model.gamma / (2 * math.pi)
    if grid.half_width < guard:
        raise GridSpanError(
            f"grid half-width {grid.half_width:.3g} Hz cannot hold the "
            f"{n_max}-fold convolution (needs >= {guard:.3g} Hz)")
    sigma_c = sigma_zz(model.omega, model.gamma, grid, tail_tol=tail_tol)
    if n_max == 0:
        density = np.zeros(grid.n_points)
    else:
        density = _series_density(sigma_c, None, grid.df, weights)
    return TheorySpectrum(
        grid=grid, density=density, carrier_weight=weights[0],
        truncation_order=n_max, truncation_bound=tail,
        params={"phi": model.phi, "omega": model.omega, "gamma": model.gamma,
                "v0": v0, "method": "middleton_series"})


def correlation_rphiphi(model: ModelParams, grid: FrequencyGrid,
                        tail_tol: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Phase correlation function R_phiphi(t) = Phi^2 * IFT(sigma_zz).

    Returns (times, values) on the non-negative half of the time grid
    conjugate to ``grid`` (spacing 1/(P df)); R(0) = Phi^2 up to the grid's
    truncated tail mass.
    """
    sigma_c = sigma_zz(model.omega, model.gamma, grid, tail_tol=tail_tol)
    pf = _PaddedFourier(sigma_c.size)
    r_t = scipy.fft.fft(pf.pack(sigma_c * grid.df)).real
    half = pf.p // 2 + 1
    times = np.arange(half) / (pf.p * grid.df)
    return times, model.phi**2 * r_t[:half]


def spectrum_from_correlation(model: ModelParams, grid: FrequencyGrid,
                              v0: float = 1.0,
                              tail_tol: float = 1e-4) -> TheorySpectrum:
    """Phase-modulation spectrum via the correlation function.

    Transforms R_vv(t) = v0^2 exp(R_phiphi(t) - Phi^2) on the grid's
    conjugate time axis; the constant e^{-Phi^2} (the carrier mass) is
    subtracted before transforming and reported separately. Serves as the
    independent oracle for middleton_series.
    """
    if grid.df > model.gamma / (2 * math.pi * 10.0):
        raise ResolutionError(
            f"df = {grid.df:.3g} Hz too coarse for gamma = {model.gamma:.3g} "
            f"(need df <= gamma/(20 pi))")
    sigma_c = sigma_zz(model.omega, model.gamma, grid, tail_tol=tail_tol)
    pf = _PaddedFourier(sigma_c.size)
    phi2 = model.phi**2
    r_t = scipy.fft.fft(pf.pack(sigma_c * grid.df)).real
    carrier = math.exp(-phi2)
    rc = np.exp(phi2 * (r_t - 1.0)) - carrier if phi2 > 0 else np.zeros(pf.p)
    density = pf.unpack(scipy.fft.ifft(rc).real) / grid.df
    density = 0.5 * (density + density[::-1])
    return TheorySpectrum(
        grid=grid, density=np.maximum(density, 0.0), carrier_weight=carrier,
        truncation_order=None, truncation_bound=0.0,
        params={"phi": model.phi, "omega": model.omega, "gamma": model.gamma,
                "v0": v0, "method": "spectrum_from_correlation"})


def bessel_i_series(order: int, x: float) -> float:
    """Modified Bessel I_n(x) by upward series summation (x <= 20).

    I_n(x) = sum_m (x/2)^{n+2m} / (m! (m+n)!); the factorial denominators
    guarantee fast convergence at small argument, where downward recurrence
    is the unstable direction.
    """
    if order < 0 or x < 0:
        raise InvalidConfigError("bessel_i_series needs order >= 0 and x >= 0")
    if x > 20.0:
        raise InvalidConfigError("series evaluation limited to arguments <= 20")
    half = 0.5 * x
    term = half**order / math.factorial(order)
    total = term
    m = 0
    while term > 1e-18 * total or m < 4:
        m += 1
        term *= half * half / (m * (m + order))
        total += term
        if m > 400:  # pragma: no cover - cannot trigger for x <= 20
            break
    return total


def narrowband_weights(phi: float, n_max: int) -> np.ndarray:
    """Spectral mass per harmonic in the Gamma -> 0 limit.

    Returns e^{-Phi^2} [I_0(Phi^2), 2 I_1(Phi^2), ..., 2 I_nmax(Phi^2)];
    the weights sum to 1 as n_max -> infinity.
    """
    if phi < 0:
        raise InvalidConfigError("phi must be >= 0")
    phi2 = phi * phi
    scale = math.exp(-phi2)
    w = np.array([bessel_i_series(n, phi2) for n in range(n_max + 1)])
    w[1:] *= 2.0
    return scale * w


def harmonic_bessel_weights(phi0: float, n_max: int) -> np.ndarray:
    """J_n(phi0)^2 for n = 0..n_max: the purely harmonic (non-stochastic) model.

    For an equal-variance comparison with narrowband_weights, pass
    phi0 = sqrt(2) * Phi.
    """
    if phi0 < 0:
        raise InvalidConfigError("phi0 must be >= 0")
    return special.jv(np.arange(n_max + 1), phi0) ** 2


def rin_broadened(evaluator: Callable[[ModelParams], TheorySpectrum],
                  model: ModelParams, rin_width: float,
                  quad_order: int = 21) -> TheorySpectrum:
    """Intensity-noise-broadened spectrum by Gauss-Hermite quadrature.

    S'(Phi, Omega, Gamma) = E_r[(1+r) S(Phi/sqrt(1+r), Omega sqrt(1+r), Gamma)]
    with r ~ N(0, R^2). R = 0 returns evaluator(model) unchanged.
    """
    if not (0.0 <= rin_width < 0.3):
        raise InvalidConfigError("rin width must lie in [0, 0.3)")
    if quad_order < 3:
        raise InvalidConfigError("quad_order must be >= 3")
    if rin_width == 0.0:
        return evaluator(model)
    nodes, wts = np.polynomial.hermite.hermgauss(quad_order)
    r = math.sqrt(2.0) * rin_width * nodes
    if np.any(1.0 + r <= 0.0):
        raise QuadratureDomainError(
            f"R = {rin_width} too large for quadrature order {quad_order}: "
            "a node reaches 1 + r <= 0")
    wts = wts / math.sqrt(math.pi)
    density = None
    carrier = 0.0
    order = 0
    for ri, wi in zip(r, wts):
        s = evaluator(ModelParams(phi=model.phi / math.sqrt(1.0 + ri),
                                  omega=model.omega * math.sqrt(1.0 + ri),
                                  gamma=model.gamma))
        contrib = wi * (1.0 + ri)
        density = contrib * s.density if density is None else density + contrib * s.density
        carrier += contrib * s.carrier_weight
        if s.truncation_order is not None:
            order = max(order, s.truncation_order)
    return TheorySpectrum(
        grid=s.grid, density=density, carrier_weight=carrier,
        truncation_order=order, truncation_bound=s.truncation_bound,
        params={"phi": model.phi, "omega": model.omega, "gamma": model.gamma,
                "rin_width": rin_width, "quad_order": quad_order,
                "method": "rin_broadened"})
