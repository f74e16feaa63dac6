"""Non-parametric spectral estimation: periodograms, Bartlett averaging,
and chi-squared residual statistics against a model spectrum.

Conventions: spectra are two-sided power densities on a monotonic frequency
grid (negative to positive Nyquist), normalized so that sum(power)*df equals
the window-corrected variance of the analysed segment, which makes the
white-noise level unbiased. Per-segment means are removed before windowing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import stats

from .errors import GridMismatchError, InvalidConfigError, TooShortError
from .sde import TimeSeries


@dataclass(frozen=True)
class WindowSpec:
    """Taper applied to each segment before the DFT.

    ``normalization`` divides the periodogram by mean(w^2) so a white-noise
    floor is estimated without bias; coherent line amplitudes then carry the
    usual windowed bias, which the inference model shares.
    """

    kind: str = "hann"

    def __post_init__(self):
        if self.kind not in ("hann", "rect"):
            raise InvalidConfigError(f"unknown window kind {self.kind!r}")

    def build(self, m: int) -> np.ndarray:
        if self.kind == "hann":
            # 0.5*(1 - cos(2 pi m/(M-1))), the symmetric Tukey-Hanning taper
            return np.hanning(m)
        return np.ones(m)

    def normalization(self, m: int) -> float:
        w = self.build(m)
        return 1.0 / float(np.mean(w**2))


@dataclass
class SpectrumEstimate:
    """Averaged periodogram on a uniform two-sided (or folded) grid."""

    freqs: np.ndarray          # Hz, monotonic
    power: np.ndarray          # signal-units^2 / Hz
    nu: int                    # degrees of freedom, 2 * n_segments
    segment_length: int
    n_segments: int
    sample_rate: float
    window: WindowSpec = field(default_factory=WindowSpec)
    two_sided: bool = True
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=np.float64)
        self.power = np.asarray(self.power, dtype=np.float64)
        if self.freqs.shape != self.power.shape:
            raise InvalidConfigError("freqs and power must have matching length")
        if np.any(self.power < 0):
            raise InvalidConfigError("power must be non-negative")
        if self.nu <= 0 or self.nu % 2:
            raise InvalidConfigError("nu must be a positive even integer")

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0])

    def scaled(self, c: float) -> "SpectrumEstimate":
        """A copy with power multiplied by c (gain re-calibration)."""
        return SpectrumEstimate(
            freqs=self.freqs.copy(), power=self.power * c, nu=self.nu,
            segment_length=self.segment_length, n_segments=self.n_segments,
            sample_rate=self.sample_rate, window=self.window,
            two_sided=self.two_sided, metadata=dict(self.metadata))


def _as_samples(x: Union[TimeSeries, np.ndarray]) -> tuple[np.ndarray, float]:
    if isinstance(x, TimeSeries):
        return x.samples, x.sample_rate
    raise InvalidConfigError("expected a TimeSeries (sample rate required)")


def _segment_power(seg: np.ndarray, w: np.ndarray, mean_w2: float,
                   fs: float, detrend: bool) -> np.ndarray:
    if detrend:
        seg = seg - seg.mean()
    m = seg.size
    spec = np.fft.rfft(w * seg)
    p_half = (spec.real**2 + spec.imag**2) / (fs * m * mean_w2)
    # rebuild the two-sided array from the real-input half spectrum
    p = np.empty(m)
    half = m // 2
    p[: half + 1] = p_half[: half + 1]
    p[half + 1:] = p_half[1: m - half][::-1]
    return p


def periodogram(x: TimeSeries, window: Optional[WindowSpec] = None,
                detrend: bool = True) -> SpectrumEstimate:
    """Single-segment two-sided periodogram (nu = 2).

    Normalized so sum(power)*df equals mean((w*x)^2)/mean(w^2): the
    white-noise PSD level is then 1/fs per unit variance.
    """
    samples, fs = _as_samples(x)
    if samples.size < 2:
        raise InvalidConfigError("periodogram needs at least 2 samples")
    window = window or WindowSpec()
    m = samples.size
    w = window.build(m)
    mean_w2 = float(np.mean(w**2))
    p = _segment_power(samples, w, mean_w2, fs, detrend)
    freqs = np.fft.fftfreq(m, d=1.0 / fs)
    order = np.fft.fftshift(np.arange(m))
    return SpectrumEstimate(
        freqs=freqs[order], power=p[order], nu=2, segment_length=m,
        n_segments=1, sample_rate=fs, window=window,
        metadata={"detrend": detrend})


def bartlett(x: TimeSeries, segment_length: int,
             window: Optional[WindowSpec] = None,
             detrend: bool = True) -> SpectrumEstimate:
    """Average of floor(N/segment_length) non-overlapping periodograms.

    Trailing remainder samples are discarded; nu = 2 * n_segments.
    """
    samples, fs = _as_samples(x)
    if segment_length < 2:
        raise InvalidConfigError("segment_length must be >= 2")
    if samples.size < segment_length:
        raise TooShortError(
            f"series of {samples.size} samples is shorter than segment_length "
            f"{segment_length}")
    window = window or WindowSpec()
    n_seg = samples.size // segment_length
    w = window.build(segment_length)
    mean_w2 = float(np.mean(w**2))
    acc = np.zeros(segment_length)
    for i in range(n_seg):
        seg = samples[i * segment_length:(i + 1) * segment_length]
        acc += _segment_power(seg, w, mean_w2, fs, detrend)
    acc /= n_seg
    freqs = np.fft.fftfreq(segment_length, d=1.0 / fs)
    order = np.fft.fftshift(np.arange(segment_length))
    return SpectrumEstimate(
        freqs=freqs[order], power=acc[order], nu=2 * n_seg,
        segment_length=segment_length, n_segments=n_seg, sample_rate=fs,
        window=window, metadata={"detrend": detrend})


def fold_onesided(est: SpectrumEstimate) -> SpectrumEstimate:
    """Fold a two-sided estimate onto 0..Nyquist (power summed across signs)."""
    if not est.two_sided:
        return est
    m = est.freqs.size
    half = m // 2  # index of f = 0 after fftshift
    out = np.zeros(half + 1)
    out[0] = est.power[half]  # DC
    if m % 2 == 0:
        out[1:half] = est.power[half + 1:] + est.power[1:half][::-1]
        out[half] = est.power[0]  # Nyquist lives at -fs/2 in the two-sided grid
    else:
        out[1:] = est.power[half + 1:] + est.power[:half][::-1]
    freqs = np.arange(half + 1) * est.df
    return SpectrumEstimate(
        freqs=freqs, power=out, nu=est.nu,
        segment_length=est.segment_length, n_segments=est.n_segments,
        sample_rate=est.sample_rate, window=est.window, two_sided=False,
        metadata=dict(est.metadata))


@dataclass
class ResidualReport:
    """Normalized residuals S_hat/S and their chi-squared goodness of fit."""

    ratio: np.ndarray
    nu: int
    ks_statistic: float
    ks_pvalue: float
    degenerate: bool

    def passes(self, significance: float = 0.01) -> bool:
        return bool(self.ks_pvalue > significance)


def residuals(est: SpectrumEstimate, model: np.ndarray,
              mask: Optional[np.ndarray] = None) -> ResidualReport:
    """S_hat/S per bin and a KS test of nu*S_hat/S against chi^2_nu.

    ``model`` must be on est's grid; an optional boolean mask selects bins.
    Flags degenerate input (residuals without dispersion, e.g. model == est).
    """
    model = np.asarray(model, dtype=np.float64)
    if model.shape != est.power.shape:
        raise GridMismatchError("model grid does not match estimate grid")
    if np.any(model <= 0):
        raise InvalidConfigError("model spectrum must be positive")
    ratio = est.power / model
    sel = ratio if mask is None else ratio[np.asarray(mask, bool)]
    if sel.size == 0:
        raise InvalidConfigError("no bins selected for residual statistics")
    degenerate = bool(np.std(sel) < 1e-12 * max(1.0, float(np.mean(sel))))
    ks = stats.kstest(est.nu * sel, stats.chi2(est.nu).cdf)
    return ResidualReport(ratio=ratio, nu=est.nu,
                          ks_statistic=float(ks.statistic),
                          ks_pvalue=float(ks.pvalue), degenerate=degenerate)
