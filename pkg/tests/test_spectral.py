import math

import numpy as np
import pytest
from scipy import stats

from levspec.errors import GridMismatchError, InvalidConfigError, TooShortError
from levspec.sde import TimeSeries
from levspec.spectral import (
    SpectrumEstimate,
    WindowSpec,
    bartlett,
    fold_onesided,
    periodogram,
    residuals,
)


def make_ts(samples, fs=1e6):
    return TimeSeries(sample_rate=fs, samples=np.asarray(samples, float))


def white(n, fs=1e6, seed=0, var=1.0):
    rng = np.random.default_rng(seed)
    return make_ts(math.sqrt(var) * rng.standard_normal(n), fs)


def test_dc_line_concentrates_at_zero():
    fs, n, c = 1e4, 4096, 2.5
    ts = make_ts(np.full(n, c), fs)
    est = periodogram(ts, window=WindowSpec("rect"), detrend=False)
    i0 = np.argmin(np.abs(est.freqs))
    assert est.power[i0] == pytest.approx(c**2 * n / fs, rel=1e-12)
    off = np.delete(est.power, i0)
    assert np.max(off) < 1e-18 * est.power[i0]


@pytest.mark.parametrize("kind", ["rect", "hann"])
def test_white_noise_level(kind):
    fs = 1e6
    ts = white(2**16, fs, seed=3)
    est = periodogram(ts, window=WindowSpec(kind))
    assert np.mean(est.power) == pytest.approx(1.0 / fs, rel=0.05)


def test_sinusoid_integrated_power():
    fs, n, v0 = 1e6, 2**14, 0.8
    k = 100  # bin-centred
    t = np.arange(n) / fs
    ts = make_ts(v0 * np.sin(2 * np.pi * (k * fs / n) * t), fs)
    est = periodogram(ts, window=WindowSpec("rect"), detrend=False)
    assert np.sum(est.power) * est.df == pytest.approx(v0**2 / 2, rel=1e-10)


@pytest.mark.parametrize("kind", ["rect", "hann"])
def test_parseval_identity(kind):
    ts = white(5000, seed=9)
    est = periodogram(ts, window=WindowSpec(kind))
    w = WindowSpec(kind).build(ts.n)
    xd = ts.samples - ts.samples.mean()
    expected = np.mean((w * xd) ** 2) / np.mean(w**2)
    assert np.sum(est.power) * est.df == pytest.approx(expected, rel=1e-10)


def test_bartlett_dof_and_remainder():
    ts = white(10 * 1000 + 137)
    est = bartlett(ts, 1000)
    assert est.n_segments == 10
    assert est.nu == 20
    # Appendix-style integer arithmetic
    assert 2 * (10_000_000 // 65536) == 304
    assert 2 * 9 == 18


def test_bartlett_single_segment_equals_periodogram():
    ts = white(4096, seed=5)
    a = bartlett(ts, 4096)
    b = periodogram(ts)
    assert np.array_equal(a.power, b.power)
    assert a.nu == b.nu == 2


def test_bartlett_too_short():
    with pytest.raises(TooShortError):
        bartlett(white(100), 1000)


def test_chi2_variance_of_ratio():
    # var(S_hat/S) ~ 2/nu for white noise
    fs = 1e6
    ts = white(2**18, fs, seed=17)
    est = bartlett(ts, 2**12, window=WindowSpec("rect"))
    ratio = est.power * fs
    assert est.nu == 128
    assert np.var(ratio) == pytest.approx(2.0 / est.nu, rel=0.15)


def test_chi2_law_ks():
    fs = 1e6
    ts = white(2**18, fs, seed=23)
    est = bartlett(ts, 2**12, window=WindowSpec("rect"))
    rep = residuals(est, np.full(est.power.size, 1.0 / fs))
    assert not rep.degenerate
    assert rep.passes(0.01)


def test_residuals_gaussian_limit():
    # nu = 304: S_hat/S - 1 approx N(0, sqrt(2/304) = 0.081)
    fs = 1e6
    ts = white(152 * 1024, fs, seed=29)
    est = bartlett(ts, 1024, window=WindowSpec("rect"))
    assert est.nu == 304
    rep = residuals(est, np.full(est.power.size, 1.0 / fs))
    sd = np.std(rep.ratio - 1.0)
    assert sd == pytest.approx(math.sqrt(2.0 / 304), rel=0.1)


def test_residuals_degenerate_flag():
    ts = white(4096, seed=1)
    est = bartlett(ts, 512)
    rep = residuals(est, est.power.copy())
    assert rep.degenerate
    assert np.all(rep.ratio == 1.0)


def test_residuals_grid_mismatch():
    ts = white(4096, seed=1)
    est = bartlett(ts, 512)
    with pytest.raises(GridMismatchError):
        residuals(est, np.ones(100))


def test_fold_onesided_conserves_power():
    ts = white(2**12, seed=31)
    est = bartlett(ts, 2**10)
    one = fold_onesided(est)
    assert not one.two_sided
    assert one.freqs[0] == 0.0
    assert np.sum(one.power) == pytest.approx(np.sum(est.power), rel=1e-12)
    assert one.freqs[-1] == pytest.approx(est.sample_rate / 2)


def test_spectrum_estimate_invariants():
    with pytest.raises(InvalidConfigError):
        SpectrumEstimate(freqs=np.arange(4.0), power=np.ones(3), nu=2,
                         segment_length=4, n_segments=1, sample_rate=1.0)
    with pytest.raises(InvalidConfigError):
        SpectrumEstimate(freqs=np.arange(4.0), power=np.ones(4), nu=3,
                         segment_length=4, n_segments=1, sample_rate=1.0)
    with pytest.raises(InvalidConfigError):
        SpectrumEstimate(freqs=np.arange(4.0), power=-np.ones(4), nu=2,
                         segment_length=4, n_segments=1, sample_rate=1.0)
