import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from levspec.errors import (
    GridSpanError,
    InsufficientSpanError,
    InvalidConfigError,
    QuadratureDomainError,
    ResolutionError,
)
from levspec.params import ModelParams, OscillatorParams
from levspec.theory import (
    FrequencyGrid,
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
from oracles import line_decomposition_density, rphiphi_quad, sigma_quad_mass

W0 = 2 * math.pi * 1e5


# ---------------------------------------------------------------- szz / sigma

def test_szz_closed_form_points(osc_b):
    kt_m = osc_b.kt_over_m
    assert szz(0.0, osc_b) == pytest.approx(
        2 * kt_m * osc_b.gamma / osc_b.omega**4, rel=1e-14, abs=0)
    assert szz(osc_b.omega, osc_b) == pytest.approx(
        2 * kt_m / (osc_b.gamma * osc_b.omega**2), rel=1e-14, abs=0)
    assert szz(1.0, (3.0, 2.0)) == pytest.approx(2.0 / ((1 - 9) ** 2 + 4))
    # even in omega
    assert szz(1.7e5, osc_b) == szz(-1.7e5, osc_b)


def test_szz_integral_is_equipartition(osc_b):
    import mpmath as mp
    w0, g = osc_b.omega, osc_b.gamma
    # integrate the unit-prefactor shape to keep magnitudes near 1
    shape = lambda w: float(szz(float(w), (w0, g))) * w0**3
    val = mp.quad(shape, [0, w0 - 10 * g, w0 - g, w0, w0 + g, w0 + 10 * g,
                          30 * w0, mp.inf]) / w0**3
    integral = 2 * osc_b.kt_over_m * float(val) / math.pi  # even integrand
    assert integral == pytest.approx(osc_b.var_z, rel=1e-6, abs=0)


def test_sigma_zz_unit_integral():
    # half-width 50 * gamma (rad/s) around a low-frequency oscillator
    w0, gam = 2 * math.pi * 1e3, 1e3
    half = 50 * gam / (2 * math.pi)
    grid = FrequencyGrid.centered(0.0, half / 2000, half)
    s = sigma_zz(w0, gam, grid, tail_tol=2e-3)
    assert np.sum(s) * grid.df == pytest.approx(1.0, abs=1e-3)
    assert np.trapezoid(s, dx=grid.df) == pytest.approx(1.0, abs=1e-3)


def test_sigma_zz_symmetry_exact():
    grid = FrequencyGrid.centered(0.0, 25.0, 7e5)
    s = sigma_zz(W0, 2e4, grid)
    assert np.array_equal(s, s[::-1])


def test_sigma_zz_narrow_two_peaks():
    w0, gam = W0, 100.0
    grid = FrequencyGrid.centered(0.0, 2.0, 3e5)
    s = sigma_zz(w0, gam, grid, tail_tol=1e-3)
    u = grid.offsets()
    pos = np.sum(s[u > 0]) * grid.df
    neg = np.sum(s[u < 0]) * grid.df
    assert pos == pytest.approx(0.5, abs=2e-3)
    assert neg == pytest.approx(0.5, abs=2e-3)
    assert sigma_quad_mass(w0, gam, 1.0, 3e5) == pytest.approx(0.5, abs=1e-3)


def test_sigma_zz_span_guard():
    grid = FrequencyGrid.centered(0.0, 100.0, 1.2e5)  # barely past the peak
    with pytest.raises(InsufficientSpanError):
        sigma_zz(W0, 2e4, grid)


# ------------------------------------------------------------- correlation

def test_rphiphi_zero_lag_and_analytic(fig2_model):
    m = fig2_model
    grid = FrequencyGrid.centered(0.0, 40.0, 4.5e6)
    times, r = correlation_rphiphi(m, grid)
    assert r[0] == pytest.approx(m.phi**2, rel=2e-6, abs=0)
    g, w1 = m.gamma, math.sqrt(m.omega**2 - m.gamma**2 / 4)
    sel = times < 4e-4
    analytic = m.phi**2 * np.exp(-g * times[sel] / 2) * (
        np.cos(w1 * times[sel]) + g / (2 * w1) * np.sin(w1 * times[sel]))
    assert np.max(np.abs(r[sel] - analytic)) < 1e-6 * m.phi**2
    # spot check against direct quadrature
    i = np.searchsorted(times, 3.1e-5)
    assert r[i] == pytest.approx(
        rphiphi_quad(m.phi, m.omega, m.gamma, times[i]), rel=1e-5, abs=1e-9)


def test_rphiphi_overdamped_monotone():
    m = ModelParams(phi=0.5, omega=W0, gamma=5 * W0)
    grid = FrequencyGrid.centered(0.0, 200.0, 4e7)
    times, r = correlation_rphiphi(m, grid, tail_tol=5e-3)
    assert r[0] == pytest.approx(0.25, rel=5e-3)
    head = r[times < 2e-4]
    assert np.all(np.diff(head) <= 1e-12)
    assert np.all(head > -1e-9)


# ------------------------------------------------------- the two spectrum routes

def test_phi_zero_is_pure_carrier(fig2_model):
    grid = default_grid(fig2_model, f0=3e6)
    for fn in (middleton_series, spectrum_from_correlation):
        s = fn(ModelParams(phi=0.0, omega=fig2_model.omega,
                           gamma=fig2_model.gamma), grid)
        assert s.carrier_weight == 1.0
        assert np.all(s.density == 0.0)


def test_route_equivalence_fig2(fig2_model):
    grid = default_grid(fig2_model, tol=1e-12, f0=3e6)
    a = middleton_series(fig2_model, grid, tol=1e-12)
    b = spectrum_from_correlation(fig2_model, grid)
    assert a.carrier_weight == pytest.approx(math.exp(-0.5625), rel=1e-14)
    nz = b.density > 0
    assert nz.all()
    assert np.max(np.abs(a.density[nz] - b.density[nz]) / b.density[nz]) < 1e-6


def test_total_mass_is_unity(fig2_model):
    grid = default_grid(fig2_model, tol=1e-12, margin=2.2)
    s = spectrum_from_correlation(fig2_model, grid)
    assert s.mass() == pytest.approx(1.0, abs=1e-6)


def test_density_symmetry_and_positivity(fig2_model):
    grid = default_grid(fig2_model)
    s = middleton_series(fig2_model, grid)
    assert np.array_equal(s.density, s.density[::-1])
    assert np.all(s.density >= 0)


def test_poisson_weights_fig2_values():
    w, tail = poisson_weights(0.75, 1e-8)
    assert w[0] == pytest.approx(math.exp(-0.5625), rel=1e-14)
    assert w[1] == pytest.approx(math.exp(-0.5625) * 0.5625, rel=1e-14)
    assert w.sum() + tail == pytest.approx(1.0, abs=1e-12)
    assert tail < 1e-8


def test_middleton_span_guard(fig2_model):
    grid = FrequencyGrid.centered(3e6, 100.0, 2e5)
    with pytest.raises(GridSpanError):
        middleton_series(fig2_model, grid)


def test_correlation_resolution_guard(fig2_model):
    grid = FrequencyGrid.centered(3e6, 5e3, 1.6e6)
    with pytest.raises(ResolutionError):
        spectrum_from_correlation(fig2_model, grid)


def test_against_line_decomposition(fig2_model):
    grid = default_grid(fig2_model, tol=1e-12)
    s = middleton_series(fig2_model, grid, tol=1e-12)
    oracle = line_decomposition_density(
        fig2_model.phi, fig2_model.omega, fig2_model.gamma, grid.offsets())
    sel = s.density > 1e-6 * s.density.max()
    rel = np.abs(s.density[sel] - oracle[sel]) / oracle[sel]
    assert np.max(rel) < 1e-6


def test_monotone_harmonic_decay(fig2_model):
    grid = default_grid(fig2_model)
    s = middleton_series(fig2_model, grid)
    u, df = grid.offsets(), grid.df
    f_n = fig2_model.omega / (2 * math.pi)
    masses = []
    for n in range(1, 6):
        sel = (np.abs(u) >= (n - 0.5) * f_n) & (np.abs(u) < (n + 0.5) * f_n)
        masses.append(s.density[sel].sum() * df)
    assert all(b < a for a, b in zip(masses, masses[1:]))


# ----------------------------------------------------------- Bessel weights

def test_bessel_series_matches_scipy():
    for n in range(8):
        for x in (0.0, 0.05, 0.5625, 2.0, 7.34, 19.9):
            assert bessel_i_series(n, x) == pytest.approx(
                float(special.iv(n, x)), rel=1e-12, abs=1e-300)
    with pytest.raises(InvalidConfigError):
        bessel_i_series(0, 25.0)


def test_narrowband_weights_trivial_and_sum():
    w = narrowband_weights(0.0, 5)
    assert w[0] == 1.0
    assert np.all(w[1:] == 0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=0.01, max_value=2.0))
def test_narrowband_weights_sum_to_one(phi):
    w = narrowband_weights(phi, 60)
    assert w.sum() == pytest.approx(1.0, abs=1e-10)


def test_harmonic_weights_first_zero():
    w = harmonic_bessel_weights(3.8317, 3)
    assert w[1] < 1e-8  # first zero of J_1
    # the modified-Bessel weights have no such zero at matched variance
    nb = narrowband_weights(3.8317 / math.sqrt(2), 3)
    assert np.all(nb[:4] > 1e-4)
    assert harmonic_bessel_weights(0.0, 2)[0] == 1.0


def test_small_phi_weight_ratios_agree():
    # per-sideband comparison at matched variance: J_n(sqrt(2) Phi)^2 vs
    # I_n(Phi^2); first-to-zeroth ratios agree to O(Phi^4)
    phi = 0.05
    nb = narrowband_weights(phi, 2)
    hb = harmonic_bessel_weights(math.sqrt(2) * phi, 2)
    r_nb = (nb[1] / 2) / nb[0]  # undo the two-sideband doubling
    r_hb = hb[1] / hb[0]
    assert r_hb == pytest.approx(r_nb, rel=0.01)


# ------------------------------------------------------------------- RIN

def test_rin_zero_returns_base_exactly(fig2_model):
    grid = default_grid(fig2_model)

    def ev(m):
        return middleton_series(m, grid)

    base = ev(fig2_model)
    broad = rin_broadened(ev, fig2_model, 0.0)
    assert np.array_equal(broad.density, base.density)
    assert broad.carrier_weight == base.carrier_weight


def test_rin_domain_guard(fig2_model):
    grid = default_grid(fig2_model)

    def ev(m):
        return middleton_series(m, grid)

    with pytest.raises(QuadratureDomainError):
        rin_broadened(ev, fig2_model, 0.29, quad_order=61)
    with pytest.raises(InvalidConfigError):
        rin_broadened(ev, fig2_model, 0.5)
    with pytest.raises(InvalidConfigError):
        rin_broadened(ev, fig2_model, 0.01, quad_order=2)


def test_rin_broadens_and_conserves_mass():
    m = ModelParams(phi=0.35, omega=2 * math.pi * 69.8e3, gamma=2.5e3)
    grid = default_grid(m, df=25.0, margin=1.6)

    def ev(mm):
        return middleton_series(mm, grid, tail_tol=5e-3)

    base = ev(m)
    broad = rin_broadened(ev, m, 0.01, quad_order=121)
    assert broad.mass() == pytest.approx(base.mass(), rel=1e-4)
    # peak height at 1st harmonic drops when the line spreads
    u = grid.offsets()
    sel = np.abs(np.abs(u) - 69.8e3) < 5e3
    assert broad.density[sel].max() < base.density[sel].max()


def test_default_grid_is_adequate(fig2_model):
    grid = default_grid(fig2_model)
    s = middleton_series(fig2_model, grid)
    assert s.mass() == pytest.approx(1.0, abs=1e-4)
