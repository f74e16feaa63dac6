"""Independent reference implementations used only by the tests.

These deliberately avoid the package's FFT-based code paths: the line
decomposition below evaluates the phase-modulation spectrum in closed form
(term-by-term Fourier transforms of the expanded exponential), and the
quadrature helpers integrate the defining expressions directly.
"""

import math

import numpy as np
from scipy import integrate


def position_psd(omega, omega0, gamma, kt_over_m=1.0):
    w2 = np.square(omega)
    return 2.0 * kt_over_m * gamma / (np.square(w2 - omega0**2) + gamma**2 * w2)


def sigma_quad_mass(omega0, gamma, f_lo, f_hi):
    """Integral of the normalized position spectrum over [f_lo, f_hi] (Hz)."""
    def f(x):
        w2 = (2 * math.pi * x) ** 2
        return 2 * gamma * omega0**2 / ((w2 - omega0**2) ** 2 + gamma**2 * w2)
    val, _ = integrate.quad(f, f_lo, f_hi, limit=400)
    return val


def rphiphi_quad(phi, omega0, gamma, t):
    """R_phiphi(t) by Fourier-weighted quadrature of the normalized spectrum."""
    def f(x):
        w2 = (2 * math.pi * x) ** 2
        return 2 * gamma * omega0**2 / ((w2 - omega0**2) ** 2 + gamma**2 * w2)
    if t == 0:
        val, _ = integrate.quad(f, 0, np.inf, limit=400)
    else:
        val, _ = integrate.quad(f, 0, np.inf, weight="cos",
                                wvar=2 * math.pi * t, limit=400)
    return phi**2 * 2 * val


def line_decomposition_density(phi, omega0, gamma, freqs, n_max=None):
    """Closed-form continuous part of the phase-modulation spectrum.

    Underdamped oscillators only. Expands exp(Phi^2 r_zz(t)) with
    r_zz(t) = Re[c e^{(-gamma/2 + i omega1)|t|}], c = 1 - i gamma/(2 omega1),
    and transforms each term analytically, giving a sum of Lorentzian-like
    lines at the harmonics with widths n*gamma/2.
    """
    g = 0.5 * gamma
    if omega0**2 <= g**2:
        raise ValueError("underdamped only")
    w1 = math.sqrt(omega0**2 - g**2)
    c = complex(1.0, -g / w1)
    phi2 = phi * phi
    if n_max is None:
        n_max = 10
        while math.exp(-phi2) * phi2**n_max / math.factorial(n_max) > 1e-16:
            n_max += 2
    omega = 2 * math.pi * np.asarray(freqs, dtype=float)
    total = np.zeros(omega.shape, dtype=complex)
    for p in range(n_max + 1):
        for q in range(n_max + 1 - p):
            if p == 0 and q == 0:
                continue
            n = p + q
            a = ((0.5 * phi2 * c) ** p) * ((0.5 * phi2 * c.conjugate()) ** q) \
                / (math.factorial(p) * math.factorial(q))
            beta = n * g
            mu = (p - q) * w1
            total += a * (1.0 / (beta + 1j * (omega - mu))
                          + 1.0 / (beta - 1j * (omega + mu)))
    return math.exp(-phi2) * total.real


def em_ar2_psd(freqs, omega0, gamma, kt_over_m, dt, sample_dt):
    """Exact PSD of the Euler-Maruyama AR(2) position chain, folded to the
    decimated rate (images k = -2..2 suffice for the tested bands)."""
    q2 = 2.0 * kt_over_m * gamma * dt
    out = np.zeros(np.shape(freqs))
    for k in range(-2, 3):
        w = 2 * math.pi * (np.asarray(freqs) + k / sample_dt)
        z = np.exp(-1j * w * dt)
        a_poly = 1.0 - (2.0 - gamma * dt) * z + (1.0 - gamma * dt + omega0**2 * dt * dt) * z * z
        out += (dt**3 * q2) / np.abs(a_poly) ** 2
    return out
