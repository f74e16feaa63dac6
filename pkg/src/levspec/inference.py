"""Whittle-likelihood fitting of the heterodyne spectrum model.

The fit minimizes  L(alpha) = sum_i [log S_i(alpha) + S_hat_i / S_i(alpha)]
over the spectral-shape parameters alpha = (Phi, Omega, Gamma), where
S_i = A * density_i(alpha) + B and the gain/offset nuisance pair (A, B) is
re-profiled (inner 2-D minimization) at every alpha. Only the spectral
*shape* carries information: rescaling the data rescales A and leaves the
alpha optimum unchanged.

The carrier bin region is always excluded: the n = 0 line carries no
information about the random process and its width is set by the window
function, not the physics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateModelError,
    GridMismatchError,
    GridSpanError,
    InsufficientSpanError,
    InvalidConfigError,
    NonPositiveModelError,
)
from .params import ModelParams
from .spectral import SpectrumEstimate
from .theory import TheorySpectrum, _series_density, _sigma_samples, poisson_weights

_PENALTY = 1e300


@dataclass(frozen=True)
class NuisanceParams:
    """Gain A (spectrum units per 1/Hz) and white offset B (spectrum units)."""

    gain: float
    offset: float

    def __post_init__(self):
        if not (self.gain > 0):
            raise InvalidConfigError(f"gain must be > 0, got {self.gain}")
        if self.offset < 0:
            raise InvalidConfigError(f"offset must be >= 0, got {self.offset}")


@dataclass(frozen=True)
class FitWindow:
    """Included frequency intervals plus the mandatory carrier exclusion."""

    carrier_freq: float
    intervals: tuple = ()          # ((lo, hi), ...) in Hz; empty = whole grid
    exclusion_bins: int = 3        # half-width of the excluded carrier region

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if any(hi <= lo for lo, hi in ivs):
            raise InvalidConfigError("window intervals must have lo < hi")
        for a, b in zip(sorted(ivs), sorted(ivs)[1:]):
            if b[0] < a[1]:
                raise InvalidConfigError("window intervals must be disjoint")
        object.__setattr__(self, "intervals", ivs)
        if self.exclusion_bins < 0:
            raise InvalidConfigError("exclusion_bins must be >= 0")

    def mask(self, freqs: np.ndarray, df: float) -> np.ndarray:
        freqs = np.asarray(freqs)
        if self.intervals:
            sel = np.zeros(freqs.size, dtype=bool)
            for lo, hi in self.intervals:
                sel |= (freqs >= lo) & (freqs <= hi)
        else:
            sel = np.ones(freqs.size, dtype=bool)
        j0 = int(np.argmin(np.abs(freqs - self.carrier_freq)))
        j = np.arange(freqs.size)
        sel &= np.abs(j - j0) > self.exclusion_bins
        return sel

    def carrier_exclusion_halfwidth(self, df: float) -> float:
        return self.exclusion_bins * df


@dataclass
class FitResult:
    model: ModelParams
    nuisance: NuisanceParams
    nll: float
    converged: bool
    n_evals: int
    window: FitWindow
    rin_width: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.converged and not math.isfinite(self.nll):
            raise InvalidConfigError("converged fit must have finite nll")


@dataclass
class ProfileScan:
    """Profile likelihood of one constrained parameter."""

    param: str
    grid: np.ndarray
    nll: np.ndarray
    density: np.ndarray            # normalized to unit integral on grid
    level: float
    interval: tuple                # (lo, hi) central credible interval
    mean: float
    sd: float
    co_params: dict                # trajectories of the re-fitted parameters
    edge_warning: bool = False
    n_evals: int = 0


def align_theory(est: SpectrumEstimate, theory: TheorySpectrum) -> np.ndarray:
    """Map a TheorySpectrum onto est's bins (grids must coincide)."""
    df = est.df
    if abs(theory.grid.df - df) > 1e-9 * df:
        raise GridMismatchError("theory grid spacing differs from estimate grid")
    tfreqs = theory.grid.freqs()
    offset = (est.freqs - tfreqs[0]) / df
    idx = np.rint(offset).astype(int)
    if np.any(np.abs(offset - idx) > 1e-6):
        raise GridMismatchError("theory grid is not aligned with estimate bins")
    if idx.min() < 0 or idx.max() >= tfreqs.size:
        raise GridMismatchError("theory grid does not cover the estimate grid")
    return theory.density[idx]


def whittle_nll(est: SpectrumEstimate, model_density, nuisance: NuisanceParams,
                window: FitWindow) -> float:
    """Whittle negative log-likelihood over the window's included bins."""
    if isinstance(model_density, TheorySpectrum):
        model_density = align_theory(est, model_density)
    model_density = np.asarray(model_density, dtype=np.float64)
    if model_density.shape != est.power.shape:
        raise GridMismatchError("model density must be on the estimate grid")
    sel = window.mask(est.freqs, est.df)
    if sel.sum() < 10:
        raise InvalidConfigError("fit window must include at least 10 bins")
    return _nll(est.power[sel], model_density[sel], nuisance.gain, nuisance.offset)


def _nll(y: np.ndarray, d: np.ndarray, a: float, b: float) -> float:
    s = a * d + b
    if np.any(s <= 0):
        raise NonPositiveModelError("A*density + B <= 0 inside the fit window")
    return float(np.sum(np.log(s) + y / s))


def _nuisance_newton(y, d, a, b, max_iter=60, rtol=1e-12):
    """Damped Newton on (A, B) >= (0+, 0); returns (a, b, nll, converged)."""
    def f(a_, b_):
        s = a_ * d + b_
        if np.any(s <= 0):
            return np.inf
        return float(np.sum(np.log(s) + y / s))

    val = f(a, b)
    b_floor = 0.0
    for _ in range(max_iter):
        s = a * d + b
        inv = 1.0 / s
        r = y * inv           # S_hat / S
        w1 = inv * (1.0 - r)  # d log-term
        w2 = inv * inv * (2.0 * r - 1.0)
        ga = float(np.sum(d * w1))
        gb = float(np.sum(w1))
        haa = float(np.sum(d * d * w2))
        hab = float(np.sum(d * w2))
        hbb = float(np.sum(w2))
        det = haa * hbb - hab * hab
        if det > 0 and haa > 0:
            da = -(ga * hbb - gb * hab) / det
            db = -(gb * haa - ga * hab) / det
        else:  # fall back to gradient descent scaling
            da, db = -ga / max(abs(haa), 1e-300), -gb / max(abs(hbb), 1e-300)
        step = 1.0
        improved = False
        for _ in range(40):
            a_new = a + step * da
            b_new = max(b + step * db, b_floor)
            if a_new > 0:
                v_new = f(a_new, b_new)
                if v_new <= val:
                    improved = v_new < val - rtol * (1.0 + abs(val))
                    a, b, val = a_new, b_new, v_new
                    break
            step *= 0.5
        else:
            return a, b, val, True  # no downhill direction left: stationary
        if not improved:
            return a, b, val, True
    return a, b, val, False


def profile_nuisance(est_or_power, density, window: Optional[FitWindow] = None,
                     init: Optional[tuple] = None,
                     verify: bool = True) -> tuple[NuisanceParams, float]:
    """Maximum-likelihood (A, B) for a fixed model shape.

    Accepts either (SpectrumEstimate, TheorySpectrum/array, window) or bare
    in-window arrays. Initialization: A from the ratio of means over the
    top-decile density bins, B from the median of the lowest-decile bins.
    The result is verified as a local minimum by coordinate perturbation.
    """
    if isinstance(est_or_power, SpectrumEstimate):
        est = est_or_power
        if isinstance(density, TheorySpectrum):
            density = align_theory(est, density)
        if window is None:
            raise InvalidConfigError("window required with a SpectrumEstimate")
        sel = window.mask(est.freqs, est.df)
        y = est.power[sel]
        d = np.asarray(density)[sel]
    else:
        y = np.asarray(est_or_power, dtype=np.float64)
        d = np.asarray(density, dtype=np.float64)
    if y.size < 10:
        raise InvalidConfigError("need at least 10 bins to profile nuisance")
    dmax = float(d.max())
    if dmax <= 0 or float(np.ptp(d)) < 1e-12 * dmax:
        raise DegenerateModelError("constant model density: (A, B) unidentifiable")

    if init is None:
        lo_sel = d <= np.quantile(d, 0.1)
        b0 = max(float(np.median(y[lo_sel])), 0.0)
        hi_sel = d >= np.quantile(d, 0.9)
        a0 = (float(np.mean(y[hi_sel])) - b0) / float(np.mean(d[hi_sel]))
        if not (a0 > 0):
            a0 = float(np.mean(y)) / float(np.mean(d))
        b0 = min(b0, 0.5 * a0 * dmax)
    else:
        a0, b0 = init
        a0 = max(a0, 1e-300)
        b0 = max(b0, 0.0)

    a, b, val, ok = _nuisance_newton(y, d, a0, b0)
    if not ok:
        res = optimize.minimize(
            lambda x: _nll_safe(y, d, x[0], x[1]), np.array([a, b]),
            method="Nelder-Mead",
            options={"xatol": 1e-12 * max(a, 1.0), "fatol": 1e-12 * (1 + abs(val)),
                     "maxfev": 4000})
        if res.fun <= val:
            a, b = max(res.x[0], 1e-300), max(res.x[1], 0.0)
            val = float(res.fun)
    if verify:
        eps = 1e-6
        for a_t, b_t in ((a * (1 + eps), b), (a * (1 - eps), b),
                         (a, b + eps * a * dmax), (a, max(b - eps * a * dmax, 0.0))):
            if a_t > 0 and _nll_safe(y, d, a_t, b_t) < val - 1e-7 * (1 + abs(val)):
                a, b, val, _ = _nuisance_newton(y, d, a_t, b_t)
                break
    return NuisanceParams(gain=a, offset=b), val


def _nll_safe(y, d, a, b):
    if a <= 0 or b < 0:
        return np.inf
    s = a * d + b
    if np.any(s <= 0):
        return np.inf
    return float(np.sum(np.log(s) + y / s))


class HeterodyneModel:
    """Evaluates the normalized model density exactly on the data bins.

    The internal computation grid shares the data spacing and is offset so
    the data bins' baseband offsets (f - f0) land exactly on grid points; the
    offset-sampled sigma_zz enters the outermost convolution factor, so no
    interpolation is ever applied.

    ``smear`` applies the window-expectation curvature correction
    E[S_hat] ~ S + S'' df^2/6 (Hann power-kernel second moment df^2/3) as a
    discrete Laplacian; it matters for resolved peaks at coarse bin spacing.
    """

    def __init__(self, est: SpectrumEstimate, window: FitWindow, *,
                 series_tol: float = 1e-8, half_width: Optional[float] = None,
                 smear: bool = True, rin_width: float = 0.0,
                 rin_order: int = 21, fit_tail_tol: float = 2e-3):
        self.df = est.df
        self.window = window
        self.mask = window.mask(est.freqs, est.df)
        if self.mask.sum() < 10:
            raise InvalidConfigError("fit window must include at least 10 bins")
        self.y = est.power[self.mask]
        self.series_tol = series_tol
        self.smear = smear
        self.rin_width = rin_width
        self.rin_order = rin_order
        self.fit_tail_tol = fit_tail_tol

        f0 = window.carrier_freq
        u_data = est.freqs[self.mask] - f0
        # common residue of the data offsets modulo df, mapped to (-df/2, df/2]
        delta = float(np.median((u_data + self.df / 2) % self.df)) - self.df / 2
        u_max = float(np.max(np.abs(u_data)))
        if half_width is None:
            half_width = 1.3 * u_max + 4.0 * self.df
        half = int(math.ceil(half_width / self.df))
        n = 2 * half + 1
        centred = (np.arange(n) - half) * self.df
        self.u_centred = centred
        self.u_offset = centred + delta
        idx = np.rint((u_data - self.u_offset[0]) / self.df).astype(int)
        if np.any(np.abs(u_data - self.u_offset[idx]) > 1e-6 * self.df):
            raise GridMismatchError("data bins are not uniformly spaced")
        self.idx = idx
        self.half_width = half * self.df

        if rin_width:
            nodes, wts = np.polynomial.hermite.hermgauss(rin_order)
            self._rin_nodes = math.sqrt(2.0) * rin_width * nodes
            self._rin_wts = wts / math.sqrt(math.pi)
            if np.any(1.0 + self._rin_nodes <= 0):
                raise InvalidConfigError("rin_width too large for quadrature order")

    def _tail_ok(self, omega, gamma) -> bool:
        wc = 2 * math.pi * self.half_width
        tail = 2.0 * gamma * omega**2 / (3 * math.pi * wc**3)
        return tail < self.fit_tail_tol and self.half_width > 1.5 * omega / (2 * math.pi)

    def _density_once(self, params: ModelParams) -> Optional[np.ndarray]:
        weights, _ = poisson_weights(params.phi, self.series_tol)
        n_max = len(weights) - 1
        guard = (n_max * params.omega + 10.0 * params.gamma) / (2 * math.pi)
        # the 2x zero padding absorbs spillover up to another half-width, so
        # mild overshoot of the strict guard only truncates far-tail orders
        if self.half_width < 0.6 * guard or not self._tail_ok(params.omega, params.gamma):
            return None
        if n_max == 0:
            return np.zeros(self.u_offset.size)
        sc = _sigma_samples(params.omega, params.gamma, self.u_centred)
        so = _sigma_samples(params.omega, params.gamma, self.u_offset)
        return _series_density(sc, so, self.df, weights)

    def density_on_grid(self, params: ModelParams) -> Optional[np.ndarray]:
        if not self.rin_width:
            return self._density_once(params)
        total = None
        for ri, wi in zip(self._rin_nodes, self._rin_wts):
            s = self._density_once(ModelParams(
                phi=params.phi / math.sqrt(1.0 + ri),
                omega=params.omega * math.sqrt(1.0 + ri),
                gamma=params.gamma))
            if s is None:
                return None
            c = wi * (1.0 + ri)
            total = c * s if total is None else total + c * s
        return total

    def eval(self, params: ModelParams) -> Optional[np.ndarray]:
        """Model density at the in-window data bins, or None if infeasible."""
        dens = self.density_on_grid(params)
        if dens is None:
            return None
        if self.smear:
            lap = np.zeros_like(dens)
            lap[1:-1] = dens[2:] - 2.0 * dens[1:-1] + dens[:-2]
            dens = dens + lap / 6.0
        return dens[self.idx]


@dataclass
class FitOptions:
    tol: float = 1e-6          # simplex size tolerance in log-parameter space
    max_evals: int = 1500      # per start
    restarts: int = 3          # perturbed-simplex restarts after the first run
    perturb: float = 0.05      # log-space std of restart perturbations
    seed: int = 0              # seed for restart perturbations
    rin_width: Optional[float] = None  # fixed R; None disables broadening
    rin_order: int = 21
    smear: bool = True
    series_tol: float = 1e-8
    half_width: Optional[float] = None


class _Objective:
    def __init__(self, model: HeterodyneModel):
        self.model = model
        self.n_evals = 0
        self.warm = None

    def __call__(self, x: np.ndarray) -> float:
        self.n_evals += 1
        if np.any(np.abs(x) > 200):
            return _PENALTY
        try:
            params = ModelParams(phi=math.exp(x[0]), omega=math.exp(x[1]),
                                 gamma=math.exp(x[2]))
            d = self.model.eval(params)
            if d is None or not np.all(np.isfinite(d)):
                return _PENALTY
            nuis, nll = profile_nuisance(self.model.y, d, init=self.warm,
                                         verify=False)
        except (InvalidConfigError, DegenerateModelError,
                NonPositiveModelError, OverflowError):
            return _PENALTY
        self.warm = (nuis.gain, nuis.offset)
        return nll


def mle_fit(est: SpectrumEstimate, init: ModelParams, window: FitWindow,
            options: Optional[FitOptions] = None) -> FitResult:
    """Maximum-likelihood (Phi, Omega, Gamma) with profiled (A, B).

    Nelder-Mead in log-parameter space with perturbed restarts; convergence
    is recorded from the simplex-size criterion. Non-convergence is flagged
    on the result, not raised.
    """
    opt = options or FitOptions()
    model = HeterodyneModel(
        est, window, series_tol=opt.series_tol, half_width=opt.half_width,
        smear=opt.smear, rin_width=opt.rin_width or 0.0, rin_order=opt.rin_order)
    obj = _Objective(model)
    x0 = np.log([init.phi, init.omega, init.gamma])
    f_init = obj(x0)
    if f_init >= _PENALTY:
        raise InvalidConfigError(
            "initial parameters are infeasible on this window/grid")
    fatol = 1e-10 * (1.0 + abs(f_init))
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence([opt.seed, 0xFE11])))
    best = None
    converged = False
    for start in range(1 + opt.restarts):
        x_init = x0 if start == 0 else best.x + opt.perturb * rng.standard_normal(3)
        res = optimize.minimize(
            obj, x_init, method="Nelder-Mead",
            options={"xatol": opt.tol, "fatol": fatol, "maxfev": opt.max_evals})
        if best is None or res.fun < best.fun:
            converged = bool(res.success)
            best = res
    params = ModelParams(phi=math.exp(best.x[0]), omega=math.exp(best.x[1]),
                         gamma=math.exp(best.x[2]))
    d = model.eval(params)
    nuis, nll = profile_nuisance(model.y, d, init=obj.warm)
    return FitResult(
        model=params, nuisance=nuis, nll=nll, converged=converged,
        n_evals=obj.n_evals, window=window, rin_width=opt.rin_width,
        diagnostics={"starts": 1 + opt.restarts, "best_success": bool(best.success)})


_PARAM_INDEX = {"phi": 0, "omega": 1, "gamma": 2}


def credible_from_nll(values: np.ndarray, nll: np.ndarray, level: float):
    """Normalized density exp(-(L - L_min)) and its central credible interval.

    Returns (density, mean, sd, (lo, hi)); integration is trapezoidal on the
    given grid and the interval endpoints come from inverting the cumulative
    density at (1 -+ level)/2.
    """
    values = np.asarray(values, dtype=float)
    nll = np.asarray(nll, dtype=float)
    dens = np.exp(-(nll - nll.min()))
    z = np.trapezoid(dens, values)
    if not (z > 0):
        raise InvalidConfigError("profile density has zero mass on this grid")
    dens = dens / z
    mean = float(np.trapezoid(values * dens, values))
    var = float(np.trapezoid((values - mean) ** 2 * dens, values))
    sd = math.sqrt(max(var, 0.0))
    mid = 0.5 * (dens[1:] + dens[:-1]) * np.diff(values)
    cdf = np.concatenate([[0.0], np.cumsum(mid)])
    cdf /= cdf[-1]
    lo = float(np.interp((1 - level) / 2, cdf, values))
    hi = float(np.interp((1 + level) / 2, cdf, values))
    return dens, mean, sd, (lo, hi)


def _profiled_nll_at(model: HeterodyneModel, scan_param: str, value: float,
                     free: Sequence[str], x_full: np.ndarray, obj_counter,
                     warm: Optional[np.ndarray], tol: float = 1e-7):
    """Minimize over ``free`` log-params at a fixed scanned-parameter value."""
    x_fixed = x_full.copy()
    x_fixed[_PARAM_INDEX[scan_param]] = math.log(value)

    free_idx = [_PARAM_INDEX[p] for p in free]

    def fun(xf):
        x = x_fixed.copy()
        for i, j in enumerate(free_idx):
            x[j] = xf[i]
        return obj_counter(x)

    if free_idx:
        xf0 = (warm if warm is not None else x_fixed[free_idx]).astype(float)
        f_ref = fun(xf0)
        res = optimize.minimize(
            fun, xf0, method="Nelder-Mead",
            options={"xatol": tol, "fatol": 1e-10 * (1.0 + abs(f_ref)),
                     "maxfev": 800})
        x_opt = x_fixed.copy()
        for i, j in enumerate(free_idx):
            x_opt[j] = res.x[i]
        return float(res.fun), res.x, x_opt
    val = obj_counter(x_fixed)
    return float(val), np.empty(0), x_fixed


def profile_scan(est: SpectrumEstimate, fit: FitResult, param: str,
                 window: FitWindow, grid: Optional[np.ndarray] = None,
                 level: float = 0.68, options: Optional[FitOptions] = None,
                 fixed: Sequence[str] = ()) -> ProfileScan:
    """Profile likelihood of one parameter with all others re-fitted.

    At each grid value the remaining shape parameters (minus ``fixed``) and
    the nuisance pair are re-optimized, warm-started from the neighbouring
    point; the scan proceeds outward from the MLE in both directions. The
    normalized density exp(-(L - L_min)) yields the mean, SD and the central
    credible interval at ``level``. The grid is widened until the edge mass
    drops below 1e-3 (up to a cap, after which edge_warning is set).
    """
    if param not in _PARAM_INDEX:
        raise InvalidConfigError(f"unknown parameter {param!r}")
    if not fit.converged:
        raise InvalidConfigError("profile_scan requires a converged fit")
    opt = options or FitOptions()
    model = HeterodyneModel(
        est, window, series_tol=opt.series_tol, half_width=opt.half_width,
        smear=opt.smear, rin_width=opt.rin_width or 0.0, rin_order=opt.rin_order)
    obj = _Objective(model)
    free = [p for p in ("phi", "omega", "gamma") if p != param and p not in fixed]
    x_hat = np.log([fit.model.phi, fit.model.omega, fit.model.gamma])
    center = {"phi": fit.model.phi, "omega": fit.model.omega,
              "gamma": fit.model.gamma}[param]

    if grid is None:
        # curvature-based initial width of the profiled NLL in log space
        h = 0.05
        f0, _, _ = _profiled_nll_at(model, param, center, free, x_hat, obj, None)
        fp, _, _ = _profiled_nll_at(model, param, center * math.exp(h), free, x_hat, obj, None)
        fm, _, _ = _profiled_nll_at(model, param, center * math.exp(-h), free, x_hat, obj, None)
        curv = (fp + fm - 2 * f0) / h**2
        sd_log = 1.0 / math.sqrt(curv) if curv > 0 else 0.25
        sd_log = min(sd_log, 0.5)
        span = 4.0 * sd_log
        grid = center * np.exp(np.linspace(-span, span, 21))
    grid = np.sort(np.asarray(grid, dtype=float))

    def scan(values, warm_start):
        out = []
        warm = warm_start
        x_ref = x_hat
        for v in values:
            val, xf, x_opt = _profiled_nll_at(model, param, v, free, x_ref, obj, warm)
            warm = xf if xf.size else None
            x_ref = x_opt
            out.append((v, val, x_opt))
        return out

    center_idx = int(np.argmin(np.abs(grid - center)))
    results = {}
    for v, val, x_opt in scan(grid[center_idx:], None):
        results[v] = (val, x_opt)
    for v, val, x_opt in scan(grid[:center_idx][::-1], None):
        results[v] = (val, x_opt)

    edge_warning = False
    for _ in range(6):
        values = np.array(sorted(results))
        nll = np.array([results[v][0] for v in values])
        dens = np.exp(-(nll - nll.min()))
        z = np.trapezoid(dens, values)
        edge = max(dens[0], dens[-1]) * (values[1] - values[0]) / z
        if edge < 1e-3:
            break
        step_lo = values[1] - values[0]
        step_hi = values[-1] - values[-2]
        new = []
        if dens[0] * step_lo / z >= 1e-3:
            new.extend(values[0] - step_lo * np.arange(1, 5))
        if dens[-1] * step_hi / z >= 1e-3:
            new.extend(values[-1] + step_hi * np.arange(1, 5))
        new = [v for v in new if v > 0]
        if not new:
            edge_warning = True
            break
        for v, val, x_opt in scan(sorted(n for n in new if n > values[-1]), None):
            results[v] = (val, x_opt)
        for v, val, x_opt in scan(sorted((n for n in new if n < values[0]), reverse=True), None):
            results[v] = (val, x_opt)
    else:
        edge_warning = True

    values = np.array(sorted(results))
    nll = np.array([results[v][0] for v in values])
    dens, mean, sd, (lo, hi) = credible_from_nll(values, nll, level)

    co = {name: np.array([math.exp(results[v][1][_PARAM_INDEX[name]])
                          for v in values])
          for name in ("phi", "omega", "gamma")}
    return ProfileScan(
        param=param, grid=values, nll=nll, density=dens, level=level,
        interval=(lo, hi), mean=mean, sd=sd, co_params=co,
        edge_warning=edge_warning, n_evals=obj.n_evals)
