"""Batch command-line front end.

Subcommands wire the pipeline: simulate -> psd -> fit / profile / ensemble,
plus direct theory-spectrum evaluation. All true frequencies are accepted in
Hz; --omega is the natural angular frequency in rad/s and --gamma the
damping rate in 1/s, matching the physics symbols.

Exit codes: 0 success, 2 validation error, 1 runtime error,
3 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io as lio
from .ensemble import default_fit_window, ensemble_validate
from .errors import InvalidConfigError, LevspecError, NonConvergenceError
from .inference import (
    FitOptions,
    FitWindow,
    HeterodyneModel,
    mle_fit,
    profile_scan,
)
from .params import (
    ModelParams,
    OscillatorParams,
    RinDrift,
    SignalParams,
    SimulationConfig,
)
from .sde import simulate_trajectory, synthesize_signal
from .spectral import WindowSpec, bartlett, fold_onesided, periodogram
from .theory import (
    FrequencyGrid,
    default_grid,
    middleton_series,
    rin_broadened,
    spectrum_from_correlation,
)

log = logging.getLogger("levspec")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3


def _default_threads() -> int:
    try:
        return max(int(os.environ.get("LEVSPEC_THREADS", "1")), 1)
    except ValueError:
        return 1


def _parse_windows(spec: str) -> tuple:
    out = []
    for part in spec.split(","):
        lo, _, hi = part.partition(":")
        if not hi:
            raise InvalidConfigError(f"bad window interval {part!r}; use lo:hi")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _oscillator(ns) -> OscillatorParams:
    return OscillatorParams(omega=ns.omega, gamma=ns.gamma,
                            temperature=ns.temperature, mass=ns.mass)


def _signal(ns) -> SignalParams:
    return SignalParams(carrier_freq=ns.f0, amplitude=ns.v0,
                        phase_offset=ns.theta0,
                        kappa=getattr(ns, "kappa", None),
                        phi=getattr(ns, "phi", None),
                        noise_floor=ns.noise_floor)


def _simconfig(ns) -> SimulationConfig:
    rin = None
    if getattr(ns, "rin", 0.0):
        rin = RinDrift(width=ns.rin, model=ns.rin_model)
    return SimulationConfig(dt=ns.dt, sample_rate=ns.rate, duration=ns.duration,
                            seed=ns.seed, rin_drift=rin)


def cmd_simulate(ns) -> int:
    osc = _oscillator(ns)
    cfg = _simconfig(ns)
    z = simulate_trajectory(osc, cfg, backend=ns.backend)
    if ns.phi is None and ns.kappa is None:
        paths = lio.write_timeseries(ns.output, z)
    else:
        sig = _signal(ns)
        v = synthesize_signal(z, sig, cfg, osc=osc)
        paths = lio.write_timeseries(ns.output, v)
    log.info("wrote %s (%d samples)", paths[0], z.n)
    print(paths[1])
    return EXIT_OK


def cmd_psd(ns) -> int:
    ts = lio.read_timeseries(ns.input)
    window = WindowSpec(ns.window)
    if ns.segments is not None:
        seg = ts.n // ns.segments
    else:
        seg = ns.segment
    est = bartlett(ts, seg, window=window, detrend=not ns.no_detrend)
    if ns.one_sided:
        est = fold_onesided(est)
    est.metadata.update({"source": ns.input, "seed": ts.metadata.get("seed")})
    lio.write_spectrum(ns.output, est)
    log.info("nu = %d (%d segments of %d)", est.nu, est.n_segments, seg)
    print(ns.output)
    return EXIT_OK


def cmd_theory(ns) -> int:
    model = ModelParams(phi=ns.phi, omega=ns.omega, gamma=ns.gamma)
    if ns.half_width is not None:
        grid = FrequencyGrid.centered(ns.f0, ns.df, ns.half_width)
    else:
        grid = default_grid(model, df=ns.df, tol=ns.tol, f0=ns.f0)
    if ns.method == "series":
        def evaluator(m):
            return middleton_series(m, grid, tol=ns.tol, v0=ns.v0)
    else:
        def evaluator(m):
            return spectrum_from_correlation(m, grid, v0=ns.v0)
    spec = rin_broadened(evaluator, model, ns.rin, ns.quad_order) \
        if ns.rin else evaluator(model)
    lio.write_theory(ns.output, spec)
    print(ns.output)
    return EXIT_OK


def _fit_common(ns) -> tuple:
    est = lio.read_spectrum(ns.spectrum)
    init = ModelParams(phi=ns.init_phi, omega=ns.init_omega, gamma=ns.init_gamma)
    intervals = _parse_windows(ns.window) if ns.window else ()
    if not intervals and ns.auto_window:
        window = default_fit_window(init, ns.f0,
                                    exclusion_bins=ns.exclude_carrier)
    else:
        window = FitWindow(carrier_freq=ns.f0, intervals=intervals,
                           exclusion_bins=ns.exclude_carrier)
    options = FitOptions(restarts=ns.restarts, seed=ns.seed,
                         rin_width=ns.rin if ns.rin else None,
                         smear=not ns.no_smear, tol=ns.tol)
    return est, window, init, options


def _write_fit_outputs(ns, est, fit, profiles=None) -> None:
    extra = {"spectrum_file": ns.spectrum,
             "config": {k: v for k, v in vars(ns).items()
                        if k not in ("func", "config") and
                        isinstance(v, (int, float, str, bool, type(None)))}}
    lio.write_fit(ns.output, fit, profiles=profiles, extra=extra)
    if getattr(ns, "export_tsv", None):
        model = HeterodyneModel(est, fit.window,
                                rin_width=fit.rin_width or 0.0,
                                smear=not ns.no_smear)
        dens = model.eval(fit.model)
        power = np.full(est.power.size, fit.nuisance.offset)
        power[model.mask] = fit.nuisance.gain * dens + fit.nuisance.offset
        lio.export_fit_tsv(ns.export_tsv, est, fit, power)


def cmd_fit(ns) -> int:
    est, window, init, options = _fit_common(ns)
    fit = mle_fit(est, init, window, options)
    _write_fit_outputs(ns, est, fit)
    print(ns.output)
    if not fit.converged:
        log.error("fit did not converge after %d evaluations", fit.n_evals)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_profile(ns) -> int:
    est, window, init, options = _fit_common(ns)
    fit = mle_fit(est, init, window, options)
    if not fit.converged:
        _write_fit_outputs(ns, est, fit)
        log.error("fit did not converge; no profile computed")
        return EXIT_NONCONVERGENCE
    fixed = tuple(ns.fix) if ns.fix else ()
    scan = profile_scan(est, fit, ns.param, window, level=ns.level,
                        options=options, fixed=fixed)
    _write_fit_outputs(ns, est, fit, profiles=[scan])
    print(ns.output)
    return EXIT_OK


def cmd_ensemble(ns) -> int:
    osc = _oscillator(ns)
    sig = _signal(ns)
    cfg = _simconfig(ns)
    options = FitOptions(restarts=ns.restarts, seed=ns.seed,
                         smear=not ns.no_smear)
    report = ensemble_validate(
        osc, sig, cfg, ns.runs, segment_length=ns.segment, options=options,
        level=ns.level, threads=ns.threads)
    doc = report.to_dict()
    doc["config"] = {"omega": ns.omega, "gamma": ns.gamma, "phi": ns.phi,
                     "f0": ns.f0, "rate": ns.rate, "duration": ns.duration,
                     "dt": ns.dt, "seed": ns.seed, "segment": ns.segment,
                     "runs": ns.runs, "level": ns.level}
    with open(ns.output, "w") as fh:
        json.dump(doc, fh, default=lio._json_default)
        fh.write("\n")
    print(ns.output)
    return EXIT_OK


def _add_osc_args(p, with_signal=True):
    p.add_argument("--omega", type=float, required=True,
                   help="natural angular frequency, rad/s")
    p.add_argument("--gamma", type=float, required=True,
                   help="damping rate, 1/s")
    p.add_argument("--temperature", type=float, default=300.0, help="K")
    p.add_argument("--mass", type=float, default=1e-18, help="kg")
    if with_signal:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--phi", type=float, default=None,
                       help="target RMS modulation depth, rad")
        g.add_argument("--kappa", type=float, default=None,
                       help="position-to-phase sensitivity, rad/m")
        p.add_argument("--v0", type=float, default=1.0, help="carrier amplitude")
        p.add_argument("--theta0", type=float, default=0.0, help="phase offset, rad")
        p.add_argument("--noise-floor", type=float, default=0.0,
                       help="two-sided detector-noise PSD, 1/Hz")


def _add_sim_args(p):
    p.add_argument("--rate", type=float, required=True, help="sample rate, S/s")
    p.add_argument("--duration", type=float, required=True, help="s")
    p.add_argument("--dt", type=float, default=1e-9, help="integrator step, s")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rin", type=float, default=0.0,
                   help="relative intensity drift width R")
    p.add_argument("--rin-model", choices=("constant", "ramp"),
                   default="constant")


def _add_fit_args(p):
    p.add_argument("--spectrum", required=True, help="spectrum JSON from psd")
    p.add_argument("--f0", type=float, required=True, help="carrier, Hz")
    p.add_argument("--init-phi", type=float, required=True)
    p.add_argument("--init-omega", type=float, required=True)
    p.add_argument("--init-gamma", type=float, required=True)
    p.add_argument("--window", default=None,
                   help="included intervals lo:hi[,lo:hi...] in Hz")
    p.add_argument("--auto-window", action="store_true",
                   help="derive the window from the initial parameters")
    p.add_argument("--exclude-carrier", type=int, default=3,
                   help="carrier exclusion half-width, bins")
    p.add_argument("--rin", type=float, default=0.0,
                   help="fixed RIN width R used in the model")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-smear", action="store_true",
                   help="disable the window-expectation curvature correction")
    p.add_argument("--export-tsv", default=None,
                   help="write freq/data/model/residual TSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levspec",
        description="Simulate, estimate, and fit heterodyne oscillator spectra")
    parser.add_argument("--config", default=None,
                        help="JSON file of default option values")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate trajectory / detector signal")
    _add_osc_args(p)
    _add_sim_args(p)
    p.add_argument("--f0", type=float, default=3e6, help="carrier, Hz")
    p.add_argument("--backend", choices=("cython", "numpy"), default=None)
    p.add_argument("-o", "--output", required=True, help="output stem")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("psd", help="Bartlett-averaged spectral density")
    p.add_argument("--input", required=True, help="time-series stem or sidecar")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--segment", type=int, default=65536,
                   help="segment length, samples")
    g.add_argument("--segments", type=int, default=None,
                   help="number of equal segments")
    p.add_argument("--window", choices=("hann", "rect"), default="hann")
    p.add_argument("--one-sided", action="store_true")
    p.add_argument("--no-detrend", action="store_true")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("theory", help="evaluate the theoretical spectrum")
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--f0", type=float, default=0.0)
    p.add_argument("--df", type=float, default=None)
    p.add_argument("--half-width", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--v0", type=float, default=1.0)
    p.add_argument("--method", choices=("series", "correlation"),
                   default="series")
    p.add_argument("--rin", type=float, default=0.0)
    p.add_argument("--quad-order", type=int, default=21)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("fit", help="Whittle maximum-likelihood fit")
    _add_fit_args(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("profile", help="profile-likelihood scan")
    _add_fit_args(p)
    p.add_argument("--param", choices=("phi", "omega", "gamma"), required=True)
    p.add_argument("--level", type=float, default=0.68)
    p.add_argument("--fix", action="append", choices=("phi", "omega", "gamma"),
                   help="hold this parameter at its MLE during the scan")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("ensemble", help="ensemble recovery validation")
    _add_osc_args(p)
    _add_sim_args(p)
    p.add_argument("--f0", type=float, default=3e6)
    p.add_argument("--runs", type=int, default=40)
    p.add_argument("--segment", type=int, default=65536)
    p.add_argument("--level", type=float, default=0.68)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--no-smear", action="store_true")
    p.add_argument("--threads", type=int, default=_default_threads(),
                   help="worker processes (env LEVSPEC_THREADS)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_ensemble)
    return parser


def _apply_config(parser, ns, argv) -> None:
    if not ns.config:
        return
    with open(ns.config) as fh:
        conf = json.load(fh)
    if not isinstance(conf, dict):
        raise InvalidConfigError(f"{ns.config}: config must be a JSON object")
    explicit = {a.lstrip("-").replace("-", "_").split("=")[0]
                for a in argv if a.startswith("--")}
    for key, value in conf.items():
        dest = key.replace("-", "_")
        if dest in explicit or not hasattr(ns, dest):
            continue
        setattr(ns, dest, value)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if ns.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s")
        _apply_config(parser, ns, argv)
        return ns.func(ns)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (InvalidConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (LevspecError, Exception) as exc:  # noqa: B014 - runtime bucket
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
