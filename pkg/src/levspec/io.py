"""File formats.

Time series: raw little-endian float64 samples in ``<stem>.f64`` plus a JSON
sidecar ``<stem>.json``:

    {"format": "levspec-timeseries-v1", "data_file": "<stem>.f64",
     "dtype": "<f8", "n_samples": int, "sample_rate": Hz, "duration": s,
     "seed": int, "kind": "position"|"detector", "metadata": {...}}

Spectra, theory curves, fits, profiles, and ensemble reports are plain JSON
(grids stored as (f_start, df, n) where uniform). All writers embed the
originating parameters and seed so every output is reproducible from its
own header.
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from .errors import InvalidConfigError
from .inference import FitResult, FitWindow, NuisanceParams, ProfileScan
from .params import ModelParams
from .sde import TimeSeries
from .spectral import SpectrumEstimate, WindowSpec
from .theory import FrequencyGrid, TheorySpectrum

_TS_FORMAT = "levspec-timeseries-v1"
_SPEC_FORMAT = "levspec-spectrum-v1"
_THEORY_FORMAT = "levspec-theory-v1"
_FIT_FORMAT = "levspec-fit-v1"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _stem(path: str) -> str:
    base, ext = os.path.splitext(path)
    return base if ext in (".f64", ".json") else path


def write_timeseries(path: str, ts: TimeSeries) -> tuple[str, str]:
    """Write <stem>.f64 (raw LE float64) and <stem>.json; returns both paths."""
    stem = _stem(path)
    data_path, meta_path = stem + ".f64", stem + ".json"
    ts.samples.astype("<f8").tofile(data_path)
    meta = dict(ts.metadata)
    sidecar = {
        "format": _TS_FORMAT,
        "data_file": os.path.basename(data_path),
        "dtype": "<f8",
        "n_samples": ts.n,
        "sample_rate": ts.sample_rate,
        "duration": ts.duration,
        "seed": meta.get("seed"),
        "kind": meta.get("kind", "unknown"),
        "metadata": meta,
    }
    with open(meta_path, "w") as fh:
        json.dump(sidecar, fh, indent=1, default=_json_default)
        fh.write("\n")
    return data_path, meta_path


def read_timeseries(path: str) -> TimeSeries:
    stem = _stem(path)
    meta_path = stem + ".json"
    if not os.path.exists(meta_path):
        raise FileNotFoundError(meta_path)
    with open(meta_path) as fh:
        sidecar = json.load(fh)
    if sidecar.get("format") != _TS_FORMAT:
        raise InvalidConfigError(f"{meta_path}: not a {_TS_FORMAT} sidecar")
    data_path = os.path.join(os.path.dirname(meta_path) or ".",
                             sidecar["data_file"])
    samples = np.fromfile(data_path, dtype="<f8")
    if samples.size != sidecar["n_samples"]:
        raise InvalidConfigError(
            f"{data_path}: expected {sidecar['n_samples']} samples, "
            f"found {samples.size}")
    return TimeSeries(sample_rate=sidecar["sample_rate"], samples=samples,
                      metadata=sidecar.get("metadata", {}))


def write_spectrum(path: str, est: SpectrumEstimate) -> str:
    doc = {
        "format": _SPEC_FORMAT,
        "f_start": float(est.freqs[0]),
        "df": est.df,
        "n": int(est.freqs.size),
        "power": est.power,
        "nu": est.nu,
        "window": {"kind": est.window.kind},
        "segment_length": est.segment_length,
        "n_segments": est.n_segments,
        "sample_rate": est.sample_rate,
        "two_sided": est.two_sided,
        "metadata": est.metadata,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, default=_json_default)
        fh.write("\n")
    return path


def read_spectrum(path: str) -> SpectrumEstimate:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _SPEC_FORMAT:
        raise InvalidConfigError(f"{path}: not a {_SPEC_FORMAT} file")
    freqs = doc["f_start"] + doc["df"] * np.arange(doc["n"])
    return SpectrumEstimate(
        freqs=freqs, power=np.asarray(doc["power"]), nu=doc["nu"],
        segment_length=doc["segment_length"], n_segments=doc["n_segments"],
        sample_rate=doc["sample_rate"], window=WindowSpec(doc["window"]["kind"]),
        two_sided=doc["two_sided"], metadata=doc.get("metadata", {}))


def write_theory(path: str, th: TheorySpectrum) -> str:
    doc = {
        "format": _THEORY_FORMAT,
        "f0": th.grid.f0,
        "df": th.grid.df,
        "half_width": th.grid.half_width,
        "n_points": th.grid.n_points,
        "density": th.density,
        "carrier_weight": th.carrier_weight,
        "params": th.params,
        "truncation_order": th.truncation_order,
        "truncation_bound": th.truncation_bound,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, default=_json_default)
        fh.write("\n")
    return path


def read_theory(path: str) -> TheorySpectrum:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _THEORY_FORMAT:
        raise InvalidConfigError(f"{path}: not a {_THEORY_FORMAT} file")
    grid = FrequencyGrid(f0=doc["f0"], df=doc["df"], n_points=doc["n_points"])
    return TheorySpectrum(
        grid=grid, density=np.asarray(doc["density"]),
        carrier_weight=doc["carrier_weight"],
        truncation_order=doc["truncation_order"],
        truncation_bound=doc["truncation_bound"], params=doc.get("params", {}))


def _window_doc(window: FitWindow) -> dict:
    return {"carrier_freq": window.carrier_freq,
            "intervals": [list(iv) for iv in window.intervals],
            "exclusion_bins": window.exclusion_bins}


def window_from_doc(doc: dict) -> FitWindow:
    return FitWindow(carrier_freq=doc["carrier_freq"],
                     intervals=tuple(tuple(iv) for iv in doc["intervals"]),
                     exclusion_bins=doc["exclusion_bins"])


def scan_doc(scan: ProfileScan) -> dict:
    return {
        "param": scan.param, "grid": scan.grid, "nll": scan.nll,
        "density": scan.density, "level": scan.level,
        "interval": list(scan.interval), "mean": scan.mean, "sd": scan.sd,
        "co_params": {k: v for k, v in scan.co_params.items()},
        "edge_warning": scan.edge_warning, "n_evals": scan.n_evals,
    }


def write_fit(path: str, fit: FitResult,
              profiles: Optional[list[ProfileScan]] = None,
              extra: Optional[dict] = None) -> str:
    doc = {
        "format": _FIT_FORMAT,
        "params": fit.model.to_dict(),
        "nuisance": {"gain": fit.nuisance.gain, "offset": fit.nuisance.offset},
        "nll": fit.nll,
        "converged": fit.converged,
        "n_evals": fit.n_evals,
        "window": _window_doc(fit.window),
        "rin_width": fit.rin_width,
        "diagnostics": fit.diagnostics,
    }
    if profiles:
        doc["profiles"] = [scan_doc(s) for s in profiles]
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, default=_json_default)
        fh.write("\n")
    return path


def read_fit(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _FIT_FORMAT:
        raise InvalidConfigError(f"{path}: not a {_FIT_FORMAT} file")
    return doc


def export_fit_tsv(path: str, est: SpectrumEstimate, fit: FitResult,
                   model_power: np.ndarray) -> str:
    """Plot-ready TSV: frequency, data, model, normalized residual."""
    sel = fit.window.mask(est.freqs, est.df)
    with open(path, "w") as fh:
        fh.write("freq_hz\tdata\tmodel\tresidual\n")
        for f, y, s in zip(est.freqs[sel], est.power[sel], model_power[sel]):
            fh.write(f"{f:.10g}\t{y:.10g}\t{s:.10g}\t{y / s:.10g}\n")
    return path
