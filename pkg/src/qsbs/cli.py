"""Command-line entry point.

Every subcommand resolves the shared config, validates all of it, writes the
resolved snapshot to ``<out>/config.resolved.yaml`` and then runs. Rerunning
with ``--config <out>/config.resolved.yaml`` reproduces the directory
byte for byte.

Exit codes: 0 success, 2 config or input error, 3 runtime or fit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, build_experiment, dump_config, load_config, resolve
from .detection import (
    analytic_spectrum,
    analytic_snr_db,
    analyzer_sweep,
    balanced_series,
    lockin_scan,
    peak_and_floor,
)
from .fitting import FitError, fit_spectrum
from .imaging import acquire_image, format_grid, gray_mapping, mean_gap_db, write_pgm
from .materials import MaterialError, material_response
from .photodamage import viability_experiment
from .traces import TraceParseError, read_trace, write_trace
from .units import UnitError

log = logging.getLogger("qsbs")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _label(quantity: str) -> str:
    return quantity.replace(" ", "").replace("/", "_").replace("µ", "u").replace("μ", "u")


def _db(x):
    return 10.0 * math.log10(x) if x > 0 else None


# --------------------------------------------------------------------------
# subcommands


def cmd_spectrum(exp, out: Path) -> None:
    p = exp.spectrum_params()
    src = exp.source(pump_power=p["pump_power"], probe_power=p["probe_power"])
    trace = lockin_scan(exp.chain, src, exp.library, p["mixture"], p["range"], exp.lockin,
                        seed=exp.seed, averages=p["averages"])
    write_trace(trace, out / "spectrum.csv")
    i = int(np.argmax(trace.values))
    _dump_json({
        "state": src.state.value,
        "max_amplitude_uv": float(trace.values[i]),
        "max_detuning_ghz": float(trace.axis[i]),
        "noise_sigma_uv": trace.metadata["noise_sigma_uv"],
        "unit_gain_amplitude_uv": trace.metadata["unit_gain_amplitude_uv"],
        "points": len(trace),
    }, out / "summary.json")


def cmd_gain(exp, out: Path) -> None:
    p = exp.gain_params()
    gain = material_response(exp.library, p["mixture"], p["lock"]) if p["enabled"] else 0.0
    settings = exp.analyzer
    rows = []
    for i, (label, pump) in enumerate(p["pumps"]):
        for j, state in enumerate(p["states"]):
            src = exp.source(state.value, pump_power=pump)
            seed = exp.seed + 100 * i + j
            if p["path"] == "analytic":
                model = analytic_spectrum(exp.chain, src, gain=gain)
                trace = analyzer_sweep(model, settings, seed=seed)
            else:
                x, fs = balanced_series(exp.chain, src, gain, duration=p["duration"],
                                        sample_rate=p["sample_rate"], seed=seed)
                trace = analyzer_sweep(x, settings, sample_rate=fs)
            trace.metadata.update(seed=seed, pump_power_w=pump, state=state.value, gain=float(gain),
                                  lock_detuning_ghz=p["lock"])
            name = f"gain_{_label(label)}_{state.value}.csv"
            write_trace(trace, out / name)
            row = {"file": name, "pump_power": label, "state": state.value, "seed": seed,
                   "analytic_snr_db": _finite(analytic_snr_db(exp.chain, src, exp.library, p["mixture"],
                                                              p["lock"], settings.rbw)) if p["enabled"] else None}
            if not settings.zero_span:
                peak, floor = peak_and_floor(trace, exp.chain.signal_freq, settings.rbw)
                row.update(peak_dbm=_db(peak), floor_dbm=_db(floor),
                           measured_snr_db=_db(peak - floor) - _db(floor) if peak > floor else None)
            rows.append(row)
    _dump_json({"traces": rows, "gain": float(gain), "path": p["path"]}, out / "summary.json")


def _finite(x):
    return float(x) if math.isfinite(x) else None


def cmd_image(exp, out: Path) -> None:
    p = exp.image_params()
    results = {}
    for state in p["states"]:
        plan = exp.scan_plan(exp.source(state.value), p)
        results[state.value] = acquire_image(p["phantom"], plan, exp.library, noise=p["noise"])
    # one gray scale across states so the images compare directly
    hi = max(float(np.max(r.values)) for r in results.values())
    summary = {"states": {}}
    for name, res in results.items():
        pixels, mapping = gray_mapping(res.values, 0.0, hi)
        (out / f"image_{name}.txt").write_text(format_grid(res), encoding="utf-8")
        write_pgm(pixels, out / f"image_{name}.pgm")
        _dump_json({"mapping": mapping, "metadata": res.metadata,
                    "acquisition_time_s": res.acquisition_time}, out / f"image_{name}.json")
        summary["states"][name] = {
            "mean_contrast_db": float(np.mean(res.values)),
            "max_contrast_db": float(np.max(res.values)),
            "acquisition_time_s": res.acquisition_time,
        }
    if "coherent" in results and "squeezed" in results:
        summary["mean_gap_db"] = mean_gap_db(results["squeezed"], results["coherent"])
    _dump_json(summary, out / "summary.json")


def cmd_viability(exp, out: Path) -> None:
    p = exp.viability_params()
    curves = viability_experiment(
        p["model"],
        p["conditions"],
        horizon_h=p["horizon"],
        sample_interval_h=p["interval"],
        library=exp.library if p["spectra"] else None,
        chain=exp.chain,
        probe_power=p["probe_power"],
        sample=p["sample"],
        lockin=exp.lockin,
        averages=p["averages"],
        seed=exp.seed,
        source_overrides=exp.squeezed_overrides(),
    )
    lines = ["time_h,condition,viability"]
    for c in curves:
        lines.extend(f"{t!r},{c.label},{v!r}" for t, v in zip(c.times.tolist(), c.values.tolist()))
    (out / "viability.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if p["spectra"]:
        spec_dir = out / "spectra"
        spec_dir.mkdir(exist_ok=True)
        for c in curves:
            for t, tr in zip(c.times.tolist(), c.spectra):
                tr.metadata.update(condition=c.label, time_h=t)
                write_trace(tr, spec_dir / f"{c.label}_{t:g}h.csv")
    m = p["model"]
    summary = {
        "model": {"rate_k": m.rate_k, "alpha": m.power_exponent_alpha,
                  "target_material": m.target_material, "target_resonance": m.target_resonance},
        "final_viability": {c.label: float(c.values[-1]) for c in curves},
    }
    if len(curves) == 2 and curves[0].values[-1] > 0:
        summary["final_ratio"] = float(curves[1].values[-1] / curves[0].values[-1])
    _dump_json(summary, out / "summary.json")


def cmd_fit(exp, out: Path) -> None:
    p = exp.fit_params()
    if p["trace"] is None:
        raise ConfigError("fit.trace: no trace file given")
    trace = read_trace(p["trace"])
    result = fit_spectrum(trace, p["n_resonances"], max_residual_ratio=p["max_residual_ratio"])
    report = result.as_dict()
    report["trace"] = p["trace"]
    report["n_resonances"] = p["n_resonances"]
    _dump_json(report, out / "fit.json")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "gain": cmd_gain,
    "image": cmd_image,
    "viability": cmd_viability,
    "fit": cmd_fit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsbs", description="Quantum-enhanced SBS microscopy simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("spectrum", "lock-in detuning scan of a sample"),
        ("gain", "spectrum-analyzer traces at a fixed lock detuning"),
        ("image", "raster-scanned SBS contrast images"),
        ("viability", "photodamage viability curves and spectra"),
        ("fit", "fit Brillouin lines to a lock-in trace file"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="YAML experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "fit":
            p.add_argument("trace", nargs="?", type=Path, help="trace file (overrides fit.trace)")
            p.add_argument("--resonances", type=int, help="number of lines (overrides fit.n_resonances)")
    return parser


def _resolve_args(args) -> dict:
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed: must be >= 0")
    if args.config is not None:
        resolved = load_config(args.config, seed=args.seed)
    else:
        resolved = resolve({}, None, seed=args.seed)
    if args.command == "fit":
        if args.trace is not None:
            resolved["fit"]["trace"] = str(args.trace.resolve())
        if args.resonances is not None:
            resolved["fit"]["n_resonances"] = args.resonances
    return resolved


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        resolved = _resolve_args(args)
        exp = build_experiment(resolved)
    except (ConfigError, UnitError, MaterialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.resolved.yaml").write_text(dump_config(resolved), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        COMMANDS[args.command](exp, out)
    except (ConfigError, TraceParseError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"input error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, RuntimeError, MemoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s outputs to %s", args.command, out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
