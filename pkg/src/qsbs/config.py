"""Experiment configuration: one schema shared by every subcommand.

A config file is YAML. Physical quantities are strings with explicit unit
suffixes (``"7 mW"``, ``"6.7 GHz"``); bare numbers are accepted only for
dimensionless fields. Unknown keys are errors. The user file is merged onto
:data:`DEFAULTS`, the material library is inlined, and the resulting
*resolved* mapping is what every run is built from and what gets written
next to the outputs, so a snapshot alone reproduces a run.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .detection import AnalyzerSettings, DetectionChain, LockInSettings
from .imaging import Phantom, ScanPlan, spheroid_phantom
from .materials import DEFAULT_LIBRARY, MaterialError, MaterialLibrary, Mixture, library_from_dict
from .photodamage import CalibrationError, Condition, DamageModel, calibrate_damage
from .quantum_light import LightSource, LightState
from .units import UnitError, parse_quantity


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "materials": "default",
    "source": {
        "probe_power": "700 uW",
        "pump_power": "7 mW",
        "state": "coherent",
        "squeezing": "7 dB",
        "transmission": 0.691,
        "conjugate_power": None,
        "squeezing_bandwidth": None,
    },
    "chain": {
        "pump_mod_freq": "300 kHz",
        "probe_mod_freq": "400 kHz",
        "cmrr": "26 dB",
        "electronic_noise": "-81 dBm",
        "shot_noise_ref": "-67 dBm",
        "shot_noise_ref_power": "700 uW",
        "noise_ref_rbw": "10 kHz",
        "sbs_ref": "-75.2 dBm",
        "modulation_depth": 0.1,
        "technical_noise": "-110 dBm/Hz",
        "pump_leakage": 0.0,
    },
    "analyzer": {
        "mode": "swept",
        "rbw": "10 kHz",
        "vbw": "10 Hz",
        "start": "625 kHz",
        "stop": "775 kHz",
        "points": 601,
        "sweep_time": "1 s",
        "center": "700 kHz",
    },
    "lockin": {
        "time_constant": "300 ms",
        "scan_rate": "0.02 Hz",
        "grid_step": "40 MHz",
    },
    "spectrum": {
        "sample": {"water": 1.0},
        "detuning_start": "-7 GHz",
        "detuning_stop": "7 GHz",
        "averages": 1,
        "pump_power": "40 mW",
        "probe_power": "500 uW",
    },
    "gain": {
        "sample": {"hydrogel": 1.0},
        "lock_detuning": "6.7 GHz",
        "pump_powers": ["30 mW", "7 mW"],
        "states": ["coherent", "squeezed"],
        "enabled": True,
        "path": "synthesized",
        "duration": "50 ms",
        "sample_rate": "4 MHz",
    },
    "image": {
        "lock_detuning": "6.7 GHz",
        "nx": 55,
        "ny": 55,
        "step": "6 um",
        "spot_diameter": "5 um",
        "dwell": None,
        "states": ["coherent", "squeezed"],
        "noise": True,
        "phantom": {
            "kind": "spheroids",
            "width": 55,
            "height": 55,
            "pitch": "6 um",
            "background": {"hydrogel": 1.0},
            "blob": {"cell_spheroid": 1.0},
            "blobs": [
                {"x": "90 um", "y": "100 um", "r": "45 um"},
                {"x": "230 um", "y": "210 um", "r": "60 um"},
                {"x": "250 um", "y": "60 um", "r": "30 um"},
            ],
        },
    },
    "viability": {
        "calibration": [
            {"power": "45 mW", "time": "3 h", "viability": 0.13},
            {"power": "24 mW", "time": "3 h", "viability": 0.41},
        ],
        "model": None,
        "target_material": "cell_spheroid",
        "target_resonance": 1,
        "conditions": [
            {"label": "coherent", "power": "45 mW", "state": "coherent"},
            {"label": "squeezed", "power": "24 mW", "state": "squeezed"},
        ],
        "horizon": "3 h",
        "interval": "1 h",
        "probe_power": "900 uW",
        "sample": {"cell_spheroid": 0.5, "water": 0.5},
        "spectra": True,
        "averages": 10,
    },
    "fit": {
        "trace": None,
        "n_resonances": 1,
        "max_residual_ratio": 3.0,
    },
}

# keys whose values are free-form mappings rather than schema sections
_OPEN_MAPPINGS = {"sample", "background", "blob"}


def _merge(base, override, path):
    if not isinstance(override, Mapping):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(base[key], dict) and key not in _OPEN_MAPPINGS and key != "phantom":
            out[key] = _merge(base[key], value, where)
        elif key == "phantom":
            if not isinstance(value, Mapping):
                raise ConfigError(f"{where}: expected a mapping")
            out[key] = copy.deepcopy(dict(value))
        else:
            out[key] = copy.deepcopy(value)
    return out


def _read_yaml(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None


def resolve(raw: Mapping | None, base_dir: Path | None = None, seed: int | None = None) -> dict:
    """Merge ``raw`` onto the defaults and inline the material library."""
    resolved = _merge(DEFAULTS, raw or {}, "")
    if seed is not None:
        resolved["seed"] = int(seed)
    mats = resolved["materials"]
    if isinstance(mats, str):
        path = DEFAULT_LIBRARY if mats == "default" else Path(mats)
        if not path.is_absolute() and base_dir is not None and mats != "default":
            path = base_dir / path
        data = _read_yaml(path)
        if not isinstance(data, Mapping) or "materials" not in data:
            raise ConfigError(f"materials: {path} has no 'materials' mapping")
        resolved["materials"] = data["materials"]
    elif not isinstance(mats, Mapping):
        raise ConfigError("materials: expected 'default', a file path or an inline mapping")
    return resolved


def load_config(path, seed: int | None = None) -> dict:
    path = Path(path)
    return resolve(_read_yaml(path), path.parent, seed)


def dump_config(resolved: Mapping) -> str:
    return yaml.safe_dump(dict(resolved), sort_keys=True, allow_unicode=True, default_flow_style=False)


# --------------------------------------------------------------------------
# typed views of the resolved mapping


def _q(section: Mapping, key: str, dimension: str, where: str, unit: str | None = None):
    try:
        return parse_quantity(section[key], dimension, unit)
    except UnitError as exc:
        raise ConfigError(f"{where}.{key}: {exc}") from None


def _num(section: Mapping, key: str, where: str, integer=False):
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return int(v) if integer else float(v)


def _flag(section, key, where):
    v = section[key]
    if not isinstance(v, bool):
        raise ConfigError(f"{where}.{key}: expected true/false, got {v!r}")
    return v


def _mixture(value, where) -> Mixture:
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected a mapping of material -> weight")
    for k, v in value.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.{k}: expected a number")
    try:
        return Mixture(dict(value))
    except MaterialError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _state(value, where) -> LightState:
    try:
        return LightState(value)
    except ValueError:
        raise ConfigError(f"{where}: state must be 'coherent' or 'squeezed', got {value!r}") from None


@dataclass
class Experiment:
    """Typed, validated view of a resolved config."""

    resolved: dict
    library: MaterialLibrary
    chain: DetectionChain
    analyzer: AnalyzerSettings
    lockin: LockInSettings

    @property
    def seed(self) -> int:
        return int(self.resolved["seed"])

    def source(self, state=None, pump_power=None, probe_power=None) -> LightSource:
        s = self.resolved["source"]
        where = "source"
        state = _state(state or s["state"], f"{where}.state")
        probe = probe_power if probe_power is not None else _q(s, "probe_power", "power", where)
        pump = pump_power if pump_power is not None else _q(s, "pump_power", "power", where)
        conj = None if s["conjugate_power"] is None else _q(s, "conjugate_power", "power", where)
        bw = None if s["squeezing_bandwidth"] is None else _q(s, "squeezing_bandwidth", "frequency", where)
        kw = dict(conjugate_power=conj, squeezing_bandwidth_hz=bw)
        try:
            if state is LightState.SQUEEZED:
                return LightSource(
                    probe, pump, state=state,
                    squeezing_db=_q(s, "squeezing", "ratio_db", where),
                    transmission=_num(s, "transmission", where), **kw,
                )
            return LightSource(probe, pump, state=state, **kw)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    def squeezed_overrides(self) -> dict:
        s = self.resolved["source"]
        return {
            "squeezing_db": _q(s, "squeezing", "ratio_db", "source"),
            "transmission": _num(s, "transmission", "source"),
        }

    # -- subcommand sections --------------------------------------------------

    def spectrum_params(self) -> dict:
        s, w = self.resolved["spectrum"], "spectrum"
        mix = _mixture(s["sample"], f"{w}.sample")
        self._check_mixture(mix, f"{w}.sample")
        start = _q(s, "detuning_start", "frequency", w, "GHz")
        stop = _q(s, "detuning_stop", "frequency", w, "GHz")
        if not stop > start:
            raise ConfigError(f"{w}.detuning_stop: must exceed detuning_start")
        avg = _num(s, "averages", w, integer=True)
        if avg < 1:
            raise ConfigError(f"{w}.averages: must be >= 1")
        return {
            "mixture": mix,
            "range": (start, stop),
            "averages": avg,
            "pump_power": _q(s, "pump_power", "power", w),
            "probe_power": _q(s, "probe_power", "power", w),
        }

    def gain_params(self) -> dict:
        s, w = self.resolved["gain"], "gain"
        mix = _mixture(s["sample"], f"{w}.sample")
        self._check_mixture(mix, f"{w}.sample")
        pumps = s["pump_powers"]
        if not isinstance(pumps, list) or not pumps:
            raise ConfigError(f"{w}.pump_powers: expected a non-empty list")
        pump_w = []
        for i, p in enumerate(pumps):
            try:
                pump_w.append((p, parse_quantity(p, "power")))
            except UnitError as exc:
                raise ConfigError(f"{w}.pump_powers[{i}]: {exc}") from None
        return {
            "mixture": mix,
            "lock": _q(s, "lock_detuning", "frequency", w, "GHz"),
            "pumps": pump_w,
            "states": self._states(s["states"], f"{w}.states"),
            "enabled": _flag(s, "enabled", w),
            "path": self._choice(s, "path", w, ("synthesized", "analytic")),
            "duration": _q(s, "duration", "time", w),
            "sample_rate": _q(s, "sample_rate", "frequency", w),
        }

    def image_params(self) -> dict:
        s, w = self.resolved["image"], "image"
        phantom = self._phantom(s["phantom"], f"{w}.phantom")
        return {
            "phantom": phantom,
            "lock": _q(s, "lock_detuning", "frequency", w, "GHz"),
            "nx": _num(s, "nx", w, integer=True),
            "ny": _num(s, "ny", w, integer=True),
            "step_um": _q(s, "step", "length", w, "um"),
            "spot_um": _q(s, "spot_diameter", "length", w, "um"),
            "dwell": None if s["dwell"] is None else _q(s, "dwell", "time", w),
            "states": self._states(s["states"], f"{w}.states"),
            "noise": _flag(s, "noise", w),
        }

    def scan_plan(self, source: LightSource, params: dict) -> ScanPlan:
        try:
            return ScanPlan(
                source=source,
                lock_detuning_ghz=params["lock"],
                nx=params["nx"],
                ny=params["ny"],
                step_um=params["step_um"],
                spot_diameter_um=params["spot_um"],
                dwell_s=params["dwell"],
                chain=self.chain,
                analyzer=self.analyzer,
                seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(f"image: {exc}") from None

    def viability_params(self) -> dict:
        s, w = self.resolved["viability"], "viability"
        target = s["target_material"]
        if target not in self.library:
            raise ConfigError(f"{w}.target_material: unknown material {target!r}")
        idx = _num(s, "target_resonance", w, integer=True)
        if not 0 <= idx < len(self.library[target].resonances):
            raise ConfigError(f"{w}.target_resonance: {target!r} has no resonance {idx}")
        if s["model"] is not None:
            m = s["model"]
            if not isinstance(m, Mapping) or set(m) - {"rate_k", "alpha"} or len(m) != 2:
                raise ConfigError(f"{w}.model: expected keys rate_k and alpha")
            try:
                model = DamageModel(_num(m, "rate_k", f"{w}.model"), _num(m, "alpha", f"{w}.model"), target, idx)
            except ValueError as exc:
                raise ConfigError(f"{w}.model: {exc}") from None
        else:
            pts = []
            for i, p in enumerate(s["calibration"] or []):
                pw = f"{w}.calibration[{i}]"
                if not isinstance(p, Mapping) or set(p) != {"power", "time", "viability"}:
                    raise ConfigError(f"{pw}: expected keys power, time, viability")
                pts.append((_q(p, "power", "power", pw, "mW"), _q(p, "time", "time", pw, "h"),
                            _num(p, "viability", pw)))
            try:
                model = calibrate_damage(pts, target, idx)
            except CalibrationError as exc:
                raise ConfigError(f"{w}.calibration: {exc}") from None
        conds = []
        for i, c in enumerate(s["conditions"] or []):
            cw = f"{w}.conditions[{i}]"
            if not isinstance(c, Mapping) or set(c) != {"label", "power", "state"}:
                raise ConfigError(f"{cw}: expected keys label, power, state")
            conds.append(Condition(str(c["label"]), _q(c, "power", "power", cw, "mW"),
                                   _state(c["state"], f"{cw}.state").value))
        if not conds:
            raise ConfigError(f"{w}.conditions: at least one condition is required")
        labels = [c.label for c in conds]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"{w}.conditions: labels must be unique")
        mix = _mixture(s["sample"], f"{w}.sample")
        self._check_mixture(mix, f"{w}.sample")
        horizon = _q(s, "horizon", "time", w, "h")
        interval = _q(s, "interval", "time", w, "h")
        if horizon <= 0 or interval <= 0:
            raise ConfigError(f"{w}.horizon: horizon and interval must be positive")
        avg = _num(s, "averages", w, integer=True)
        if avg < 1:
            raise ConfigError(f"{w}.averages: must be >= 1")
        return {
            "model": model,
            "conditions": conds,
            "horizon": horizon,
            "interval": interval,
            "probe_power": _q(s, "probe_power", "power", w),
            "sample": mix,
            "spectra": _flag(s, "spectra", w),
            "averages": avg,
        }

    def fit_params(self) -> dict:
        s, w = self.resolved["fit"], "fit"
        trace = s["trace"]
        if trace is not None and not isinstance(trace, str):
            raise ConfigError(f"{w}.trace: expected a file path")
        n = _num(s, "n_resonances", w, integer=True)
        if n < 1:
            raise ConfigError(f"{w}.n_resonances: must be >= 1")
        ratio = _num(s, "max_residual_ratio", w)
        if ratio <= 0:
            raise ConfigError(f"{w}.max_residual_ratio: must be positive")
        return {"trace": trace, "n_resonances": n, "max_residual_ratio": ratio}

    # -- helpers ------------------------------------------------------------

    @staticmethod
    def _choice(section, key, where, options):
        v = section[key]
        if v not in options:
            raise ConfigError(f"{where}.{key}: expected one of {', '.join(options)}, got {v!r}")
        return v

    def _states(self, value, where):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"{where}: expected a non-empty list")
        return [_state(v, f"{where}[{i}]") for i, v in enumerate(value)]

    def _check_mixture(self, mix: Mixture, where):
        for name in mix.weights:
            if name not in self.library:
                raise ConfigError(f"{where}: unknown material {name!r}")

    def _phantom(self, p, where) -> Phantom:
        if not isinstance(p, Mapping):
            raise ConfigError(f"{where}: expected a mapping")
        kind = p.get("kind")
        common = {"kind", "width", "height", "pitch"}
        allowed = common | ({"mixture"} if kind == "uniform" else {"background", "blob", "blobs"})
        if kind not in ("uniform", "spheroids"):
            raise ConfigError(f"{where}.kind: expected 'uniform' or 'spheroids', got {kind!r}")
        unknown = set(p) - allowed
        if unknown:
            raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown key")
        missing = allowed - set(p)
        if missing:
            raise ConfigError(f"{where}.{sorted(missing)[0]}: missing key")
        width = _num(p, "width", where, integer=True)
        height = _num(p, "height", where, integer=True)
        if width < 1 or height < 1:
            raise ConfigError(f"{where}.width: phantom must be at least 1x1")
        pitch = _q(p, "pitch", "length", where, "um")
        if pitch <= 0:
            raise ConfigError(f"{where}.pitch: must be positive")
        if kind == "uniform":
            mix = _mixture(p["mixture"], f"{where}.mixture")
            self._check_mixture(mix, f"{where}.mixture")
            return Phantom.uniform(mix, width, height, pitch)
        bg = _mixture(p["background"], f"{where}.background")
        blob = _mixture(p["blob"], f"{where}.blob")
        self._check_mixture(bg, f"{where}.background")
        self._check_mixture(blob, f"{where}.blob")
        blobs = []
        for i, b in enumerate(p["blobs"] or []):
            bw = f"{where}.blobs[{i}]"
            if not isinstance(b, Mapping) or set(b) != {"x", "y", "r"}:
                raise ConfigError(f"{bw}: expected keys x, y, r")
            blobs.append((_q(b, "x", "length", bw, "um"), _q(b, "y", "length", bw, "um"),
                          _q(b, "r", "length", bw, "um")))
        return spheroid_phantom(width, height, pitch, blobs, bg, blob)


def build_experiment(resolved: dict) -> Experiment:
    """Validate every section of a resolved config and build the typed view."""
    try:
        seed = resolved["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
        try:
            library = library_from_dict({"materials": resolved["materials"]})
        except MaterialError as exc:
            raise ConfigError(f"materials: {exc}") from None

        c, w = resolved["chain"], "chain"
        try:
            chain = DetectionChain(
                pump_mod_freq=_q(c, "pump_mod_freq", "frequency", w),
                probe_mod_freq=_q(c, "probe_mod_freq", "frequency", w),
                cmrr_db=_q(c, "cmrr", "ratio_db", w),
                electronic_noise_dbm=_q(c, "electronic_noise", "power_dbm", w),
                shot_ref_dbm=_q(c, "shot_noise_ref", "power_dbm", w),
                shot_ref_power=_q(c, "shot_noise_ref_power", "power", w),
                noise_ref_rbw=_q(c, "noise_ref_rbw", "frequency", w),
                sbs_ref_dbm=_q(c, "sbs_ref", "power_dbm", w),
                modulation_depth=_num(c, "modulation_depth", w),
                technical_noise_dbm_hz=_q(c, "technical_noise", "psd_dbm", w),
                pump_leakage=_num(c, "pump_leakage", w),
                rng_seed=seed,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{w}: {exc}") from None

        a, w = resolved["analyzer"], "analyzer"
        if a["mode"] not in ("swept", "zero_span"):
            raise ConfigError(f"{w}.mode: expected 'swept' or 'zero_span', got {a['mode']!r}")
        try:
            analyzer = AnalyzerSettings(
                rbw=_q(a, "rbw", "frequency", w),
                vbw=_q(a, "vbw", "frequency", w),
                start=_q(a, "start", "frequency", w),
                stop=_q(a, "stop", "frequency", w),
                points=_num(a, "points", w, integer=True),
                sweep_time=_q(a, "sweep_time", "time", w),
                zero_span=a["mode"] == "zero_span",
                center=_q(a, "center", "frequency", w),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{w}: {exc}") from None

        li, w = resolved["lockin"], "lockin"
        try:
            lockin = LockInSettings(
                time_constant=_q(li, "time_constant", "time", w),
                scan_rate=_q(li, "scan_rate", "frequency", w),
                detuning_grid_step=_q(li, "grid_step", "frequency", w),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{w}: {exc}") from None

        exp = Experiment(resolved, library, chain, analyzer, lockin)
        # touch every section so a bad field fails before anything runs
        exp.source()
        exp.source(state="squeezed")
        exp.spectrum_params()
        exp.gain_params()
        exp.scan_plan(exp.source(), exp.image_params())
        exp.viability_params()
        exp.fit_params()
        return exp
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
