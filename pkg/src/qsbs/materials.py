"""Materials and their deterministic SBS spectral response.

Detuning, shifts and widths are handled in GHz throughout this module. The
response of a material at pump-probe detuning ``delta`` is a Lorentzian gain
peak at ``+shift``, a mirrored loss dip at ``-shift`` and an absorptive
Rayleigh dip centred on zero detuning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml

from .units import UnitError, parse_quantity

DEFAULT_LINEWIDTH_MHZ = 300.0
DEFAULT_LIBRARY = Path(__file__).with_name("data") / "materials.yaml"


class MaterialError(ValueError):
    """Invalid material definition, mixture or lookup."""


def _finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise MaterialError(f"non-finite input {v!r}")


def lorentzian(delta, shift, linewidth):
    """Peak-normalised Lorentzian with full width at half maximum ``linewidth``.

    All three arguments share one frequency unit. Returns 1 at
    ``delta == shift`` and 1/2 at ``shift +/- linewidth/2``.
    """
    _finite(delta, shift, linewidth)
    if np.any(np.asarray(linewidth) <= 0):
        raise MaterialError("linewidth must be positive")
    hw2 = (0.5 * np.asarray(linewidth, dtype=float)) ** 2
    x = np.asarray(delta, dtype=float) - shift
    out = hw2 / (x * x + hw2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BrillouinResonance:
    shift_ghz: float
    linewidth_mhz: float = DEFAULT_LINEWIDTH_MHZ
    gain_strength: float = 1.0

    def __post_init__(self):
        _finite(self.shift_ghz, self.linewidth_mhz, self.gain_strength)
        if self.shift_ghz <= 0:
            raise MaterialError(f"shift must be positive, got {self.shift_ghz} GHz")
        if self.linewidth_mhz <= 0:
            raise MaterialError(f"linewidth must be positive, got {self.linewidth_mhz} MHz")
        if self.gain_strength < 0:
            raise MaterialError("gain_strength must be >= 0")
        if self.linewidth_mhz * 1e-3 >= self.shift_ghz:
            raise MaterialError("linewidth must be smaller than the shift")

    @property
    def linewidth_ghz(self) -> float:
        return self.linewidth_mhz * 1e-3


@dataclass(frozen=True)
class MaterialSpec:
    name: str
    resonances: tuple[BrillouinResonance, ...]
    rayleigh_strength: float = 0.0
    rayleigh_width_mhz: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "resonances", tuple(self.resonances))
        if not self.name:
            raise MaterialError("material needs a name")
        if not self.resonances:
            raise MaterialError(f"material {self.name!r} needs at least one resonance")
        shifts = [r.shift_ghz for r in self.resonances]
        if any(b <= a for a, b in zip(shifts, shifts[1:])):
            raise MaterialError(f"resonance shifts of {self.name!r} must be strictly increasing")
        _finite(self.rayleigh_strength, self.rayleigh_width_mhz)
        if self.rayleigh_strength < 0:
            raise MaterialError("rayleigh_strength must be >= 0")
        if self.rayleigh_width_mhz <= 0:
            raise MaterialError("rayleigh_width must be positive")

    def response(self, delta_ghz):
        """Signed response of the pure material (weight 1)."""
        delta = np.asarray(delta_ghz, dtype=float)
        out = np.zeros_like(delta)
        for res in self.resonances:
            gain = lorentzian(delta, res.shift_ghz, res.linewidth_ghz)
            loss = lorentzian(delta, -res.shift_ghz, res.linewidth_ghz)
            out = out + res.gain_strength * (gain - loss)
        if self.rayleigh_strength > 0:
            out = out - self.rayleigh_strength * lorentzian(
                delta, 0.0, self.rayleigh_width_mhz * 1e-3
            )
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Mixture:
    """Composition of one sample volume; weights not summing to 1 leave vacuum."""

    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        w = {str(k): float(v) for k, v in dict(self.weights).items()}
        for name, v in w.items():
            if not math.isfinite(v) or v < 0 or v > 1:
                raise MaterialError(f"weight of {name!r} must lie in [0, 1], got {v}")
        if sum(w.values()) > 1 + 1e-9:
            raise MaterialError(f"mixture weights sum to {sum(w.values())} > 1")
        object.__setattr__(self, "weights", dict(sorted(w.items())))

    def __hash__(self):
        return hash(tuple(self.weights.items()))

    @classmethod
    def pure(cls, name: str) -> "Mixture":
        return cls({name: 1.0})

    def scaled(self, alpha: float) -> "Mixture":
        return Mixture({k: alpha * v for k, v in self.weights.items()})


class MaterialLibrary:
    """Immutable registry of materials by name.

    The library also remembers illumination exposure applied through
    :mod:`qsbs.photodamage`, so damaged strengths are always recomputed from
    the pristine values rather than multiplied step by step.
    """

    def __init__(self, materials: Iterable[MaterialSpec], exposure=None, pristine=None):
        mats = {}
        for m in materials:
            if m.name in mats:
                raise MaterialError(f"duplicate material {m.name!r}")
            mats[m.name] = m
        self._materials = mats
        self._pristine = dict(pristine) if pristine is not None else dict(mats)
        # (material, resonance index) -> {(k, alpha, power_mw): hours}
        self._exposure = {k: dict(v) for k, v in (exposure or {}).items()}

    def __getitem__(self, name: str) -> MaterialSpec:
        try:
            return self._materials[name]
        except KeyError:
            raise MaterialError(f"unknown material {name!r}") from None

    def __contains__(self, name) -> bool:
        return name in self._materials

    def __iter__(self):
        return iter(self._materials.values())

    def __len__(self):
        return len(self._materials)

    def names(self) -> list[str]:
        return list(self._materials)

    def pristine(self, name: str) -> MaterialSpec:
        return self._pristine[name]

    def exposure(self, name: str, index: int) -> dict:
        return dict(self._exposure.get((name, index), {}))

    def with_material(self, material: MaterialSpec) -> "MaterialLibrary":
        mats = dict(self._materials)
        mats[material.name] = material
        pristine = dict(self._pristine)
        pristine[material.name] = material
        exposure = {k: v for k, v in self._exposure.items() if k[0] != material.name}
        return MaterialLibrary(mats.values(), exposure, pristine)

    def _with_exposure(self, name, index, exposure, strength) -> "MaterialLibrary":
        mat = self[name]
        res = list(mat.resonances)
        res[index] = replace(res[index], gain_strength=strength)
        mats = dict(self._materials)
        mats[name] = replace(mat, resonances=tuple(res))
        exp = {k: dict(v) for k, v in self._exposure.items()}
        exp[(name, index)] = exposure
        return MaterialLibrary(mats.values(), exp, self._pristine)

    def validate(self, mixture: Mixture) -> None:
        for name in mixture.weights:
            self[name]


def material_response(library: MaterialLibrary, mixture: Mixture, delta_ghz):
    """Signed SBS response of ``mixture`` at detuning ``delta_ghz`` (GHz).

    Positive lobes are Stokes gain, negative lobes anti-Stokes loss and the
    absorptive Rayleigh dip. Scalar in, scalar out; arrays broadcast.
    """
    _finite(delta_ghz)
    library.validate(mixture)
    delta = np.asarray(delta_ghz, dtype=float)
    out = np.zeros_like(delta)
    for name, w in mixture.weights.items():
        if w:
            out = out + w * library[name].response(delta)
    return float(out) if out.ndim == 0 else out


def _quantity(entry, key, dimension, unit_scale, default=None, where=""):
    if key not in entry:
        if default is None:
            raise MaterialError(f"{where}: missing {key!r}")
        return default
    try:
        return parse_quantity(entry[key], dimension) / unit_scale
    except UnitError as exc:
        raise MaterialError(f"{where}.{key}: {exc}") from None


_MATERIAL_KEYS = {"resonances", "rayleigh_strength", "rayleigh_width"}
_RESONANCE_KEYS = {"shift", "linewidth", "gain_strength"}


def library_from_dict(data: Mapping) -> MaterialLibrary:
    """Build a library from the parsed ``materials:`` mapping of a library file."""
    if not isinstance(data, Mapping) or "materials" not in data:
        raise MaterialError("material library must have a top-level 'materials' mapping")
    extra = set(data) - {"materials"}
    if extra:
        raise MaterialError(f"unknown top-level keys in material library: {sorted(extra)}")
    mats = []
    for name, entry in data["materials"].items():
        where = f"materials.{name}"
        if not isinstance(entry, Mapping):
            raise MaterialError(f"{where}: expected a mapping")
        unknown = set(entry) - _MATERIAL_KEYS
        if unknown:
            raise MaterialError(f"{where}: unknown keys {sorted(unknown)}")
        resonances = []
        for i, r in enumerate(entry.get("resonances") or []):
            rwhere = f"{where}.resonances[{i}]"
            unknown = set(r) - _RESONANCE_KEYS
            if unknown:
                raise MaterialError(f"{rwhere}: unknown keys {sorted(unknown)}")
            g = r.get("gain_strength", 1.0)
            if isinstance(g, bool) or not isinstance(g, (int, float)):
                raise MaterialError(f"{rwhere}.gain_strength: expected a number")
            resonances.append(
                BrillouinResonance(
                    shift_ghz=_quantity(r, "shift", "frequency", 1e9, where=rwhere),
                    linewidth_mhz=_quantity(
                        r, "linewidth", "frequency", 1e6, DEFAULT_LINEWIDTH_MHZ, rwhere
                    ),
                    gain_strength=float(g),
                )
            )
        ray = entry.get("rayleigh_strength", 0.0)
        if isinstance(ray, bool) or not isinstance(ray, (int, float)):
            raise MaterialError(f"{where}.rayleigh_strength: expected a number")
        mats.append(
            MaterialSpec(
                name=str(name),
                resonances=tuple(resonances),
                rayleigh_strength=float(ray),
                rayleigh_width_mhz=_quantity(entry, "rayleigh_width", "frequency", 1e6, 200.0, where),
            )
        )
    return MaterialLibrary(mats)


def load_library(path=None) -> MaterialLibrary:
    path = Path(path) if path is not None else DEFAULT_LIBRARY
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return library_from_dict(data)
