"""Illumination-dose damage of live samples and viability curves.

Viability of the targeted resonance after ``t`` hours at pump power ``P``
(mW) follows ``V = exp(-k * P**alpha * t)``. Two endpoints with distinct
powers fix ``k`` and ``alpha`` exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .detection import DetectionChain, LockInSettings, lockin_scan
from .materials import MaterialError, MaterialLibrary, Mixture
from .quantum_light import LightSource

log = logging.getLogger(__name__)


class CalibrationError(ValueError):
    """Calibration points do not determine the damage model."""


@dataclass(frozen=True)
class DamageModel:
    rate_k: float
    power_exponent_alpha: float
    target_material: str = "cell_spheroid"
    target_resonance: int = 1

    def __post_init__(self):
        if not math.isfinite(self.rate_k) or self.rate_k < 0:
            raise ValueError("rate_k must be >= 0")
        if not math.isfinite(self.power_exponent_alpha) or self.power_exponent_alpha <= 0:
            raise ValueError("power_exponent_alpha must be > 0")

    def rate(self, power_mw: float) -> float:
        """Decay rate in 1/h at ``power_mw``."""
        if power_mw < 0:
            raise ValueError("power must be >= 0")
        return self.rate_k * power_mw**self.power_exponent_alpha

    def viability(self, power_mw, hours):
        p = np.asarray(power_mw, dtype=float)
        t = np.asarray(hours, dtype=float)
        if np.any(p < 0) or np.any(t < 0):
            raise ValueError("power and time must be >= 0")
        out = np.exp(-self.rate_k * p**self.power_exponent_alpha * t)
        return float(out) if out.ndim == 0 else out


def calibrate_damage(points, target_material="cell_spheroid", target_resonance=1) -> DamageModel:
    """Fit ``(k, alpha)`` to ``(power_mw, hours, viability)`` points.

    Linear least squares on ``log(-log V) - log t = log k + alpha log P``.
    Two points with distinct powers give the exact solution. Points with
    ``V == 1`` carry no decay information; if every point has ``V == 1`` the
    model has ``k = 0``.
    """
    pts = [(float(p), float(t), float(v)) for p, t, v in points]
    if not pts:
        raise CalibrationError("no calibration points")
    for p, t, v in pts:
        if p < 0 or t < 0 or not 0 < v <= 1:
            raise CalibrationError(f"invalid calibration point {(p, t, v)}")
    decaying = [(p, t, v) for p, t, v in pts if v < 1]
    if not decaying:
        return DamageModel(0.0, 1.0, target_material, target_resonance)
    if len(decaying) < len(pts):
        log.warning("ignoring %d calibration points with viability 1", len(pts) - len(decaying))
    for p, t, v in decaying:
        if p == 0 or t == 0:
            raise CalibrationError(f"viability {v} < 1 at zero dose is inconsistent with the model")
    powers = {p for p, _, _ in decaying}
    if len(powers) < 2:
        raise CalibrationError("at least two distinct powers are needed to determine alpha")
    logp = np.array([math.log(p) for p, _, _ in decaying])
    y = np.array([math.log(-math.log(v)) - math.log(t) for _, t, v in decaying])
    if len(decaying) == 2:
        # exact two-point solution, avoids lstsq rounding
        alpha = (y[0] - y[1]) / (logp[0] - logp[1])
        logk = y[0] - alpha * logp[0]
    else:
        A = np.column_stack([np.ones_like(logp), logp])
        (logk, alpha), *_ = np.linalg.lstsq(A, y, rcond=None)
    if alpha <= 0:
        raise CalibrationError(f"fitted power exponent {alpha:.3g} is not positive")
    return DamageModel(math.exp(logk), float(alpha), target_material, target_resonance)


def apply_dose(library: MaterialLibrary, model: DamageModel, power_mw: float, hours: float) -> MaterialLibrary:
    """Library with the target resonance weakened by illumination.

    Exposure is accumulated per power level and the strength recomputed from
    the pristine value, so splitting a dose into parts gives the same result
    as applying it at once.
    """
    if power_mw < 0 or hours < 0:
        raise ValueError("power and duration must be >= 0")
    name, idx = model.target_material, model.target_resonance
    mat = library[name]
    if not 0 <= idx < len(mat.resonances):
        raise MaterialError(f"material {name!r} has no resonance {idx}")
    if hours == 0:
        return library
    exposure = library.exposure(name, idx)
    key = (model.rate_k, model.power_exponent_alpha, float(power_mw))
    exposure[key] = exposure.get(key, 0.0) + float(hours)
    exponent = sum(k * p**a * t for (k, a, p), t in sorted(exposure.items()))
    pristine = library.pristine(name).resonances[idx].gain_strength
    return library._with_exposure(name, idx, exposure, pristine * math.exp(-exponent))


@dataclass(frozen=True)
class Condition:
    label: str
    power_mw: float
    state: str = "coherent"


@dataclass
class ViabilityCurve:
    label: str
    power_mw: float
    times: np.ndarray
    values: np.ndarray
    spectra: list | None = None


def viability_experiment(
    model: DamageModel,
    conditions,
    horizon_h: float = 3.0,
    sample_interval_h: float = 1.0,
    library: MaterialLibrary | None = None,
    chain: DetectionChain | None = None,
    probe_power: float = 900e-6,
    sample: Mixture | None = None,
    detuning_range=(-7.0, 7.0),
    lockin: LockInSettings | None = None,
    averages: int = 10,
    seed: int = 0,
    source_overrides: dict | None = None,
) -> list[ViabilityCurve]:
    """Viability versus time for each illumination condition.

    When ``library`` is given, each sample time also yields a lock-in
    spectrum of ``sample`` with the damaged target peak, averaged over
    ``averages`` traces. Spectra of condition ``i`` at sample ``j`` use seed
    ``seed + 1000 * i + j``.
    """
    if horizon_h <= 0 or sample_interval_h <= 0:
        raise ValueError("horizon and sample interval must be positive")
    n = int(math.floor(horizon_h / sample_interval_h + 1e-9))
    times = sample_interval_h * np.arange(n + 1)
    curves = []
    for i, cond in enumerate(conditions):
        values = np.array([model.viability(cond.power_mw, t) for t in times])
        spectra = None
        if library is not None:
            spectra = []
            chain = chain or DetectionChain()
            sample = sample or Mixture({"cell_spheroid": 0.5, "water": 0.5})
            kw = dict(source_overrides or {})
            if cond.state == "squeezed":
                src = LightSource.twin_beams(probe_power, cond.power_mw * 1e-3, **kw)
            else:
                src = LightSource.coherent(probe_power, cond.power_mw * 1e-3)
            lib = library
            for j, t in enumerate(times):
                # doses are applied as increments so the library carries the history
                if j:
                    lib = apply_dose(lib, model, cond.power_mw, float(times[j] - times[j - 1]))
                spectra.append(
                    lockin_scan(chain, src, lib, sample, detuning_range, lockin,
                                seed=seed + 1000 * i + j, averages=averages)
                )
        curves.append(ViabilityCurve(cond.label, cond.power_mw, times, values, spectra))
    return curves
