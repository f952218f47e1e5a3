"""Recover Brillouin resonances from a lock-in detuning scan.

The fit model is the forward spectral model scaled into trace units: each
resonance contributes a gain Lorentzian at ``+shift`` and a loss Lorentzian
at ``-shift``, and an absorptive Lorentzian sits at zero detuning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from .materials import BrillouinResonance, MaterialError, lorentzian
from .traces import SpectrumTrace


class FitError(RuntimeError):
    """The optimiser failed or converged to a model that does not describe the data."""


@dataclass(frozen=True)
class FitResult:
    resonances: tuple[BrillouinResonance, ...]
    rayleigh_strength: float
    rayleigh_width_mhz: float
    residual_norm: float
    residual_rms: float
    noise_estimate: float
    amplitude_scale: float
    success: bool = True

    def as_dict(self) -> dict:
        return {
            "resonances": [
                {"shift_ghz": r.shift_ghz, "linewidth_mhz": r.linewidth_mhz, "gain_strength": r.gain_strength}
                for r in self.resonances
            ],
            "rayleigh_strength": self.rayleigh_strength,
            "rayleigh_width_mhz": self.rayleigh_width_mhz,
            "residual_norm": self.residual_norm,
            "residual_rms": self.residual_rms,
            "noise_estimate": self.noise_estimate,
            "amplitude_scale": self.amplitude_scale,
        }


def _model(params, delta, n):
    out = np.zeros_like(delta)
    for k in range(n):
        shift, width, amp = params[3 * k: 3 * k + 3]
        out += amp * (lorentzian(delta, shift, width) - lorentzian(delta, -shift, width))
    ray_amp, ray_width = params[3 * n: 3 * n + 2]
    return out - ray_amp * lorentzian(delta, 0.0, ray_width)


def _noise_estimate(y):
    # first differences remove the smooth spectrum; MAD keeps peaks from leaking in
    d = np.diff(y)
    return 1.4826 * float(np.median(np.abs(d - np.median(d)))) / math.sqrt(2.0)


def _initial_peaks(delta, y, n, min_sep):
    pos = delta > min_sep
    if pos.sum() < 3:
        raise FitError("trace has too few points at positive detuning")
    d, v = delta[pos], y[pos]
    step = float(np.median(np.diff(d)))
    idx, props = signal.find_peaks(v, prominence=0.0, distance=max(1, int(round(0.15 / step))))
    order = np.argsort(props["prominences"])[::-1]
    return [float(d[i]) for i in idx[order][:n]], [float(v[i]) for i in idx[order][:n]]


def _solve(delta, y, p0, n, width_max):
    lo, hi = [], []
    for _ in range(n):
        lo += [1e-3, 1e-3, 0.0]
        hi += [float(np.max(np.abs(delta))) * 1.5, width_max, np.inf]
    lo += [0.0, 1e-3]
    hi += [np.inf, width_max]
    p0 = np.clip(p0, np.array(lo) + 1e-12, np.where(np.isinf(hi), np.abs(p0) * 10 + 1, np.array(hi) - 1e-12))
    return optimize.least_squares(
        lambda p: _model(p, delta, n) - y,
        p0,
        bounds=(lo, hi),
        x_scale="jac",
        xtol=1e-12,
        ftol=1e-12,
        gtol=1e-12,
        max_nfev=4000,
    )


def fit_spectrum(
    trace: SpectrumTrace,
    n_resonances: int = 1,
    amplitude_scale: float | None = None,
    max_residual_ratio: float = 3.0,
) -> FitResult:
    """Least-squares fit of ``n_resonances`` Brillouin lines plus the Rayleigh dip.

    Detuning must be in GHz. Strengths are returned relative to
    ``amplitude_scale`` (trace units per unit gain), read from the trace's
    ``unit_gain_amplitude_uv`` metadata when not given.

    Starting values come from peak picking on the positive-detuning side;
    when fewer peaks than requested are visible, extra lines are seeded at
    the largest residual of the smaller fit. A result whose residual RMS
    exceeds ``max_residual_ratio`` times the estimated point noise raises
    :class:`FitError`.
    """
    if n_resonances < 1:
        raise ValueError("n_resonances must be >= 1")
    if trace.axis_unit != "GHz":
        raise ValueError(f"expected a detuning axis in GHz, got {trace.axis_unit}")
    delta = trace.axis
    y = trace.values
    if amplitude_scale is None:
        amplitude_scale = float(trace.metadata.get("unit_gain_amplitude_uv", 1.0))
    if amplitude_scale <= 0:
        raise ValueError("amplitude_scale must be positive")
    span = float(delta.max() - delta.min())
    width_max = max(0.05, span / 4)

    noise = _noise_estimate(y)
    sigma_meta = float(trace.metadata.get("noise_sigma_uv", 0.0) or 0.0)
    ref = max(noise, sigma_meta, 1e-6 * float(np.max(np.abs(y))))

    shifts, heights = _initial_peaks(delta, y, n_resonances, min_sep=0.3)
    if not shifts:
        raise FitError("no gain peak found at positive detuning")
    if max(heights) < 5.0 * ref:
        raise FitError(f"no significant gain peak: largest is {max(heights):.3g}, noise {ref:.3g}")
    center = np.abs(delta) < 0.3
    ray0 = max(0.0, -float(y[center].min())) if center.any() else 0.0

    def params_for(sh, ht):
        p = []
        for s, h in zip(sh, ht):
            p += [s, 0.3, max(h, 1e-12)]
        return np.array(p + [ray0 + 1e-12, 0.2])

    sh, ht = list(shifts), list(heights)
    sol = _solve(delta, y, params_for(sh, ht), len(sh), width_max)
    while len(sh) < n_resonances:
        resid = y - _model(sol.x, delta, len(sh))
        pos = delta > 0.3
        i = int(np.argmax(np.where(pos, resid, -np.inf)))
        sh.append(float(delta[i]))
        ht.append(float(resid[i]))
        p0 = np.concatenate([sol.x[: 3 * (len(sh) - 1)], [sh[-1], 0.3, max(ht[-1], 1e-12)], sol.x[-2:]])
        sol = _solve(delta, y, p0, len(sh), width_max)

    if not sol.success:
        raise FitError(f"optimiser did not converge: {sol.message}")
    resid = sol.fun
    rms = float(np.sqrt(np.mean(resid**2)))
    if rms > max_residual_ratio * ref:
        raise FitError(
            f"fit diverged: residual RMS {rms:.3g} is {rms / ref:.1f}x the noise level {ref:.3g}"
        )

    p = sol.x
    lines = []
    for k in range(n_resonances):
        shift, width, amp = p[3 * k: 3 * k + 3]
        try:
            lines.append(BrillouinResonance(float(shift), float(width) * 1e3, float(amp) / amplitude_scale))
        except MaterialError as exc:
            raise FitError(f"fitted resonance {k} is unphysical: {exc}") from None
    lines.sort(key=lambda r: r.shift_ghz)
    return FitResult(
        resonances=tuple(lines),
        rayleigh_strength=float(p[-2]) / amplitude_scale,
        rayleigh_width_mhz=float(p[-1]) * 1e3,
        residual_norm=float(np.linalg.norm(resid)),
        residual_rms=rms,
        noise_estimate=ref,
        amplitude_scale=amplitude_scale,
    )
