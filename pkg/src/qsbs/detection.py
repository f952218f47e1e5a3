"""Balanced detection, spectrum-analyzer and lock-in emulation.

Electrical quantities are expressed in units where a squared amplitude is a
power in mW at the analyzer input, so a sinusoid of RMS amplitude ``a`` reads
``a**2`` mW. The whole scale is anchored to one measured point: coherent
light with 700 uW probe power gives -67 dBm of shot noise in a 10 kHz
resolution bandwidth. The SBS tone scale is anchored separately by
``sbs_ref_dbm``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .materials import MaterialLibrary, Mixture, material_response
from .quantum_light import LightSource, noise_budget
from .traces import SpectrumTrace

# 1/e^2 -> -3 dB conversion of a Gaussian filter: noise bandwidth / 3 dB bandwidth
GAUSSIAN_NBW_FACTOR = math.sqrt(math.pi) / (2.0 * math.sqrt(math.log(2.0)))
PHOTON_ENERGY_J = 6.62607015e-34 * 299792458.0 / 795e-9
LOAD_OHMS = 50.0
MIN_GRID_STEP_HZ = 40e6


class AliasingError(ValueError):
    """Sample rate too low for the signal band."""


class AnalyzerRangeError(ValueError):
    """Requested span lies outside what the input can provide."""


@dataclass(frozen=True)
class DetectionChain:
    pump_mod_freq: float = 300e3
    probe_mod_freq: float = 400e3
    cmrr_db: float = 26.0
    electronic_noise_dbm: float = -81.0
    shot_ref_dbm: float = -67.0
    shot_ref_power: float = 700e-6
    noise_ref_rbw: float = 10e3
    # 700 kHz tone power for unit gain at 1 mW pump and 1 mW probe
    sbs_ref_dbm: float = -75.2
    modulation_depth: float = 0.1
    technical_noise_dbm_hz: float = -110.0
    pump_leakage: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.pump_mod_freq <= 0 or self.probe_mod_freq <= 0:
            raise ValueError("modulation frequencies must be positive")
        if self.pump_mod_freq == self.probe_mod_freq:
            raise ValueError("pump and probe must be modulated at distinct frequencies")
        if self.cmrr_db < 0:
            raise ValueError("cmrr_db must be >= 0")
        if not 0 < self.modulation_depth <= 1:
            raise ValueError("modulation_depth must lie in (0, 1]")
        if self.shot_ref_power <= 0 or self.noise_ref_rbw <= 0:
            raise ValueError("noise calibration references must be positive")
        if self.pump_leakage < 0:
            raise ValueError("pump_leakage must be >= 0")

    @property
    def signal_freq(self) -> float:
        return self.pump_mod_freq + self.probe_mod_freq

    @property
    def detector_gain(self) -> float:
        """RMS tone amplitude (sqrt(mW)) per unit gain per W^2 of pump x probe."""
        return math.sqrt(10.0 ** (self.sbs_ref_dbm / 10.0)) / 1e-6

    @property
    def shot_psd_per_watt(self) -> float:
        """Balanced coherent shot-noise PSD (mW/Hz) per W of probe power."""
        nbw = GAUSSIAN_NBW_FACTOR * self.noise_ref_rbw
        return 10.0 ** (self.shot_ref_dbm / 10.0) / nbw / self.shot_ref_power

    @property
    def electronic_psd(self) -> float:
        return 10.0 ** (self.electronic_noise_dbm / 10.0) / (GAUSSIAN_NBW_FACTOR * self.noise_ref_rbw)

    @property
    def imbalance(self) -> float:
        return 10.0 ** (-self.cmrr_db / 20.0)

    @property
    def responsivity(self) -> float:
        """Electrical amplitude per optical W, fixed by the shot-noise anchor.

        For a photocurrent ``i`` the shot-noise PSD relative to ``i**2`` is
        ``2 h nu / P``; matching the anchor PSD fixes the scale.
        """
        total = 2.0 * self.shot_ref_power
        return math.sqrt(self.shot_psd_per_watt * self.shot_ref_power / (2.0 * PHOTON_ENERGY_J * total))


@dataclass(frozen=True)
class AnalyzerSettings:
    rbw: float = 10e3
    vbw: float = 10.0
    start: float = 625e3
    stop: float = 775e3
    points: int = 601
    sweep_time: float = 1.0
    zero_span: bool = False
    center: float = 700e3

    def __post_init__(self):
        if self.rbw <= 0 or self.vbw <= 0:
            raise ValueError("rbw and vbw must be positive")
        if self.vbw > self.rbw:
            raise ValueError("vbw must not exceed rbw")
        if self.points < 2:
            raise ValueError("an analyzer trace needs at least 2 points")
        if self.sweep_time <= 0:
            raise ValueError("sweep_time must be positive")
        if not self.zero_span and not 0 <= self.start < self.stop:
            raise ValueError("swept mode needs 0 <= start < stop")

    @classmethod
    def zero_span_default(cls, center=700e3) -> "AnalyzerSettings":
        return cls(rbw=3e3, vbw=300.0, sweep_time=2.0e-3, zero_span=True, center=center, points=401)

    @property
    def noise_bandwidth(self) -> float:
        return GAUSSIAN_NBW_FACTOR * self.rbw

    @property
    def averages(self) -> float:
        """Independent power samples averaged per displayed point."""
        return max(1.0, self.rbw / self.vbw)

    def frequencies(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class LockInSettings:
    time_constant: float = 0.3
    scan_rate: float = 0.02
    detuning_grid_step: float = MIN_GRID_STEP_HZ
    min_grid_step: float = MIN_GRID_STEP_HZ

    def __post_init__(self):
        if self.time_constant <= 0:
            raise ValueError("time_constant must be positive")
        if self.scan_rate <= 0:
            raise ValueError("scan_rate must be positive")
        if self.detuning_grid_step < self.min_grid_step:
            raise ValueError(
                f"detuning step {self.detuning_grid_step / 1e6:g} MHz is below the "
                f"{self.min_grid_step / 1e6:g} MHz hardware floor"
            )

    @property
    def enbw(self) -> float:
        """Equivalent noise bandwidth of a first-order RC low-pass (Hz)."""
        return 1.0 / (4.0 * self.time_constant)


def sbs_signal_amplitude(chain: DetectionChain, gain, pump_power, probe_power):
    """Signed RMS amplitude (sqrt(mW)) of the sum-frequency SBS tone.

    Powers in W. Linear in each of gain, pump power and probe power.
    """
    if np.any(np.asarray(pump_power) < 0) or np.any(np.asarray(probe_power) < 0):
        raise ValueError("powers must be >= 0")
    return chain.detector_gain * gain * pump_power * probe_power


def signal_power_mw(chain: DetectionChain, gain, pump_power, probe_power):
    return sbs_signal_amplitude(chain, gain, pump_power, probe_power) ** 2


def shot_noise_dbm(probe_power: float, rbw: float, chain: DetectionChain | None = None) -> float:
    """Coherent shot-noise power in the analyzer bandwidth ``rbw``."""
    if probe_power <= 0 or rbw <= 0:
        raise ValueError("probe_power and rbw must be positive")
    chain = chain or DetectionChain()
    psd = chain.shot_psd_per_watt * probe_power
    return 10.0 * math.log10(psd * GAUSSIAN_NBW_FACTOR * rbw)


def noise_psd(chain: DetectionChain, source: LightSource, include_electronic=True) -> float:
    """Balanced-output noise PSD (mW/Hz) at the signal frequency."""
    nb = noise_budget(source, chain.signal_freq)
    shot = chain.shot_psd_per_watt * source.probe_power
    eps = chain.imbalance
    tech = 10.0 ** (chain.technical_noise_dbm_hz / 10.0) * eps**2
    # symmetric imbalance leaks a quarter of eps^2 of the sum-mode noise
    psd = shot * (nb.relative_noise_power + 0.25 * eps**2 * nb.sum_noise_power) + tech
    if include_electronic:
        psd += chain.electronic_psd
    return psd


def analytic_snr_db(
    chain: DetectionChain,
    source: LightSource,
    library: MaterialLibrary,
    mixture: Mixture,
    lock_detuning_ghz: float,
    rbw: float = 10e3,
) -> float:
    """Closed-form SNR of the sum-frequency tone in an analyzer bin of ``rbw``.

    Returns ``-inf`` for a vanishing signal; callers that need an image
    contrast clamp with :func:`contrast_db`.
    """
    gain = material_response(library, mixture, lock_detuning_ghz)
    return snr_db_from_gain(chain, source, gain, rbw)


def snr_db_from_gain(chain, source, gain, rbw=10e3):
    sig = signal_power_mw(chain, np.asarray(gain, dtype=float), source.pump_power, source.probe_power)
    noise = noise_psd(chain, source) * GAUSSIAN_NBW_FACTOR * rbw
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(sig / noise)
    return float(out) if np.ndim(out) == 0 else out


def contrast_db(snr_db):
    """Image contrast: negative SNR is noise, so it is shown as 0 dB."""
    return np.maximum(0.0, snr_db)


def sample_snr_estimate(snr_linear, averages, rng, floor_averages=None):
    """Draw analyzer-style SNR estimates around a true linear SNR.

    Models what a peak-minus-floor read-out sees: the noise part of the peak
    bin and of the floor estimate are Gamma distributed with ``averages``
    degrees of freedom, and tone x noise beating adds a Gaussian term.
    """
    x = np.asarray(snr_linear, dtype=float)
    k = float(averages)
    kf = float(floor_averages or averages)
    g_peak = rng.gamma(k, 1.0 / k, size=x.shape)
    g_floor = rng.gamma(kf, 1.0 / kf, size=x.shape)
    z = rng.standard_normal(size=x.shape)
    return snr_estimate_from_draws(x, k, g_peak, g_floor, z)


def snr_estimate_from_draws(snr_linear, averages, g_peak, g_floor, z):
    """Deterministic core of :func:`sample_snr_estimate`.

    For fixed draws the estimate is increasing in ``snr_linear`` wherever it
    exceeds 1, which keeps paired squeezed/coherent comparisons ordered.
    """
    x = np.asarray(snr_linear, dtype=float)
    peak = x + g_peak + np.sqrt(2.0 * x / float(averages)) * z
    return (peak - g_floor) / g_floor


# --------------------------------------------------------------------------
# time-domain synthesis


@dataclass
class DetectorRecord:
    """Raw outputs of the two photodiodes plus post-subtraction electronic noise."""

    probe: np.ndarray
    reference: np.ndarray
    electronic: np.ndarray
    sample_rate: float
    metadata: dict = field(default_factory=dict)

    def balanced(self, cmrr_db: float) -> np.ndarray:
        eps = 10.0 ** (-cmrr_db / 20.0)
        return (1.0 + 0.5 * eps) * self.probe - (1.0 - 0.5 * eps) * self.reference + self.electronic

    @property
    def duration(self) -> float:
        return self.probe.size / self.sample_rate


def synthesize_photocurrents(
    chain: DetectionChain,
    source: LightSource,
    gain: float,
    duration: float = 0.05,
    sample_rate: float = 4e6,
    seed: int | None = None,
    common_mode_tones=(),
    max_samples: int = 20_000_000,
) -> DetectorRecord:
    """Synthesize the two detector outputs for a fixed lock detuning.

    ``gain`` is the signed material response at the lock detuning.
    ``common_mode_tones`` is a sequence of ``(freq_hz, power_dbm)`` injected
    identically on both detectors. The result is fully determined by
    ``seed`` (``chain.rng_seed`` when omitted).
    """
    if sample_rate <= 4.0 * chain.signal_freq:
        raise AliasingError(
            f"sample rate {sample_rate:g} Hz must exceed 4x the {chain.signal_freq:g} Hz signal"
        )
    n = int(round(duration * sample_rate))
    if n < 16:
        raise ValueError("duration too short")
    if n > max_samples:
        raise MemoryError(f"{n} samples exceed the {max_samples} sample budget")
    rng = np.random.default_rng(chain.rng_seed if seed is None else seed)
    t = np.arange(n) / sample_rate
    m = chain.modulation_depth
    c1 = np.cos(2 * np.pi * chain.pump_mod_freq * t)
    c2 = np.cos(2 * np.pi * chain.probe_mod_freq * t)
    rho = chain.responsivity

    probe = rho * source.probe_power * (1.0 + m * c2)
    reference = rho * source.conjugate_power * (1.0 + m * c2)

    # SBS product on the probe; the sum-frequency part reaches the balanced
    # output with RMS amplitude A after the (1 + eps/2) probe-arm weighting
    amp = sbs_signal_amplitude(chain, gain, source.pump_power, source.probe_power)
    if amp != 0:
        b = 2.0 * math.sqrt(2.0) * amp / m**2 / (1.0 + 0.5 * chain.imbalance)
        probe = probe + b * (1.0 + m * c1) * (1.0 + m * c2)

    if chain.pump_leakage > 0:
        probe = probe + rho * chain.pump_leakage * source.pump_power * (1.0 + m * c1)

    nb = noise_budget(source, chain.signal_freq)
    shot = chain.shot_psd_per_watt * source.probe_power
    diff = rng.standard_normal(n) * math.sqrt(shot * nb.relative_noise_power * sample_rate / 2.0)
    summ = rng.standard_normal(n) * math.sqrt(shot * nb.sum_noise_power * sample_rate / 2.0)
    probe = probe + 0.5 * (summ + diff)
    reference = reference + 0.5 * (summ - diff)

    tech_psd = 10.0 ** (chain.technical_noise_dbm_hz / 10.0)
    common = rng.standard_normal(n) * math.sqrt(tech_psd * sample_rate / 2.0)
    for freq, power_dbm in common_mode_tones:
        if not 0 < freq < sample_rate / 2:
            raise AliasingError(f"common-mode tone at {freq:g} Hz is outside the band")
        common = common + math.sqrt(2.0 * 10.0 ** (power_dbm / 10.0)) * np.cos(2 * np.pi * freq * t)
    probe = probe + common
    reference = reference + common

    electronic = rng.standard_normal(n) * math.sqrt(chain.electronic_psd * sample_rate / 2.0)
    return DetectorRecord(
        probe=probe,
        reference=reference,
        electronic=electronic,
        sample_rate=sample_rate,
        metadata={
            "seed": int(chain.rng_seed if seed is None else seed),
            "duration_s": duration,
            "sample_rate_hz": sample_rate,
            "gain": float(gain),
        },
    )


def balanced_series(chain, source, gain, **kw):
    """Balanced detector output and its sample rate."""
    rec = synthesize_photocurrents(chain, source, gain, **kw)
    return rec.balanced(chain.cmrr_db), rec.sample_rate


# --------------------------------------------------------------------------
# spectrum analyzer


@dataclass(frozen=True)
class AnalyticSpectrum:
    """Expected analyzer input: discrete tones (Hz, mW) over a white floor (mW/Hz)."""

    tones: tuple = ()
    floor_psd: float = 0.0


def analytic_spectrum(
    chain: DetectionChain,
    source: LightSource,
    library: MaterialLibrary | None = None,
    mixture: Mixture | None = None,
    lock_detuning_ghz: float = 0.0,
    gain: float | None = None,
) -> AnalyticSpectrum:
    if gain is None:
        gain = material_response(library, mixture, lock_detuning_ghz)
    sig = float(signal_power_mw(chain, gain, source.pump_power, source.probe_power))
    floor = noise_psd(chain, source) if source.probe_power > 0 else chain.electronic_psd
    tones = ((chain.signal_freq, sig),) if sig > 0 else ()
    return AnalyticSpectrum(tones=tones, floor_psd=floor)


def _gaussian_sigma(rbw: float) -> float:
    # |H(f)|^2 = exp(-f^2 / sigma^2) is 3 dB down at f = rbw / 2
    return rbw / (2.0 * math.sqrt(math.log(2.0)))


def _to_dbm(p):
    return 10.0 * np.log10(np.maximum(p, 1e-300))


def analyzer_sweep(signal, settings: AnalyzerSettings, sample_rate=None, seed=None) -> SpectrumTrace:
    """Emulate an RF spectrum analyzer on a time series or an analytic model.

    ``signal`` is either a 1-D array sampled at ``sample_rate`` or an
    :class:`AnalyticSpectrum`. With an analytic model, ``seed`` adds the
    statistical ripple of ``settings.averages`` averaged power samples;
    without it the expected trace is returned.
    """
    if isinstance(signal, AnalyticSpectrum):
        return _analytic_sweep(signal, settings, seed)
    if sample_rate is None:
        raise ValueError("sample_rate is required for a time series")
    x = np.asarray(signal, dtype=float)
    if settings.zero_span:
        return _zero_span(x, sample_rate, settings)
    return _swept(x, sample_rate, settings)


def _settings_meta(settings, **extra):
    meta = {"analyzer": asdict(settings)}
    meta.update(extra)
    return meta


def _analytic_sweep(model: AnalyticSpectrum, settings: AnalyzerSettings, seed):
    sigma = _gaussian_sigma(settings.rbw)
    noise = model.floor_psd * settings.noise_bandwidth
    if settings.zero_span:
        axis = np.linspace(0.0, settings.sweep_time, settings.points)
        tone = sum(p * math.exp(-((settings.center - f) ** 2) / sigma**2) for f, p in model.tones)
        tone = np.full(axis.shape, tone)
    else:
        axis = settings.frequencies()
        tone = np.zeros_like(axis)
        for f, p in model.tones:
            tone += p * np.exp(-((axis - f) ** 2) / sigma**2)
    if seed is None:
        power = tone + noise
    else:
        rng = np.random.default_rng(seed)
        k = settings.averages
        g = rng.gamma(k, 1.0 / k, size=axis.shape)
        z = rng.standard_normal(axis.shape)
        power = np.maximum(tone + noise * g + np.sqrt(2.0 * tone * noise / k) * z, 1e-300)
    if settings.zero_span:
        return SpectrumTrace(axis, _to_dbm(power), "time", "s", "power", "dBm",
                             _settings_meta(settings, path="analytic", seed=seed))
    return SpectrumTrace(axis, _to_dbm(power), metadata=_settings_meta(settings, path="analytic", seed=seed))


def _baseband(X, df, n, fc, sigma):
    """Complex envelope of the Gaussian-filtered signal around ``fc``.

    Returns the detected power series (mW) at a decimated rate.
    """
    half = 6.0 * sigma
    lo = max(1, int(math.floor((fc - half) / df)))
    hi = min(X.size - 1, int(math.ceil((fc + half) / df)) + 1)
    if hi <= lo:
        return np.zeros(1)
    f = np.arange(lo, hi) * df
    h = np.exp(-((f - fc) ** 2) / (2.0 * sigma**2))
    seg = X[lo:hi] * h
    m = seg.size
    y = np.fft.ifft(seg) * (m / n)
    return 2.0 * (y.real**2 + y.imag**2)


def _check_band(sample_rate, hi_freq, rbw):
    if hi_freq + 3.0 * rbw > sample_rate / 2.0:
        raise AnalyzerRangeError(
            f"span up to {hi_freq:g} Hz exceeds the Nyquist range of a {sample_rate:g} Hz series"
        )


def _video_average(p, duration, vbw, position):
    """Moving average over 1/vbw around relative ``position`` in [0, 1]."""
    m = p.size
    window = int(round(m * min(1.0, 1.0 / (vbw * duration))))
    window = max(1, window)
    start = int(round(position * (m - window)))
    return float(p[start:start + window].mean())


def _swept(x, fs, settings: AnalyzerSettings):
    _check_band(fs, settings.stop, settings.rbw)
    n = x.size
    duration = n / fs
    X = np.fft.rfft(x)
    df = fs / n
    sigma = _gaussian_sigma(settings.rbw)
    axis = settings.frequencies()
    out = np.empty(axis.size)
    last = axis.size - 1
    for i, fc in enumerate(axis):
        p = _baseband(X, df, n, fc, sigma)
        out[i] = _video_average(p, duration, settings.vbw, i / last)
    return SpectrumTrace(axis, _to_dbm(out), metadata=_settings_meta(settings, path="synthesized",
                                                                     series_duration_s=duration))


def _zero_span(x, fs, settings: AnalyzerSettings):
    _check_band(fs, settings.center, settings.rbw)
    n = x.size
    duration = n / fs
    if duration < settings.sweep_time:
        raise AnalyzerRangeError("series is shorter than the zero-span sweep time")
    X = np.fft.rfft(x)
    p = _baseband(X, fs / n, n, settings.center, _gaussian_sigma(settings.rbw))
    dt = duration / p.size
    # first-order video filter realised as a moving average of 1/vbw
    w = max(1, int(round(1.0 / (settings.vbw * dt))))
    kernel = np.ones(w) / w
    video = np.convolve(np.concatenate([p[-(w - 1):], p]) if w > 1 else p, kernel, mode="valid")
    t = np.arange(video.size) * dt
    axis = np.linspace(0.0, settings.sweep_time, settings.points)
    power = np.interp(axis, t, video)
    return SpectrumTrace(axis, _to_dbm(power), "time", "s", "power", "dBm",
                         _settings_meta(settings, path="synthesized", series_duration_s=duration))


def trace_power_mw(trace: SpectrumTrace) -> np.ndarray:
    return 10.0 ** (trace.values / 10.0)


def peak_and_floor(trace: SpectrumTrace, freq: float, rbw: float, guard: float = 3.0):
    """Linear power at the point nearest ``freq`` and mean floor away from it (mW).

    The nearest point is used rather than a local maximum, which would bias
    the peak upward by the largest noise excursion.
    """
    p = trace_power_mw(trace)
    dist = np.abs(trace.axis - freq)
    i = int(np.argmin(dist))
    far = dist > guard * rbw
    if dist[i] > 0.5 * rbw or not far.any():
        raise AnalyzerRangeError("trace does not cover both the tone and its floor")
    return float(p[i]), float(p[far].mean())


def estimate_snr_db(trace: SpectrumTrace, freq: float, rbw: float) -> float:
    peak, floor = peak_and_floor(trace, freq, rbw)
    s = peak - floor
    return 10.0 * math.log10(s / floor) if s > 0 else -math.inf


def synthesized_snr_db(
    chain, source, gain, settings: AnalyzerSettings | None = None, seeds=range(20),
    duration=0.05, sample_rate=4e6,
) -> float:
    """Monte Carlo SNR estimate from synthesized traces.

    Linear peak and floor powers are averaged over ``seeds`` before forming
    the ratio; this is the independent check on :func:`analytic_snr_db`.
    """
    settings = settings or AnalyzerSettings(points=151)
    peaks, floors = [], []
    for s in seeds:
        x, fs = balanced_series(chain, source, gain, duration=duration, sample_rate=sample_rate, seed=s)
        tr = analyzer_sweep(x, settings, sample_rate=fs)
        pk, fl = peak_and_floor(tr, chain.signal_freq, settings.rbw)
        peaks.append(pk)
        floors.append(fl)
    peak, floor = float(np.mean(peaks)), float(np.mean(floors))
    s = peak - floor
    return 10.0 * math.log10(s / floor) if s > 0 else -math.inf


# --------------------------------------------------------------------------
# lock-in amplifier


def amplitude_to_uv(amp):
    """RMS amplitude in sqrt(mW) to RMS microvolts across the analyzer load."""
    return amp * math.sqrt(1e-3 * LOAD_OHMS) * 1e6


def detuning_grid(start_ghz: float, stop_ghz: float, step_hz: float) -> np.ndarray:
    if not stop_ghz > start_ghz:
        raise ValueError("empty detuning range")
    step = step_hz / 1e9
    k = int(math.floor((stop_ghz - start_ghz) / step + 1e-9))
    # integer multiples keep the grid free of accumulated rounding
    return start_ghz + step * np.arange(k + 1)


def lockin_scan(
    chain: DetectionChain,
    source: LightSource,
    library: MaterialLibrary,
    mixture: Mixture,
    detuning_range=(-7.0, 7.0),
    settings: LockInSettings | None = None,
    seed: int | None = None,
    averages: int = 1,
    noise: bool = True,
) -> SpectrumTrace:
    """Demodulated sum-frequency amplitude versus pump-probe detuning.

    Each grid point is treated as a settled measurement: the in-phase output
    is the signed SBS amplitude plus Gaussian noise whose variance is the
    balanced-output noise PSD over the RC filter's noise bandwidth, split
    evenly between the two quadratures. ``averages`` traces are averaged.
    """
    settings = settings or LockInSettings()
    grid = detuning_grid(detuning_range[0], detuning_range[1], settings.detuning_grid_step)
    gain = material_response(library, mixture, grid)
    amp = sbs_signal_amplitude(chain, gain, source.pump_power, source.probe_power)
    psd = noise_psd(chain, source) if source.probe_power > 0 else chain.electronic_psd
    sigma = math.sqrt(psd * settings.enbw / 2.0)
    seed = chain.rng_seed if seed is None else seed
    values = np.asarray(amp, dtype=float).copy()
    if noise:
        rng = np.random.default_rng(seed)
        draws = rng.standard_normal((averages, grid.size)) * sigma
        values = values + draws.mean(axis=0)
    unit = float(amplitude_to_uv(chain.detector_gain * source.pump_power * source.probe_power))
    meta = {
        "instrument": "lock-in",
        "lockin": asdict(settings),
        "seed": int(seed),
        "averages": int(averages),
        "noise": bool(noise),
        "pump_power_w": source.pump_power,
        "probe_power_w": source.probe_power,
        "state": source.state.value,
        "mixture": dict(mixture.weights),
        "unit_gain_amplitude_uv": unit,
        "noise_sigma_uv": float(amplitude_to_uv(sigma / math.sqrt(averages))) if noise else 0.0,
    }
    return SpectrumTrace(grid, amplitude_to_uv(values), "detuning", "GHz", "amplitude", "uV", meta)
