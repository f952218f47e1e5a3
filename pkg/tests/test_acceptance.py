"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import filecmp
import math
import time

import numpy as np
from hypothesis import given, settings, strategies as st

from qsbs.cli import main
from qsbs.detection import (
    AnalyzerSettings,
    DetectionChain,
    analyzer_sweep,
    balanced_series,
    lockin_scan,
    noise_psd,
    peak_and_floor,
    signal_power_mw,
    snr_db_from_gain,
    synthesize_photocurrents,
    synthesized_snr_db,
    trace_power_mw,
)
from qsbs.fitting import FitError, fit_spectrum
from qsbs.imaging import Phantom, ScanPlan, acquire_image, acquisition_time_estimate, mean_gap_db
from qsbs.materials import Mixture, load_library, material_response
from qsbs.photodamage import apply_dose, calibrate_damage
from qsbs.quantum_light import LightSource

CHAIN = DetectionChain()
LIB = load_library()
SWEEP = AnalyzerSettings(points=151)


def _db(x):
    return 10.0 * math.log10(x)


def _mean_floor_mw(src, seed, chain=CHAIN, gain=0.0):
    x, fs = balanced_series(chain, src, gain, duration=0.05, seed=seed)
    tr = analyzer_sweep(x, SWEEP, sample_rate=fs)
    return float(np.mean(trace_power_mw(tr)))


def test_01_noise_floor_calibration(report):
    t0 = time.perf_counter()
    coh = _db(_mean_floor_mw(LightSource.coherent(700e-6, 7e-3), seed=0))
    dark = _db(_mean_floor_mw(LightSource.coherent(0.0, 0.0), seed=0))
    analytic = _db(noise_psd(CHAIN, LightSource.coherent(700e-6, 7e-3)) * SWEEP.noise_bandwidth)
    dt = time.perf_counter() - t0
    ok = abs(coh + 67) <= 0.5 and abs(dark + 81) <= 0.5 and abs(analytic + 67) <= 0.5 and dt < 1.0
    report(1, "noise-floor calibration", ok,
           f"coherent {coh:.2f} dBm (analytic {analytic:.2f}), electronic {dark:.2f} dBm, {dt:.2f} s")
    assert ok


def test_02_quantum_advantage_floor_drop(report):
    t0 = time.perf_counter()
    coh_src = LightSource.coherent(700e-6, 7e-3)
    sq_src = LightSource.twin_beams(700e-6, 7e-3)
    nbw = SWEEP.noise_bandwidth
    elec = CHAIN.electronic_psd * nbw
    a_coh, a_sq = noise_psd(CHAIN, coh_src) * nbw, noise_psd(CHAIN, sq_src) * nbw
    analytic = _db((a_coh - elec) / (a_sq - elec))
    seeds = range(20)
    s_coh = np.mean([_mean_floor_mw(coh_src, s) for s in seeds])
    s_sq = np.mean([_mean_floor_mw(sq_src, s) for s in seeds])
    s_dark = np.mean([_mean_floor_mw(LightSource.coherent(0.0, 0.0), s) for s in seeds])
    synth = _db((s_coh - s_dark) / (s_sq - s_dark))
    raw = _db(s_coh / s_sq)
    dt = time.perf_counter() - t0
    ok = abs(analytic - 3.5) <= 0.2 and abs(synth - 3.5) <= 0.2 and dt < 30
    report(2, "quantum advantage floor drop (dark-corrected)", ok,
           f"analytic {analytic:.3f} dB, 20-seed synthesized {synth:.3f} dB "
           f"(raw incl. electronic {raw:.3f} dB), {dt:.1f} s")
    assert ok


def test_03_spectrum_roundtrip(report):
    t0 = time.perf_counter()
    src = LightSource.coherent(500e-6, 40e-3)
    passed, shifts, widths = 0, [], []
    for seed in range(50):
        tr = lockin_scan(CHAIN, src, LIB, Mixture.pure("water"), seed=seed)
        try:
            (line,) = fit_spectrum(tr).resonances
        except FitError:
            continue
        shifts.append(line.shift_ghz)
        widths.append(line.linewidth_mhz)
        if abs(line.shift_ghz - 5.03) <= 0.15 and abs(line.linewidth_mhz - 287.0) <= 23.0:
            passed += 1
    dt = time.perf_counter() - t0
    ok = passed >= 45 and dt < 60
    report(3, "water spectrum fit roundtrip", ok,
           f"{passed}/50 within bars, shift {np.mean(shifts):.4f}+/-{np.std(shifts):.4f} GHz, "
           f"width {np.mean(widths):.1f}+/-{np.std(widths):.1f} MHz, {dt:.1f} s")
    assert ok


def test_04_sum_frequency_placement(report):
    gain = material_response(LIB, Mixture.pure("hydrogel"), 6.7)
    src = LightSource.coherent(700e-6, 30e-3)
    s = AnalyzerSettings(start=250e3, stop=750e3, points=501)
    x, fs = balanced_series(CHAIN, src, gain, duration=0.05, seed=1)
    tr = analyzer_sweep(x, s, sample_rate=fs)
    bin_hz = tr.axis[1] - tr.axis[0]
    window = np.abs(tr.axis - 700e3) < 40e3
    f_peak = float(tr.axis[window][np.argmax(tr.values[window])])

    leaky = DetectionChain(pump_leakage=0.05)
    near700 = AnalyzerSettings(start=650e3, stop=750e3, points=101)
    near300 = AnalyzerSettings(start=250e3, stop=350e3, points=101)
    excess = []
    for seed in range(5):
        x, fs = balanced_series(leaky, src, 0.0, duration=0.05, seed=seed)
        p700, f700 = peak_and_floor(analyzer_sweep(x, near700, sample_rate=fs), 700e3, s.rbw)
        p300, f300 = peak_and_floor(analyzer_sweep(x, near300, sample_rate=fs), 300e3, s.rbw)
        excess.append((_db(p700 / f700), _db(p300 / f300)))
    worst = max(e[0] for e in excess)
    ok = abs(f_peak - 700e3) <= bin_hz and worst < 1.0 and min(e[1] for e in excess) > 10
    report(4, "sum-frequency placement / leakage", ok,
           f"tone at {f_peak / 1e3:.1f} kHz (bin {bin_hz:.0f} Hz); leakage at 700 kHz worst "
           f"{worst:+.2f} dB over floor, at 300 kHz {min(e[1] for e in excess):.1f} dB")
    assert ok


def _suppression(chain, f, power_dbm, seed):
    rec = synthesize_photocurrents(chain, LightSource.coherent(700e-6, 7e-3), 0.0, duration=0.02,
                                   seed=seed, common_mode_tones=[(f, power_dbm)])
    s = AnalyzerSettings(start=f - 50e3, stop=f + 50e3, points=101)

    def tone(x):
        peak, floor = peak_and_floor(analyzer_sweep(x, s, sample_rate=rec.sample_rate), f, s.rbw)
        return peak - floor

    return _db(tone(rec.probe - rec.probe.mean()) / tone(rec.balanced(chain.cmrr_db)))


def test_05_common_mode_rejection(report):
    seen, tracking = [], []

    @settings(max_examples=15, deadline=None)
    @given(st.floats(100e3, 1e6), st.floats(-20.0, 0.0), st.integers(0, 2**31))
    def default_chain(f, power, seed):
        seen.append(_suppression(CHAIN, f, power, seed))
        assert seen[-1] >= 25.0

    @settings(max_examples=10, deadline=None)
    @given(st.floats(15.0, 45.0), st.integers(0, 2**31))
    def follows_setting(cmrr, seed):
        d = _suppression(DetectionChain(cmrr_db=cmrr), 300e3, 0.0, seed)
        tracking.append(d - cmrr)
        assert abs(d - cmrr) <= 0.3

    ok = True
    for prop in (default_chain, follows_setting):
        try:
            prop()
        except AssertionError:
            ok = False
    report(5, "common-mode rejection", ok,
           f"default {CHAIN.cmrr_db:g} dB chain: min {min(seen):.2f} dB over {len(seen)} draws; "
           f"measured - configured within {max(map(abs, tracking)):.3f} dB over {len(tracking)} draws")
    assert ok


def _gap(mixture, lock, pump_mw, eta):
    ph = Phantom.uniform(mixture, 55, 55, 6.0)
    coh = acquire_image(ph, ScanPlan(LightSource.coherent(700e-6, pump_mw * 1e-3), lock, seed=1), LIB)
    sq = acquire_image(ph, ScanPlan(LightSource.twin_beams(700e-6, pump_mw * 1e-3, transmission=eta), lock, seed=1), LIB)
    return mean_gap_db(sq, coh), bool(np.all(sq.values >= coh.values))


def test_06_imaging_advantage(report):
    t0 = time.perf_counter()
    hyd, d1 = _gap(Mixture.pure("hydrogel"), 6.7, 7.0, 0.691)
    t_one = time.perf_counter() - t0
    cell, d2 = _gap(Mixture.pure("cell_spheroid"), 5.6, 15.0, 0.691)
    lip, d3 = _gap(Mixture.pure("lipid"), 12.0, 12.0, 0.78)
    ok = abs(hyd - 3.5) <= 0.3 and cell > 3.0 and abs(lip - 4.0) <= 0.3 and t_one < 5.0 and d1 and d2 and d3
    report(6, "imaging advantage", ok,
           f"hydrogel {hyd:.3f} dB, cell {cell:.3f} dB, lipid (eta 0.78) {lip:.3f} dB; "
           f"55x55 pair in {t_one:.2f} s")
    assert ok


def test_07_scaling_law(report):
    seen = []

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-4, 0.1), st.floats(1e-5, 2e-3), st.floats(0.01, 2.0))
    def prop(pump, probe, g):
        d = _db(signal_power_mw(CHAIN, g, 2 * pump, probe) / signal_power_mw(CHAIN, g, pump, probe))
        seen.append(d)
        assert abs(d - 6.02) <= 0.1

    ok = True
    try:
        prop()
    except AssertionError:
        ok = False
    report(7, "pump-doubling scaling", ok, f"{len(seen)} draws, range {min(seen):.4f}..{max(seen):.4f} dB")
    assert ok


def test_08_viability_endpoints(report):
    t0 = time.perf_counter()
    m = calibrate_damage([(45.0, 3.0, 0.13), (24.0, 3.0, 0.41)])
    v45, v24 = m.viability(45.0, 3.0), m.viability(24.0, 3.0)
    lib = load_library()
    split = apply_dose(apply_dose(lib, m, 45.0, 1.0), m, 45.0, 2.0)
    whole = apply_dose(lib, m, 45.0, 3.0)
    semigroup = split["cell_spheroid"].resonances[1] == whole["cell_spheroid"].resonances[1]
    t = np.linspace(0, 3, 31)
    monotone = bool(np.all(np.diff(m.viability(45.0, t)) < 0)) and m.viability(50.0, 1.0) < m.viability(40.0, 1.0)
    zero = m.viability(0.0, 3.0) == 1.0
    dt = time.perf_counter() - t0
    ok = (abs(v45 - 0.13) <= 1e-6 and abs(v24 - 0.41) <= 1e-6 and abs(v24 / v45 - 3.15) < 0.01
          and semigroup and monotone and zero and dt < 1.0)
    report(8, "viability endpoints", ok,
           f"V45={v45:.12f}, V24={v24:.12f}, ratio {v24 / v45:.4f}, alpha {m.power_exponent_alpha:.5f}, "
           f"k {m.rate_k:.6g}, semigroup {semigroup}, monotone {monotone}, P=0 flat {zero}, {dt * 1e3:.0f} ms")
    assert ok


def test_09_acquisition_time(report):
    src = LightSource.coherent(700e-6, 7e-3)
    swept = acquisition_time_estimate(ScanPlan(src, 6.7))
    zs = acquisition_time_estimate(ScanPlan(src, 6.7, analyzer=AnalyzerSettings.zero_span_default()))
    ok = swept == 3025.0 and abs(zs - 6.05) < 1e-9
    report(9, "acquisition-time arithmetic", ok, f"swept {swept:g} s, zero-span {zs:.4f} s")
    assert ok


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


def test_10_determinism(report, tmp_path):
    results = {}
    assert main(["spectrum", "--seed", "5", "--out", str(tmp_path / "spectrum" / "a")]) == 0
    trace = tmp_path / "spectrum" / "a" / "spectrum.csv"
    for cmd in ["spectrum", "gain", "image", "viability", "fit"]:
        a, b = tmp_path / cmd / "a", tmp_path / cmd / "b"
        if cmd == "fit":
            assert main(["fit", str(trace), "--out", str(a)]) == 0
        elif cmd != "spectrum":
            assert main([cmd, "--seed", "5", "--out", str(a)]) == 0
        rc = main([cmd, "--config", str(a / "config.resolved.yaml"), "--out", str(b)])
        results[cmd] = rc == 0 and _same_tree(a, b)
    ok = all(results.values())
    report(10, "snapshot rerun byte-identical", ok, ", ".join(f"{k} {'ok' if v else 'DIFF'}" for k, v in results.items()))
    assert ok


def test_11_oracle_equivalence(report):
    t0 = time.perf_counter()
    gain = material_response(LIB, Mixture.pure("hydrogel"), 6.7)
    rows = []
    for pump in (7e-3, 15e-3, 30e-3):
        for label, src in [
            ("coh", LightSource.coherent(700e-6, pump)),
            ("sq", LightSource.twin_beams(700e-6, pump)),
            ("sq-lossless", LightSource.twin_beams(700e-6, pump, transmission=1.0)),
        ]:
            a = snr_db_from_gain(CHAIN, src, gain)
            s = synthesized_snr_db(CHAIN, src, gain, seeds=range(20))
            rows.append((pump, label, a, s))
    dt = time.perf_counter() - t0
    worst = max(abs(a - s) for *_, a, s in rows)
    ok = worst <= 0.5 and dt < 120
    detail = "; ".join(f"{p * 1e3:.0f}mW {lab} {a:.2f}/{s:.2f}" for p, lab, a, s in rows)
    report(11, "analytic vs synthesized SNR", ok, f"worst |diff| {worst:.3f} dB, {dt:.1f} s [{detail}]")
    assert ok
