import numpy as np
import pytest

from qsbs.detection import DetectionChain, lockin_scan
from qsbs.fitting import FitError, fit_spectrum
from qsbs.materials import Mixture, load_library
from qsbs.quantum_light import LightSource
from qsbs.traces import SpectrumTrace

LIB = load_library()
CHAIN = DetectionChain()
SRC = LightSource.coherent(500e-6, 40e-3)


def _scan(name, noise=True, seed=0, span=7.0):
    return lockin_scan(CHAIN, SRC, LIB, Mixture.pure(name), (-span, span), seed=seed, noise=noise)


def test_noiseless_water_roundtrip():
    res = fit_spectrum(_scan("water", noise=False))
    (line,) = res.resonances
    assert line.shift_ghz == pytest.approx(5.03, rel=1e-3)
    assert line.linewidth_mhz == pytest.approx(287.0, rel=1e-3)
    assert line.gain_strength == pytest.approx(1.0, rel=1e-3)
    assert res.rayleigh_strength == pytest.approx(0.3, rel=1e-3)


def test_noisy_water_within_published_error_bars():
    for seed in range(5):
        (line,) = fit_spectrum(_scan("water", seed=seed)).resonances
        assert abs(line.shift_ghz - 5.03) < 0.15
        assert abs(line.linewidth_mhz - 287.0) < 23.0


@pytest.mark.parametrize("name,n,shifts", [
    ("hydrogel", 1, [6.7]),
    ("cell_spheroid", 2, [5.1, 5.6]),
    ("lipid", 1, [12.0]),
])
def test_roundtrip_library_materials(name, n, shifts):
    res = fit_spectrum(_scan(name, seed=3, span=14.0), n_resonances=n)
    assert [r.shift_ghz for r in res.resonances] == pytest.approx(shifts, abs=0.02)
    for r, ref in zip(res.resonances, LIB[name].resonances):
        assert r.linewidth_mhz == pytest.approx(ref.linewidth_mhz, rel=0.05)
        assert r.gain_strength == pytest.approx(ref.gain_strength, rel=0.05)


def test_too_few_lines_is_a_fit_failure():
    with pytest.raises(FitError, match="residual"):
        fit_spectrum(_scan("cell_spheroid", noise=False), n_resonances=1)


def test_noise_only_trace_fails():
    tr = lockin_scan(CHAIN, SRC, LIB, Mixture(), seed=1)
    with pytest.raises(FitError, match="no significant"):
        fit_spectrum(tr)


def test_requires_ghz_axis():
    tr = SpectrumTrace(np.linspace(0, 1, 10), np.zeros(10))
    with pytest.raises(ValueError):
        fit_spectrum(tr)
