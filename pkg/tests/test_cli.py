import filecmp
import json
import math

import numpy as np
import pytest

from qsbs.cli import main
from qsbs.detection import peak_and_floor, trace_power_mw
from qsbs.traces import read_trace


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


def test_spectrum_water(tmp_path):
    assert main(["spectrum", "--out", str(tmp_path / "o")]) == 0
    tr = read_trace(tmp_path / "o" / "spectrum.csv")
    assert tr.axis[np.argmax(tr.values)] == pytest.approx(5.03, abs=0.04)
    assert (tmp_path / "o" / "config.resolved.yaml").exists()


def test_spectrum_empty_mixture_is_noise(tmp_path):
    cfg = _write(tmp_path, "spectrum: {sample: {}}\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    tr = read_trace(tmp_path / "o" / "spectrum.csv")
    assert np.abs(tr.values).max() < 6 * tr.metadata["noise_sigma_uv"]


def test_malformed_config_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "source: {pump_power: 7}\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "source.pump_power" in capsys.readouterr().err
    cfg = _write(tmp_path, "spectrum: {smaple: {}}\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    cfg = _write(tmp_path, "source: [1, 2\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_gain_pair_and_scaling(tmp_path):
    cfg = _write(tmp_path, "gain: {path: analytic, states: [squeezed]}\n")
    assert main(["gain", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    s = {}
    for pump in ("30mW", "7mW"):
        tr = read_trace(tmp_path / "o" / f"gain_{pump}_squeezed.csv")
        peak, floor = peak_and_floor(tr, 700e3, 10e3)
        s[pump] = peak - floor
    assert 10 * math.log10(s["30mW"] / s["7mW"]) == pytest.approx(12.64, abs=0.5)


def test_gain_7mw_synthesized(tmp_path):
    cfg = _write(tmp_path, "gain: {pump_powers: ['7 mW']}\n")
    assert main(["gain", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = {r["state"]: r for r in json.loads((tmp_path / "o" / "summary.json").read_text())["traces"]}
    assert rows["squeezed"]["floor_dbm"] < rows["coherent"]["floor_dbm"] - 3.0
    assert rows["squeezed"]["measured_snr_db"] > rows["coherent"]["measured_snr_db"] + 2.0


def test_gain_disabled_is_floor_only(tmp_path):
    cfg = _write(tmp_path, "gain: {enabled: false, pump_powers: ['30 mW'], path: analytic}\n")
    assert main(["gain", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    tr = read_trace(tmp_path / "o" / "gain_30mW_coherent.csv")
    p = trace_power_mw(tr)
    assert p.max() / p.mean() < 1.5


@pytest.mark.parametrize("cmd", ["spectrum", "gain", "image", "viability"])
def test_rerun_from_snapshot_is_byte_identical(tmp_path, cmd):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([cmd, "--seed", "3", "--out", str(a)]) == 0
    assert main([cmd, "--config", str(a / "config.resolved.yaml"), "--out", str(b)]) == 0
    assert _same_tree(a, b)


def test_image_outputs(tmp_path):
    assert main(["image", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["states"]) == {"coherent", "squeezed"}
    for state in ("coherent", "squeezed"):
        assert (tmp_path / f"image_{state}.pgm").read_bytes().startswith(b"P5\n55 55\n255\n")
        side = json.loads((tmp_path / f"image_{state}.json").read_text())
        assert side["mapping"]["db_at_255"] == summary["states"]["squeezed"]["max_contrast_db"]


def test_viability_outputs(tmp_path):
    assert main(["viability", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "viability.csv").read_text().splitlines()
    assert lines[0] == "time_h,condition,viability"
    assert len(lines) == 9
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["final_ratio"] == pytest.approx(3.15, abs=0.01)
    assert len(list((tmp_path / "spectra").glob("*.csv"))) == 8


def test_fit_roundtrip_and_rerun(tmp_path):
    assert main(["spectrum", "--out", str(tmp_path / "s")]) == 0
    assert main(["fit", str(tmp_path / "s" / "spectrum.csv"), "--out", str(tmp_path / "f")]) == 0
    rep = json.loads((tmp_path / "f" / "fit.json").read_text())
    assert rep["resonances"][0]["shift_ghz"] == pytest.approx(5.03, abs=0.15)
    assert main(["fit", "--config", str(tmp_path / "f" / "config.resolved.yaml"), "--out", str(tmp_path / "g")]) == 0
    assert _same_tree(tmp_path / "f", tmp_path / "g")


def test_fit_malformed_trace_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("# a: 1\ndetuning_GHz,amplitude_uV\n1.0,2.0\n1.5,oops\n")
    assert main(["fit", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "bad.csv:4:" in capsys.readouterr().err


def test_fit_failure_exit_3(tmp_path):
    cfg = _write(tmp_path, "spectrum: {sample: {}}\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    assert main(["fit", str(tmp_path / "s" / "spectrum.csv"), "--out", str(tmp_path / "o")]) == 3


def test_fit_without_trace_exit_2(tmp_path):
    assert main(["fit", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "qsbs", "spectrum", "--config", "/nonexistent.yaml",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 2
    assert "cannot read" in r.stderr


@pytest.mark.parametrize("name,cmd", [
    ("water_spectrum", "spectrum"), ("hydrogel_gain", "gain"), ("hydrogel_image", "image"),
    ("cell_image", "image"), ("lipid_image", "image"), ("viability", "viability"),
])
def test_shipped_configs_run(tmp_path, name, cmd):
    from pathlib import Path

    cfg = Path(__file__).resolve().parents[1] / "configs" / f"{name}.yaml"
    assert main([cmd, "--config", str(cfg), "--out", str(tmp_path)]) == 0
