import math

import pytest

from qsbs.units import UnitError, dbm_to_mw, format_quantity, mw_to_dbm, parse_quantity


@pytest.mark.parametrize(
    "text,dim,expected",
    [
        ("5.03 GHz", "frequency", 5.03e9),
        ("287 MHz", "frequency", 287e6),
        ("10 kHz", "frequency", 1e4),
        ("700 uW", "power", 700e-6),
        ("700 µW", "power", 700e-6),
        ("7 mW", "power", 7e-3),
        ("6 um", "length", 6e-6),
        ("3 h", "time", 10800.0),
        ("2.0 ms", "time", 2e-3),
        ("-81 dBm", "power_dbm", -81.0),
        ("-110 dBm/Hz", "psd_dbm", -110.0),
        ("7 dB", "ratio_db", 7.0),
        ("1e3Hz", "frequency", 1e3),
    ],
)
def test_parse(text, dim, expected):
    assert parse_quantity(text, dim) == pytest.approx(expected, rel=1e-15)


def test_parse_in_target_unit_is_exact():
    assert parse_quantity("45 mW", "power", unit="mW") == 45.0
    assert parse_quantity("6.7 GHz", "frequency", unit="GHz") == 6.7
    assert parse_quantity("180 min", "time", unit="h") == 3.0


@pytest.mark.parametrize("bad", [7, 7.0, True, None, "7", "7 parsecs", "mW", "7 mW extra"])
def test_rejects_unitless_and_malformed(bad):
    with pytest.raises(UnitError):
        parse_quantity(bad, "power")


def test_wrong_dimension_names_allowed_units():
    with pytest.raises(UnitError, match="not a power unit"):
        parse_quantity("7 GHz", "power")


def test_format_roundtrip():
    s = format_quantity(5.03e9, "GHz")
    assert parse_quantity(s, "frequency") == pytest.approx(5.03e9)


def test_dbm_conversions():
    assert dbm_to_mw(0.0) == 1.0
    assert mw_to_dbm(1e-3) == pytest.approx(-30.0)
    assert mw_to_dbm(0.0) == -math.inf
