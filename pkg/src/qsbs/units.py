"""Parsing of physical quantities written with explicit unit suffixes.

Config files carry every physical value as a string such as ``"5.03 GHz"``,
``"700 uW"`` or ``"-81 dBm"``. Bare numbers are rejected so that a missing
unit never silently changes an experiment by three orders of magnitude.
"""

from __future__ import annotations

import math
import re

# dimension -> {suffix: factor to the canonical unit}
_UNITS: dict[str, dict[str, float]] = {
    "frequency": {"Hz": 1.0, "kHz": 1e3, "KHz": 1e3, "MHz": 1e6, "GHz": 1e9},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "μW": 1e-6, "nW": 1e-9},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "min": 60.0, "h": 3600.0},
    "ratio_db": {"dB": 1.0},
    "power_dbm": {"dBm": 1.0},
    "psd_dbm": {"dBm/Hz": 1.0},
}

CANONICAL = {
    "frequency": "Hz",
    "power": "W",
    "length": "m",
    "time": "s",
    "ratio_db": "dB",
    "power_dbm": "dBm",
    "psd_dbm": "dBm/Hz",
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-zµμ/]+)\s*$")


class UnitError(ValueError):
    """A quantity string is malformed or carries the wrong unit."""


def parse_quantity(text, dimension: str, unit: str | None = None) -> float:
    """Convert ``text`` to a float in ``unit`` (default: canonical unit of ``dimension``).

    >>> parse_quantity("5.03 GHz", "frequency")
    5030000000.0
    >>> parse_quantity("700 uW", "power")
    0.0007
    >>> parse_quantity("45 mW", "power", unit="mW")
    45.0
    """
    if dimension not in _UNITS:
        raise KeyError(f"unknown dimension {dimension!r}")
    if isinstance(text, bool) or not isinstance(text, str):
        raise UnitError(
            f"expected a quantity with a {dimension} unit, got unitless value {text!r}"
        )
    m = _QUANTITY.match(text)
    if m is None:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, suffix = float(m.group(1)), m.group(2)
    table = _UNITS[dimension]
    if suffix not in table:
        allowed = ", ".join(sorted(table))
        raise UnitError(f"unit {suffix!r} is not a {dimension} unit (allowed: {allowed})")
    if unit is None:
        out = value * table[suffix]
    elif suffix == unit:
        out = value
    else:
        out = value * (table[suffix] / table[unit])
    if not math.isfinite(out):
        raise UnitError(f"non-finite quantity {text!r}")
    return out


def format_quantity(value: float, unit: str) -> str:
    """Inverse of :func:`parse_quantity` for a chosen display unit."""
    for table in _UNITS.values():
        if unit in table:
            return f"{value / table[unit]!r} {unit}"
    raise KeyError(f"unknown unit {unit!r}")


def dbm_to_mw(dbm):
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw):
    return 10.0 * math.log10(mw) if mw > 0 else -math.inf
