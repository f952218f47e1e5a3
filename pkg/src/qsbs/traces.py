"""Output records and their delimited-text file format.

Every trace file starts with a ``#``-prefixed header block holding one JSON
value per key (settings, seed, units), followed by a two-column CSV table.
Floats are written with ``repr`` so a read-back trace is bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TraceParseError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


@dataclass
class SpectrumTrace:
    axis: np.ndarray
    values: np.ndarray
    axis_label: str = "frequency"
    axis_unit: str = "Hz"
    value_label: str = "power"
    value_unit: str = "dBm"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis.ndim != 1 or self.axis.shape != self.values.shape:
            raise ValueError("axis and values must be 1-D arrays of equal length")
        if self.axis.size and np.any(np.diff(self.axis) <= 0):
            raise ValueError("trace axis must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("trace values must be finite")

    def __len__(self):
        return self.axis.size


def _header_lines(meta: dict) -> list[str]:
    return [f"# {k}: {json.dumps(meta[k], sort_keys=True)}" for k in sorted(meta)]


def write_trace(trace: SpectrumTrace, path) -> Path:
    path = Path(path)
    meta = dict(trace.metadata)
    meta.update(
        axis_label=trace.axis_label,
        axis_unit=trace.axis_unit,
        value_label=trace.value_label,
        value_unit=trace.value_unit,
    )
    lines = _header_lines(meta)
    lines.append(f"{trace.axis_label}_{trace.axis_unit},{trace.value_label}_{trace.value_unit}")
    lines.extend(f"{a!r},{v!r}" for a, v in zip(trace.axis.tolist(), trace.values.tolist()))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_trace(path) -> SpectrumTrace:
    path = Path(path)
    meta: dict = {}
    axis, values = [], []
    seen_columns = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if seen_columns:
                    raise TraceParseError(path, lineno, "header line after data")
                key, sep, value = line[1:].partition(":")
                if not sep:
                    raise TraceParseError(path, lineno, "header line needs 'key: value'")
                try:
                    meta[key.strip()] = json.loads(value)
                except json.JSONDecodeError as exc:
                    raise TraceParseError(path, lineno, f"bad header value: {exc.msg}") from None
                continue
            if not seen_columns:
                if len(line.split(",")) != 2:
                    raise TraceParseError(path, lineno, "expected a two-column header")
                seen_columns = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise TraceParseError(path, lineno, f"expected 2 columns, got {len(parts)}")
            try:
                a, v = float(parts[0]), float(parts[1])
            except ValueError:
                raise TraceParseError(path, lineno, f"non-numeric value in {line!r}") from None
            if axis and a <= axis[-1]:
                raise TraceParseError(path, lineno, "axis not strictly increasing")
            axis.append(a)
            values.append(v)
    if not axis:
        raise TraceParseError(path, 0, "no data rows")
    labels = {k: meta.pop(k) for k in ("axis_label", "axis_unit", "value_label", "value_unit") if k in meta}
    return SpectrumTrace(np.array(axis), np.array(values), metadata=meta, **labels)
