"""Noise statistics of coherent and two-mode intensity-difference squeezed light.

The balanced detector measures the intensity difference of the probe and its
reference beam. For two coherent beams that difference is shot-noise limited;
for twin beams it is reduced by ``cosh(2r)``, then partially refilled with
vacuum noise by optical loss::

    R = eta / cosh(2r) + (1 - eta)

``R`` is the differential noise power relative to shot noise and
``beta = sqrt(R)`` the corresponding amplitude factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

DEFAULT_SQUEEZING_DB = 7.0
# back-derived so that 7 dB at the source leaves ~3.5 dB at the detector
DEFAULT_TRANSMISSION = 0.691
SIGNAL_FREQ_HZ = 700e3


class LightState(str, Enum):
    COHERENT = "coherent"
    SQUEEZED = "squeezed"


@dataclass(frozen=True)
class LightSource:
    """Optical powers in W; ``transmission`` is source-to-detector efficiency.

    ``squeezing_bandwidth_hz`` is an optional roll-off of the squeezing away
    from ``squeezing_center_hz``; ``None`` keeps it flat across the band.
    """

    probe_power: float
    pump_power: float
    conjugate_power: float | None = None
    state: LightState = LightState.COHERENT
    squeezing_db: float = 0.0
    transmission: float = 1.0
    squeezing_bandwidth_hz: float | None = None
    squeezing_center_hz: float = SIGNAL_FREQ_HZ

    def __post_init__(self):
        object.__setattr__(self, "state", LightState(self.state))
        if self.conjugate_power is None:
            object.__setattr__(self, "conjugate_power", self.probe_power)
        for name in ("probe_power", "pump_power", "conjugate_power"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite power >= 0, got {v}")
        if not math.isfinite(self.squeezing_db) or self.squeezing_db < 0:
            raise ValueError("squeezing_db must be >= 0")
        if not (0 < self.transmission <= 1):
            raise ValueError(f"transmission must lie in (0, 1], got {self.transmission}")
        if self.squeezing_bandwidth_hz is not None and self.squeezing_bandwidth_hz <= 0:
            raise ValueError("squeezing_bandwidth_hz must be positive")

    @classmethod
    def coherent(cls, probe_power, pump_power, **kw) -> "LightSource":
        return cls(probe_power, pump_power, state=LightState.COHERENT, **kw)

    @classmethod
    def twin_beams(
        cls,
        probe_power,
        pump_power,
        squeezing_db=DEFAULT_SQUEEZING_DB,
        transmission=DEFAULT_TRANSMISSION,
        **kw,
    ) -> "LightSource":
        return cls(
            probe_power,
            pump_power,
            state=LightState.SQUEEZED,
            squeezing_db=squeezing_db,
            transmission=transmission,
            **kw,
        )

    @property
    def is_squeezed(self) -> bool:
        return self.state is LightState.SQUEEZED


@dataclass(frozen=True)
class NoiseBudget:
    beta: float
    relative_noise_power: float
    # intensity-sum noise relative to shot noise (anti-squeezed quadrature)
    sum_noise_power: float = 1.0


def squeezing_to_r(squeezing_db: float) -> float:
    """Squeezing parameter ``r`` with ``cosh(2r) = 10**(squeezing_db/10)``."""
    if not math.isfinite(squeezing_db) or squeezing_db < 0:
        raise ValueError("squeezing_db must be >= 0")
    return 0.5 * math.acosh(10.0 ** (squeezing_db / 10.0))


def r_to_squeezing_db(r: float) -> float:
    return 10.0 * math.log10(math.cosh(2.0 * r))


def _effective_cosh2r(source: LightSource, freq_hz: float | None) -> float:
    c = 10.0 ** (source.squeezing_db / 10.0)
    bw = source.squeezing_bandwidth_hz
    if bw is None or freq_hz is None:
        return c
    x = (freq_hz - source.squeezing_center_hz) / bw
    return 1.0 + (c - 1.0) / (1.0 + x * x)


def noise_budget(source: LightSource, freq_hz: float | None = None) -> NoiseBudget:
    if not source.is_squeezed:
        return NoiseBudget(beta=1.0, relative_noise_power=1.0, sum_noise_power=1.0)
    eta = source.transmission
    c = _effective_cosh2r(source, freq_hz)
    # clip guards the bounds 1/c <= R <= 1 against rounding
    R = min(1.0, max(1.0 / c, eta / c + (1.0 - eta)))
    anti = eta * c + (1.0 - eta)
    return NoiseBudget(beta=math.sqrt(R), relative_noise_power=R, sum_noise_power=anti)


def quantum_advantage_db(source: LightSource, freq_hz: float | None = None) -> float:
    R = noise_budget(source, freq_hz).relative_noise_power
    return 0.0 if R == 1.0 else -10.0 * math.log10(R)


def transmission_for_advantage(advantage_db: float, squeezing_db: float) -> float:
    """Transmission at which ``squeezing_db`` at the source yields ``advantage_db``."""
    if not 0 <= advantage_db <= squeezing_db:
        raise ValueError("advantage must lie between 0 and the source squeezing")
    if squeezing_db == 0:
        return 1.0
    R = 10.0 ** (-advantage_db / 10.0)
    return (1.0 - R) / (1.0 - 10.0 ** (-squeezing_db / 10.0))
