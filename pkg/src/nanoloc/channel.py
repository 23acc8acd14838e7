"""THz link budget: received power from spreading and absorption losses.

Received power in dBm over a line-of-sight distance d at frequency f:

    P_rx = P_tx - k(f) * d * 10*log10(e) - 20*log10(4 * pi * f * d / c)

where k(f) is the molecular absorption coefficient of the medium in 1/m,
interpolated from a frequency table.  A signal is received when P_rx is
at or above the receiver sensitivity.  The shipped default is a lossless
medium (k = 0 at all frequencies).

Also provides the raw ranging resolution c / B of a link of bandwidth B,
which doubles as the standard deviation of time-of-flight distance noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT_M_S = 2.99792458e8

# Converts an absorption exponent k*d (nepers) to decibels.
DB_PER_NEPER = 10.0 * math.log10(math.e)

#: (frequency_hz, k_per_m) pairs, strictly increasing in frequency.
AbsorptionTable = tuple[tuple[float, float], ...]

DEFAULT_ABSORPTION_TABLE: AbsorptionTable = ((1e12, 0.0),)


def _validate_table(table: AbsorptionTable) -> None:
    if len(table) == 0:
        raise ValueError("absorption table must not be empty")
    freqs = [f for f, _ in table]
    if any(f2 <= f1 for f1, f2 in zip(freqs, freqs[1:])):
        raise ValueError("absorption table frequencies must be strictly increasing")
    if any(k < 0 or not math.isfinite(k) for _, k in table):
        raise ValueError("absorption coefficients must be finite and >= 0")


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget parameters shared by both directions of an exchange."""

    transmit_power_dbm: float
    frequency_hz: float
    bandwidth_hz: float
    receiver_sensitivity_dbm: float
    absorption_table: AbsorptionTable = DEFAULT_ABSORPTION_TABLE

    def __post_init__(self) -> None:
        if not (math.isfinite(self.frequency_hz) and self.frequency_hz > 0):
            raise ValueError("frequency_hz must be strictly positive")
        if not (math.isfinite(self.bandwidth_hz) and self.bandwidth_hz > 0):
            raise ValueError("bandwidth_hz must be strictly positive")
        if not math.isfinite(self.receiver_sensitivity_dbm):
            raise ValueError("receiver_sensitivity_dbm must be finite")
        if not math.isfinite(self.transmit_power_dbm):
            raise ValueError("transmit_power_dbm must be finite")
        object.__setattr__(self, "absorption_table",
                           tuple((float(f), float(k))
                                 for f, k in self.absorption_table))
        _validate_table(self.absorption_table)


@dataclass(frozen=True)
class LinkBudgetResult:
    """Loss decomposition of one link direction at one distance."""

    received_power_dbm: float
    spreading_loss_db: float
    absorption_loss_db: float
    received: bool


def absorption_coefficient(frequency_hz: float,
                           table: AbsorptionTable) -> float:
    """Absorption coefficient k(f) in 1/m, piecewise-linear in frequency.

    Clamped to the nearest endpoint outside the table's range; a
    single-entry table acts as a constant.
    """
    _validate_table(tuple(table))
    freqs = [f for f, _ in table]
    ks = [k for _, k in table]
    return float(np.interp(frequency_hz, freqs, ks))


def received_power(params: ChannelParams, distance_m: float) -> LinkBudgetResult:
    """Link budget for one direction over distance_m.

    Reception is inclusive at the boundary: a signal exactly at the
    sensitivity counts as received.
    """
    if not distance_m > 0:
        raise ValueError("distance_m must be strictly positive")
    k = absorption_coefficient(params.frequency_hz, params.absorption_table)
    spreading_db = 20.0 * math.log10(
        4.0 * math.pi * params.frequency_hz * distance_m / SPEED_OF_LIGHT_M_S)
    absorption_db = k * distance_m * DB_PER_NEPER
    rx_dbm = params.transmit_power_dbm - spreading_db - absorption_db
    return LinkBudgetResult(
        received_power_dbm=rx_dbm,
        spreading_loss_db=spreading_db,
        absorption_loss_db=absorption_db,
        received=rx_dbm >= params.receiver_sensitivity_dbm,
    )


def received_power_batch(params: ChannelParams,
                         distances_m: np.ndarray
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized twin of received_power over an array of distances.

    Returns (received_power_dbm, received) arrays of the input shape.
    """
    d = np.asarray(distances_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distances must be strictly positive")
    k = absorption_coefficient(params.frequency_hz, params.absorption_table)
    spreading_db = 20.0 * np.log10(
        4.0 * math.pi * params.frequency_hz * d / SPEED_OF_LIGHT_M_S)
    rx_dbm = params.transmit_power_dbm - spreading_db - k * d * DB_PER_NEPER
    return rx_dbm, rx_dbm >= params.receiver_sensitivity_dbm


def raw_resolution(bandwidth_hz: float) -> float:
    """Distance quantum c / B of a link sampled at bandwidth B, in meters."""
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth_hz must be strictly positive")
    return SPEED_OF_LIGHT_M_S / bandwidth_hz


def load_absorption_table(path: str | Path) -> AbsorptionTable:
    """Read an absorption table CSV with header ``frequency_hz,k_per_m``.

    UTF-8, '.' decimal separator, one (frequency, coefficient) pair per
    row, frequencies strictly increasing.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: absorption table is empty") from None
        if [col.strip() for col in header] != ["frequency_hz", "k_per_m"]:
            raise ValueError(
                f"{path}: expected header 'frequency_hz,k_per_m', got {header!r}")
        rows: list[tuple[float, float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value {row!r}") from None
    table = tuple(rows)
    try:
        _validate_table(table)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return table
