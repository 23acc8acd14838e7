"""Battery-less harvest/consume lifecycle of a nanonode.

A node stores energy in a capacitor charged by a piezoelectric harvester.
Each compress-and-release cycle delivers a fixed charge toward the
generator voltage, so the stored energy after ``n`` whole cycles from
empty follows an exponential saturation curve

    E(n) = E_max * (1 - exp(-dQ * n / (V_g * C_cap)))^2

with ``C_cap = 2 * E_max / V_g^2``.  The curve is invertible, which lets
harvesting resume from an arbitrary energy level after consumption by
mapping the current energy back to its cycle position.

A node turns off when its energy falls below the turn-off threshold and
turns back on once it has recharged past the turn-on threshold
(hysteresis).  Energy bookkeeping is in picojoules; times in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Tolerates a 1-ulp division error when converting elapsed time to cycles
# (e.g. 0.3 / 0.1 == 2.999...96 must still count as 3 whole cycles).
_CYCLE_COUNT_EPS = 1e-9

# Relative slack for snapping a cycle position to a whole cycle.  Float
# roundoff in the closed-form inverse reaches ~1e-6 cycles near n = 1e4;
# the snap keeps cycle_index an exact inverse of energy_at_cycle there.
_INDEX_SNAP_REL = 1e-9


class EnergySaturationError(ValueError):
    """Cycle index requested at or above full storage, where it diverges."""


@dataclass(frozen=True)
class HarvesterParams:
    """Harvester and storage parameters of one nanonode.

    turn_on_threshold_pj below turn_off_threshold_pj collapses the
    hysteresis to a single operational floor at the turn-off value
    (see effective_turn_on_pj).
    """

    generator_voltage_v: float
    max_storage_pj: float
    charge_per_cycle_pc: float
    cycle_duration_s: float
    turn_off_threshold_pj: float
    turn_on_threshold_pj: float

    def __post_init__(self) -> None:
        for name in ("generator_voltage_v", "max_storage_pj",
                     "charge_per_cycle_pc", "cycle_duration_s",
                     "turn_off_threshold_pj"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive")
        if not (math.isfinite(self.turn_on_threshold_pj)
                and self.turn_on_threshold_pj >= 0):
            raise ValueError("turn_on_threshold_pj must be >= 0")
        if not self.turn_off_threshold_pj < self.max_storage_pj:
            raise ValueError(
                "turn_off_threshold_pj must be below max_storage_pj")
        cap = self.capacitance_f
        if not (math.isfinite(cap) and cap > 0):
            raise ValueError("derived capacitance must be finite and positive")

    @property
    def capacitance_f(self) -> float:
        """Storage capacitance C_cap = 2 * E_max / V_g^2, in farads."""
        return (2.0 * self.max_storage_pj * 1e-12
                / self.generator_voltage_v ** 2)

    @property
    def cycle_exponent(self) -> float:
        """Per-cycle decay rate dQ / (V_g * C_cap) of the charging curve."""
        return (self.charge_per_cycle_pc * 1e-12
                / (self.generator_voltage_v * self.capacitance_f))

    @property
    def effective_turn_on_pj(self) -> float:
        """Turn-on level actually applied; never below the turn-off level."""
        return max(self.turn_on_threshold_pj, self.turn_off_threshold_pj)


@dataclass(frozen=True)
class EnergyState:
    """Stored energy plus the operational (hysteresis) flag.

    A small value type: all operations return new instances, so states can
    be shared freely across threads.
    """

    energy_pj: float
    operational: bool


def capacitance(params: HarvesterParams) -> float:
    """Storage capacitance in farads (inputs converted from pJ)."""
    return params.capacitance_f


def cycle_index(energy_pj: float, params: HarvesterParams) -> int:
    """Harvesting cycle corresponding to a stored energy level.

    Inverts the charging curve:

        n = ceil(-(V_g * C_cap / dQ) * ln(1 - sqrt(E / E_max)))

    Positions within float roundoff of a whole cycle snap to it, so this
    is an exact inverse of energy_at_cycle on the curve's own values.
    """
    if energy_pj < 0:
        raise ValueError("energy_pj must be non-negative")
    if energy_pj >= params.max_storage_pj:
        raise EnergySaturationError(
            "cycle index diverges at or above max_storage_pj")
    x = (-math.log(1.0 - math.sqrt(energy_pj / params.max_storage_pj))
         / params.cycle_exponent)
    nearest = round(x)
    if abs(x - nearest) <= _INDEX_SNAP_REL * max(1.0, abs(x)):
        return max(int(nearest), 0)
    return max(math.ceil(x), 0)


def energy_at_cycle(n_cycle: int, params: HarvesterParams) -> float:
    """Stored energy (pJ) after n whole harvesting cycles from empty.

    Strictly increasing in n and bounded above by max_storage_pj, which it
    approaches asymptotically.
    """
    if n_cycle < 0:
        raise ValueError("n_cycle must be >= 0")
    charged = 1.0 - math.exp(-params.cycle_exponent * n_cycle)
    return params.max_storage_pj * charged * charged


def harvest(state: EnergyState, elapsed_s: float,
            params: HarvesterParams) -> EnergyState:
    """Advance the charging curve by the whole cycles within elapsed_s.

    Fractional cycle remainders are discarded.  Harvesting applies whether
    or not the node is operational; the flag turns back on once the energy
    reaches the effective turn-on threshold.  Zero whole cycles leave the
    state unchanged.
    """
    if elapsed_s < 0:
        raise ValueError("elapsed_s must be >= 0")
    cycles = int(math.floor(elapsed_s / params.cycle_duration_s
                            + _CYCLE_COUNT_EPS))
    if cycles == 0:
        return state
    if state.energy_pj >= params.max_storage_pj:
        energy = params.max_storage_pj
    else:
        n = cycle_index(state.energy_pj, params) + cycles
        energy = min(energy_at_cycle(n, params), params.max_storage_pj)
    operational = state.operational or energy >= params.effective_turn_on_pj
    return EnergyState(energy, operational)


def consume(state: EnergyState, amount_pj: float,
            params: HarvesterParams) -> EnergyState:
    """Debit amount_pj, clamping at zero.

    Falling below the turn-off threshold trips the operational flag.
    Feasibility is the caller's job (can_afford); consume itself is total.
    """
    if amount_pj < 0:
        raise ValueError("amount_pj must be >= 0")
    energy = max(0.0, state.energy_pj - amount_pj)
    operational = state.operational and energy >= params.turn_off_threshold_pj
    return EnergyState(energy, operational)


def can_afford(state: EnergyState, amount_pj: float) -> bool:
    """True when the node is operational and holds at least amount_pj.

    No safety margin is applied: drawing the full stored energy is allowed
    and the turn-off threshold check happens after consumption.
    """
    if amount_pj < 0:
        raise ValueError("amount_pj must be >= 0")
    return state.operational and state.energy_pj >= amount_pj


def harvest_batch(energy_pj: np.ndarray, operational: np.ndarray,
                  elapsed_s: float, params: HarvesterParams
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized twin of harvest() over node arrays.

    Returns new (energy, operational) arrays; inputs are not modified.
    Matches the scalar semantics per element (up to float ulp differences
    between libm and numpy transcendentals).
    """
    if elapsed_s < 0:
        raise ValueError("elapsed_s must be >= 0")
    energy = np.asarray(energy_pj, dtype=np.float64)
    operational = np.asarray(operational, dtype=bool)
    cycles = int(math.floor(elapsed_s / params.cycle_duration_s
                            + _CYCLE_COUNT_EPS))
    if cycles == 0:
        return energy.copy(), operational.copy()
    e_max = params.max_storage_pj
    rate = params.cycle_exponent
    out = np.full_like(energy, e_max)
    charging = energy < e_max
    if np.any(charging):
        e = energy[charging]
        x = -np.log(1.0 - np.sqrt(np.maximum(e, 0.0) / e_max)) / rate
        nearest = np.rint(x)
        snap = np.abs(x - nearest) <= _INDEX_SNAP_REL * np.maximum(1.0, np.abs(x))
        n = np.where(snap, nearest, np.ceil(x))
        n = np.maximum(n, 0.0) + cycles
        charged = 1.0 - np.exp(-rate * n)
        out[charging] = np.minimum(e_max * charged * charged, e_max)
    turned_on = operational | (out >= params.effective_turn_on_pj)
    return out, turned_on
