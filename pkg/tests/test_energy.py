"""Energy module: charging-curve closed forms, thresholds, hysteresis."""

import math

import numpy as np
import pytest

from nanoloc.energy import (EnergySaturationError, EnergyState, HarvesterParams,
                            can_afford, capacitance, consume, cycle_index,
                            energy_at_cycle, harvest, harvest_batch)


def default_params(**overrides):
    base = dict(
        generator_voltage_v=0.42,
        max_storage_pj=800.0,
        charge_per_cycle_pc=6.0,
        cycle_duration_s=0.02,
        turn_off_threshold_pj=10.0,
        turn_on_threshold_pj=0.0,
    )
    base.update(overrides)
    return HarvesterParams(**base)


PARAMS = default_params()


class TestCapacitance:
    def test_default_value(self):
        # Oracle: 2 * 800e-12 / 0.42**2, evaluated independently.
        assert capacitance(PARAMS) == pytest.approx(9.0702947845805e-09, rel=1e-12)
        assert abs(capacitance(PARAMS) - 9.0703e-9) < 1e-13

    def test_algebraic_inverse(self):
        # Choosing E_max = C * V^2 / 2 must return exactly that C.
        for cap, volts in [(5e-9, 0.7), (1.2e-8, 0.3), (9.3e-10, 1.1)]:
            e_max_pj = 0.5 * cap * volts ** 2 * 1e12
            params = default_params(generator_voltage_v=volts,
                                    max_storage_pj=e_max_pj,
                                    turn_off_threshold_pj=e_max_pj / 100)
            assert capacitance(params) == pytest.approx(cap, rel=1e-12)

    def test_linear_in_storage(self):
        half = default_params(max_storage_pj=400.0)
        assert capacitance(half) == pytest.approx(4.53514739229025e-09, rel=1e-12)
        assert capacitance(half) == pytest.approx(capacitance(PARAMS) / 2, rel=1e-12)


class TestCycleIndex:
    def test_empty_storage(self):
        assert cycle_index(0.0, PARAMS) == 0

    def test_default_midpoint(self):
        # Independent oracle: direct evaluation of the closed-form inverse.
        expected = math.ceil(
            -(0.42 * 9.0702947845805e-09 / 6e-12)
            * math.log(1 - math.sqrt(400.0 / 800.0)))
        assert expected == 780
        assert cycle_index(400.0, PARAMS) == 780

    def test_round_trip_with_curve(self):
        for k in [1, 2, 3, 7, 50, 780, 9999, 10000]:
            assert cycle_index(energy_at_cycle(k, PARAMS), PARAMS) == k

    def test_round_trip_other_params(self):
        params = default_params(charge_per_cycle_pc=2.0, max_storage_pj=500.0,
                                generator_voltage_v=0.9)
        for k in [1, 13, 444, 6021]:
            assert cycle_index(energy_at_cycle(k, params), params) == k

    def test_saturation_raises(self):
        with pytest.raises(EnergySaturationError):
            cycle_index(800.0, PARAMS)
        with pytest.raises(EnergySaturationError):
            cycle_index(801.0, PARAMS)

    def test_negative_raises(self):
        with pytest.raises(ValueError):
            cycle_index(-1e-9, PARAMS)


class TestEnergyAtCycle:
    def test_zero_cycles(self):
        assert energy_at_cycle(0, PARAMS) == 0.0

    def test_first_cycle(self):
        # Frozen from an independent evaluation of the charging curve with
        # per-cycle exponent 6e-12 / (0.42 * 9.0703e-9) ~= 1.575e-3.
        assert PARAMS.cycle_exponent == pytest.approx(1.575e-3, rel=1e-12)
        assert energy_at_cycle(1, PARAMS) == pytest.approx(1.98137728219616e-3,
                                                           rel=1e-12)

    def test_asymptote_is_storage_capacity(self):
        assert abs(energy_at_cycle(10_000_000, PARAMS) - 800.0) < 1e-6 * 800.0

    def test_strictly_increasing_and_bounded(self):
        previous = -1.0
        for k in range(0, 5000, 37):
            value = energy_at_cycle(k, PARAMS)
            assert value > previous
            assert value < 800.0
            previous = value

    def test_negative_raises(self):
        with pytest.raises(ValueError):
            energy_at_cycle(-1, PARAMS)


class TestHarvest:
    def test_zero_elapsed_is_identity(self):
        state = EnergyState(123.4, True)
        assert harvest(state, 0.0, PARAMS) == state
        assert harvest(state, 0.0199, PARAMS) == state  # sub-cycle remainder

    def test_full_storage_saturates(self):
        state = EnergyState(800.0, True)
        out = harvest(state, 12.34, PARAMS)
        assert out.energy_pj == 800.0
        assert out.operational

    def test_five_cycles_from_empty(self):
        out = harvest(EnergyState(0.0, False), 0.1, PARAMS)
        assert out.energy_pj == pytest.approx(energy_at_cycle(5, PARAMS), rel=1e-12)
        assert out.energy_pj == pytest.approx(0.0492235902924877, rel=1e-12)

    def test_whole_cycle_division_is_robust(self):
        # 0.3 / 0.1 rounds below 3.0 in binary floats; three cycles must
        # still be credited.
        params = default_params(cycle_duration_s=0.1)
        out = harvest(EnergyState(0.0, False), 0.3, params)
        assert out.energy_pj == pytest.approx(energy_at_cycle(3, params), rel=1e-12)

    def test_turn_on_at_threshold(self):
        params = default_params(turn_on_threshold_pj=50.0)
        state = EnergyState(energy_at_cycle(100, params), False)
        out = harvest(state, 200 * params.cycle_duration_s, params)
        if out.energy_pj >= 50.0:
            assert out.operational

    def test_never_decreases_energy(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            energy = float(rng.uniform(0, 800))
            elapsed = float(rng.uniform(0, 1.0))
            out = harvest(EnergyState(energy, True), elapsed, PARAMS)
            assert out.energy_pj >= energy - 1e-12
            assert out.energy_pj <= 800.0

    def test_negative_elapsed_raises(self):
        with pytest.raises(ValueError):
            harvest(EnergyState(0.0, False), -0.1, PARAMS)


class TestConsume:
    def test_plain_debit(self):
        out = consume(EnergyState(100.0, True), 4.4, PARAMS)
        assert out.energy_pj == pytest.approx(95.6, abs=1e-12)
        assert out.operational

    def test_turn_off_threshold(self):
        out = consume(EnergyState(12.0, True), 4.4, PARAMS)
        assert out.energy_pj == pytest.approx(7.6, abs=1e-12)
        assert not out.operational

    def test_clamps_at_zero(self):
        out = consume(EnergyState(3.0, True), 5.0, PARAMS)
        assert out.energy_pj == 0.0
        assert not out.operational

    def test_boundary_is_strictly_below(self):
        out = consume(EnergyState(14.4, True), 4.4, PARAMS)
        assert out.energy_pj == pytest.approx(10.0, abs=1e-12)
        assert out.operational

    def test_never_increases_energy(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            energy = float(rng.uniform(0, 800))
            amount = float(rng.uniform(0, 20))
            out = consume(EnergyState(energy, True), amount, PARAMS)
            assert out.energy_pj <= energy
            assert out.energy_pj >= 0.0

    def test_negative_amount_raises(self):
        with pytest.raises(ValueError):
            consume(EnergyState(10.0, True), -1.0, PARAMS)


class TestCanAfford:
    def test_ample_energy(self):
        assert can_afford(EnergyState(800.0, True), 4.4)

    def test_not_operational(self):
        assert not can_afford(EnergyState(800.0, False), 0.1)

    def test_exact_amount_is_affordable(self):
        # Spending the full store is allowed; the threshold check comes
        # after consumption.
        assert can_afford(EnergyState(4.4, True), 4.4)

    def test_insufficient(self):
        assert not can_afford(EnergyState(4.3, True), 4.4)


class TestHysteresis:
    def test_off_until_turn_on(self):
        params = default_params(turn_on_threshold_pj=100.0)
        state = EnergyState(50.0, True)
        state = consume(state, 45.0, params)  # 5 pJ, below turn-off
        assert not state.operational
        # Recharge in steps; must stay off until reaching 100 pJ.
        while state.energy_pj < 100.0:
            state = harvest(state, params.cycle_duration_s * 10, params)
            if state.energy_pj < 100.0:
                assert not state.operational
        assert state.operational

    def test_collapsed_hysteresis_uses_turn_off_floor(self):
        # Default turn-on (0) below turn-off (10) collapses to a single
        # 10 pJ operational floor.
        assert PARAMS.effective_turn_on_pj == 10.0
        state = consume(EnergyState(12.0, True), 4.4, PARAMS)
        assert not state.operational
        state = harvest(state, 40 * PARAMS.cycle_duration_s, PARAMS)
        assert state.energy_pj >= 10.0
        assert state.operational

    def test_random_interleaving_respects_bounds(self):
        rng = np.random.default_rng(7)
        state = EnergyState(400.0, True)
        for _ in range(500):
            if rng.random() < 0.5:
                state = consume(state, float(rng.uniform(0, 10)), PARAMS)
            else:
                state = harvest(state, float(rng.uniform(0, 0.3)), PARAMS)
            assert 0.0 <= state.energy_pj <= 800.0
            if state.operational:
                assert state.energy_pj >= 0.0


class TestParamValidation:
    def test_rejects_nonpositive_fields(self):
        with pytest.raises(ValueError):
            default_params(generator_voltage_v=0.0)
        with pytest.raises(ValueError):
            default_params(max_storage_pj=-1.0)
        with pytest.raises(ValueError):
            default_params(cycle_duration_s=0.0)

    def test_rejects_turn_off_at_capacity(self):
        with pytest.raises(ValueError):
            default_params(turn_off_threshold_pj=800.0)

    def test_rejects_negative_turn_on(self):
        with pytest.raises(ValueError):
            default_params(turn_on_threshold_pj=-1.0)


class TestHarvestBatch:
    def test_matches_scalar(self):
        rng = np.random.default_rng(8)
        energies = np.concatenate([
            rng.uniform(0, 800, size=120),
            np.array([0.0, 800.0, 9.99, 10.0]),
        ])
        flags = rng.random(energies.size) < 0.5
        for elapsed in [0.0, 0.02, 0.1, 0.37]:
            batch_e, batch_op = harvest_batch(energies, flags, elapsed, PARAMS)
            for i in range(energies.size):
                scalar = harvest(EnergyState(float(energies[i]), bool(flags[i])),
                                 elapsed, PARAMS)
                assert batch_e[i] == pytest.approx(scalar.energy_pj, abs=1e-9)
                assert bool(batch_op[i]) == scalar.operational

    def test_inputs_not_modified(self):
        energies = np.array([5.0, 700.0])
        flags = np.array([False, True])
        harvest_batch(energies, flags, 0.5, PARAMS)
        assert energies.tolist() == [5.0, 700.0]
        assert flags.tolist() == [False, True]
