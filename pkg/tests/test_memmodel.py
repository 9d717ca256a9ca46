"""
Tests for cell failure curves and sampled chip instances
"""

import numpy as np
import pytest

from sramdp.bitcodec import Word
from sramdp.errors import ConfigError
from sramdp.memmodel import (
    C61_CALIBRATION,
    CellArea,
    CellSpec,
    FaultMap,
    apply_drift,
    failure_rate_at,
    nearest_voltage,
    sample_chip,
    sigma_vth,
    voltage_for_rate,
)

LAYOUT = (CellSpec.reliable(),) * 4 + (CellSpec.c61_6t(),) * 4


class TestFailureCurve:
    """Test interpolation over the calibration table"""

    def test_calibration_points(self):
        """Test that the curve passes through every calibration point"""
        spec = CellSpec.c61_6t()
        for voltage, rate in C61_CALIBRATION:
            assert failure_rate_at(spec, voltage) == pytest.approx(rate)

    def test_linear_between_points(self):
        """Test piecewise-linear interpolation"""
        assert failure_rate_at(CellSpec.c61_6t(), 0.525) == pytest.approx(0.7607)

    def test_outside_range(self):
        """Test that extrapolation is refused"""
        with pytest.raises(ConfigError, match="outside the calibrated range"):
            failure_rate_at(CellSpec.c61_6t(), 0.45)
        with pytest.raises(ConfigError):
            failure_rate_at(CellSpec.c61_6t(), 0.65)

    def test_inverse(self):
        """Test rate to voltage inversion"""
        spec = CellSpec.c61_6t()
        assert voltage_for_rate(spec, 0.7057) == pytest.approx(0.55)
        assert voltage_for_rate(spec, 0.7607) == pytest.approx(0.525)
        with pytest.raises(ConfigError):
            voltage_for_rate(spec, 0.9)
        with pytest.raises(ConfigError, match="never fails"):
            voltage_for_rate(CellSpec.reliable(), 0.1)

    def test_nearest_voltage(self):
        """Test snapping a target rate to a calibration point"""
        assert nearest_voltage(CellSpec.c61_6t(), 0.70) == (0.55, 0.7057)
        assert nearest_voltage(CellSpec.c61_6t(), 0.8159) == (0.50, 0.8157)

    def test_reliable_cells(self):
        """Test that reliable and 8T cells never fail"""
        assert failure_rate_at(CellSpec.reliable(), 1.0) == 0.0
        assert failure_rate_at(CellSpec.c81_8t(), 0.5) == 0.0
        assert CellSpec.from_preset("8t").never_fails


class TestCellSpecValidation:
    """Test calibration table validation"""

    def test_non_monotone_rates(self):
        """Test that failure rates must fall with voltage"""
        with pytest.raises(ConfigError, match="decrease"):
            CellSpec("custom", ((0.5, 0.3), (0.6, 0.4)))

    def test_descending_voltages(self):
        """Test that voltages must ascend"""
        with pytest.raises(ConfigError):
            CellSpec("custom", ((0.6, 0.3), (0.5, 0.4)))

    def test_reliable_with_failures(self):
        """Test that a reliable cell cannot fail"""
        with pytest.raises(ConfigError):
            CellSpec("reliable", ((0.5, 0.1), (0.6, 0.0)))

    def test_from_dict(self):
        """Test building specs from config data"""
        spec = CellSpec.from_dict({"kind": "lab", "calibration": [[0.4, 0.5], [0.6, 0.1]]})
        assert spec.kind == "lab"
        assert spec.voltage_range == (0.4, 0.6)
        assert CellSpec.from_dict("6t").kind == "6T-C61"
        with pytest.raises(ConfigError, match="unknown cell preset"):
            CellSpec.from_dict("9T")


class TestDeviceModels:
    """Test device-level helpers"""

    def test_sigma_vth(self):
        """Test mismatch scaling with device area"""
        assert sigma_vth(2.0, 1.0, 0.25) == pytest.approx(4.0)
        with pytest.raises(ConfigError):
            sigma_vth(2.0, 0.0, 0.25)

    def test_cell_area(self):
        """Test layout area from the shared cell height"""
        assert CellArea(1.523).area_um2 == pytest.approx(1.523 * 0.45)

    def test_apply_drift(self):
        """Test drift scaling and clamping"""
        assert apply_drift(0.5, 1.1) == pytest.approx(0.55)
        assert apply_drift(0.8, 1.5) == 1.0
        assert np.allclose(apply_drift(np.array([0.2, 0.9]), 2.0), [0.4, 1.0])
        with pytest.raises(ConfigError):
            apply_drift(0.5, -0.1)


class TestChipInstance:
    """Test sampled chips"""

    @pytest.fixture
    def chip(self):
        return sample_chip(LAYOUT, 5000, seed=11)

    def test_failure_fraction_matches_curve(self, chip):
        """Test that the share of failed 6T cells tracks the calibration"""
        assert abs(chip.failure_fraction(0.50) - 0.8157) < 0.015
        assert abs(chip.failure_fraction(0.60) - 0.6026) < 0.015

    def test_drifted_chip(self):
        """Test that a drifted chip fails more often than calibrated"""
        chip = sample_chip(LAYOUT, 5000, seed=11, alpha=1.1)
        assert abs(chip.failure_fraction(0.50) - 0.8157 * 1.1) < 0.015

    def test_reliable_positions_never_fail(self, chip):
        """Test that reliable cells stay intact at every voltage"""
        faults = chip.fault_matrix(0.50)
        assert not faults[:, :4].any()
        assert chip.failure_prone_positions() == (4, 5, 6, 7)

    def test_fault_inclusion(self, chip):
        """Test that cells failing at a higher voltage also fail at a lower one"""
        voltages = [0.50, 0.53, 0.55, 0.58, 0.60]
        for low, high in zip(voltages, voltages[1:]):
            assert np.all(chip.fault_matrix(low) | ~chip.fault_matrix(high))
        for word in range(20):
            assert chip.fault_map(word, 0.60).is_subset_of(chip.fault_map(word, 0.50))

    def test_same_seed_same_chip(self):
        """Test chip sampling is reproducible"""
        first = sample_chip(LAYOUT, 100, seed=3)
        second = sample_chip(LAYOUT, 100, seed=3)
        other = sample_chip(LAYOUT, 100, seed=4)

        assert np.array_equal(first.v_crit, second.v_crit)
        assert not np.array_equal(first.fault_matrix(0.55), other.fault_matrix(0.55))

    def test_chip_is_immutable(self, chip):
        """Test that critical voltages cannot be rewritten"""
        with pytest.raises(ValueError):
            chip.v_crit[0, 0] = 1.0

    def test_read_raw_fixed_output(self, chip):
        """Test that failed cells read back the fixed constant"""
        stored = Word.from_string("00000000")
        fmap = chip.fault_map(0, 0.50)
        readout = chip.read_raw(0, stored, 0.50)

        assert readout.bits == tuple(1 if bad else 0 for bad in fmap.failed)
        assert chip.word_profile(0, 0.50) == tuple(1.0 if bad else 0.0 for bad in fmap.failed)

    def test_voltage_outside_shared_range(self, chip):
        """Test that a chip is only queried where all its cells are calibrated"""
        with pytest.raises(ConfigError):
            chip.fault_matrix(1.0)
        with pytest.raises(ConfigError):
            chip.fault_map(5000, 0.5)

    def test_dump_fault_map(self):
        """Test the fault map dump format"""
        chip = sample_chip(LAYOUT, 3, seed=1)
        dump = chip.dump_fault_map(0.55)

        assert dump["voltage"] == 0.55
        assert dump["seed"] == 1
        assert dump["cells"] == ["reliable"] * 4 + ["6T-C61"] * 4
        assert dump["weak_words"] == []
        assert len(dump["words"]) == 3
        assert all(len(row) == 8 and set(row) <= {0, 1} for row in dump["words"])
        assert dump["words"] == chip.fault_matrix(0.55).astype(int).tolist()

    def test_measured_profile(self, chip):
        """Test per-cell rates averaged over words"""
        profile = chip.measured_profile(0.50)
        assert profile[:4] == (0.0, 0.0, 0.0, 0.0)
        assert all(abs(rate - 0.8157) < 0.03 for rate in profile[4:])

    def test_invalid_geometry(self):
        """Test chip size validation"""
        with pytest.raises(ConfigError):
            sample_chip(LAYOUT, 0, seed=1)
        with pytest.raises(ConfigError):
            sample_chip(LAYOUT, 10, seed=1, wordline_sigma=-0.1)


class TestWordlineVariation:
    """Test per-wordline critical-voltage offsets"""

    @pytest.fixture
    def chip(self):
        return sample_chip(LAYOUT, 5000, seed=11, wordline_sigma=0.15)

    def test_zero_sigma_keeps_cell_draws(self):
        """Test that a chip without offsets is the plain per-cell chip"""
        plain = sample_chip(LAYOUT, 200, seed=3)
        flat = sample_chip(LAYOUT, 200, seed=3, wordline_sigma=0.0)
        assert np.array_equal(plain.v_crit, flat.v_crit)

    def test_offset_shared_by_wordline(self, chip):
        """Test that every finite cell of a word moves by the same offset"""
        plain = sample_chip(LAYOUT, 5000, seed=11)
        shift = chip.v_crit[:, :4] - plain.v_crit[:, :4]
        assert np.allclose(shift, shift[:, :1])
        finite = np.isfinite(plain.v_crit[:, 4:])
        lsb_shift = chip.v_crit[:, 4:][finite] - plain.v_crit[:, 4:][finite]
        assert np.allclose(lsb_shift, np.broadcast_to(shift[:, :1], finite.shape)[finite])
        assert np.isinf(chip.v_crit[:, 4:][~finite]).all()

    def test_weak_wordlines_lose_reliable_cells(self, chip):
        """Test that words past the reliable margin fail in every cell"""
        weak = chip.weak_words(0.50)
        faults = chip.fault_matrix(0.50)

        # P(offset > 0.20 V) for a 0.15 V spread is about 9%
        assert 0.06 < weak.size / chip.words < 0.12
        assert faults[weak].all()
        others = np.setdiff1d(np.arange(chip.words), weak)
        assert not faults[others][:, :4].any()

    def test_word_rates_spread(self, chip):
        """Test that per-word failure counts vary more than with independent cells"""
        plain = sample_chip(LAYOUT, 5000, seed=11)
        spread = chip.fault_matrix(0.50)[:, 4:].sum(axis=1).var()
        baseline = plain.fault_matrix(0.50)[:, 4:].sum(axis=1).var()
        assert spread > 1.3 * baseline

    def test_fault_inclusion_survives_offsets(self, chip):
        """Test that offsets keep failures nested across voltages"""
        assert np.all(chip.fault_matrix(0.50) | ~chip.fault_matrix(0.60))

    def test_reliable_only_chip(self):
        """Test that reliable cells hold down to their floor without offsets"""
        chip = sample_chip((CellSpec.reliable(),) * 2, 50, seed=1)
        assert not chip.fault_matrix(0.30).any()
        assert chip.weak_words(0.30).size == 0


def test_fault_map_counts():
    """Test FaultMap helpers"""
    fmap = FaultMap((False, True, True))
    assert fmap.z == 2
    assert fmap.positions == (1, 2)
    assert not fmap.is_subset_of(FaultMap((False, True, False)))
