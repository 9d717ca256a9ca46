"""
Tests for the value-perturbation PMF, the l1 bound and the UL meter
"""

import numpy as np
import pytest

from sramdp.bitcodec import encode
from sramdp.errors import ConfigError, SizeGuardError
from sramdp.harness import named_pattern
from sramdp.mechanism import FailureProfile, MechanismConfig, perturb_many, stage_rng
from sramdp.utility import (
    delta_pmf,
    delta_pmf_bruteforce,
    expected_l1,
    l1_bound_homogeneous,
    mean_ul,
    pmf_mean,
    pmf_summary,
    ul_meter,
    ul_values,
)


class TestDeltaPmf:
    """Test the exact distribution of O - X"""

    def test_single_bit(self):
        """Test the one-bit base case"""
        pmf = delta_pmf(FailureProfile((0.5,)))
        assert pmf.probs.tolist() == [0.125, 0.75, 0.125]

    def test_three_bits(self):
        """Test P(delta = 5) for three half-failing bits"""
        pmf = delta_pmf(FailureProfile((0.5, 0.5, 0.5)))
        assert pmf.prob(5) == pytest.approx(0.013671875)
        assert pmf.prob(8) == 0.0

    def test_matches_bruteforce(self):
        """Test the recursion against full enumeration"""
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(1, 11))
            f = FailureProfile(tuple(rng.uniform(0, 1, size=n)))
            pmf = delta_pmf(f)
            assert pmf.total_variation(delta_pmf_bruteforce(f)) < 1e-12
            assert np.allclose(pmf.probs, pmf.probs[::-1], atol=1e-15)
            assert abs(pmf_mean(pmf)) < 1e-9

    def test_symmetric_zero_mean(self):
        """Test that the PMF is symmetric around zero"""
        pmf = delta_pmf(FailureProfile((0.1, 0.9, 0.3, 0.7, 0.5)))
        assert np.array_equal(pmf.probs, pmf.probs[::-1])
        assert abs(pmf_mean(pmf)) < 1e-10
        assert pmf.probs.sum() == pytest.approx(1.0)

    def test_point_mass_without_failures(self):
        """Test that f = 0 never perturbs"""
        pmf = delta_pmf_bruteforce(FailureProfile.zeros(4))
        assert pmf.prob(0) == 1.0
        assert expected_l1(FailureProfile.zeros(4)) == 0.0

    def test_width_guards(self):
        """Test size limits of exact computations"""
        with pytest.raises(SizeGuardError):
            delta_pmf_bruteforce(FailureProfile((0.5,) * 13))
        with pytest.raises(SizeGuardError):
            delta_pmf(FailureProfile((0.5,) * 21))

    def test_summary(self):
        """Test the PMF summary fields"""
        summary = pmf_summary(delta_pmf(FailureProfile((0.5,))))
        assert summary["expected_l1"] == pytest.approx(0.25)
        assert summary["total"] == pytest.approx(1.0)


class TestL1Bound:
    """Test the homogeneous expected-loss bound"""

    def test_single_bit_value(self):
        """Test the bound at n = 1, f = 0.5"""
        assert l1_bound_homogeneous(0.5, 1) == pytest.approx(1.75)
        assert expected_l1(FailureProfile((0.5,))) == pytest.approx(0.25)

    def test_bound_holds(self):
        """Test expected_l1 <= bound over random homogeneous profiles"""
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            f = float(rng.uniform(0.01, 1.0))
            assert expected_l1(FailureProfile((f,) * n)) <= l1_bound_homogeneous(f, n)

    def test_domain(self):
        """Test bound argument validation"""
        with pytest.raises(ConfigError):
            l1_bound_homogeneous(1.5, 3)
        with pytest.raises(ConfigError):
            l1_bound_homogeneous(0.5, 0)

    def test_pattern_ordering(self):
        """Test that failures on higher bits cost more at the same budget"""
        losses = [expected_l1(named_pattern(name, np.log(3))) for name in ("F1", "F2", "F3")]
        assert losses[0] < losses[1] < losses[2]

    def test_matches_monte_carlo(self):
        """Test expected_l1 of the F1 pattern against simulated |O - X|"""
        f = named_pattern("F1", np.log(3))
        count = 1_000_000
        values = stage_rng(4, "data").integers(0, 256, size=count)
        batch = perturb_many(values, MechanismConfig.from_rates(f.f), 4)
        losses = np.abs(batch.outputs - values)

        sigma = losses.std() / np.sqrt(count)
        assert abs(losses.mean() - expected_l1(f)) < 3 * sigma


class TestUtilityLoss:
    """Test the UL meter"""

    def test_single_bit(self):
        """Test UL of one half-failing bit"""
        assert ul_meter(encode(1, 1), FailureProfile((0.5,))) == pytest.approx(0.25)

    def test_no_failures(self):
        """Test that UL vanishes without failures"""
        assert ul_meter(encode(77, 8), FailureProfile.zeros(8)) == 0.0

    def test_average_equals_expected_l1(self):
        """Test that UL averaged over all inputs equals expected_l1"""
        f = FailureProfile((0.0, 0.1, 0.0, 0.3, 0.5, 0.2, 0.9, 0.6))
        mean, _ = mean_ul(np.arange(256), f)
        assert mean == pytest.approx(expected_l1(f), abs=1e-9)

    def test_per_value_vectorization(self):
        """Test that repeated values reuse one computation"""
        f = FailureProfile((0.0,) * 4 + (0.8,) * 4)
        values = ul_values([10, 200, 10], f)
        assert values[0] == values[2]
        assert values[1] == pytest.approx(ul_meter(encode(200, 8), f))

    def test_width_mismatch(self):
        """Test input/profile width validation"""
        with pytest.raises(ConfigError):
            ul_meter(encode(1, 2), FailureProfile((0.5,)))
