"""
Tests for words, permutation patterns, candidate sets and the LFSR
"""

from fractions import Fraction

import numpy as np
import pytest

from sramdp.bitcodec import (
    HARDWARE_PATTERNS,
    CandidateSet,
    GeneratorBitSource,
    LfsrBitSource,
    LfsrState,
    PatternSelector,
    PermPattern,
    PermSet,
    Word,
    apply_permutation,
    decode,
    decode_array,
    encode,
    encode_array,
    invert_permutation,
    lfsr_bits,
    lfsr_next,
)
from sramdp.errors import ConfigError


class TestWordCodec:
    """Test MSB-first encoding"""

    def test_encode_msb_first(self):
        """Test that bit 0 is the most significant bit"""
        assert str(encode(245, 8)) == "11110101"
        assert str(encode(1, 4)) == "0001"
        assert decode(Word.from_string("10101001")) == 169

    def test_encode_out_of_range(self):
        """Test values outside [0, 2^n) are rejected"""
        with pytest.raises(ConfigError):
            encode(256, 8)
        with pytest.raises(ConfigError):
            encode(-1, 8)
        with pytest.raises(ConfigError):
            encode_array([3, 300], 8)

    def test_array_codec_matches_scalar(self):
        """Test the vectorized codec agrees with encode/decode"""
        values = np.array([0, 7, 128, 245, 255])
        bits = encode_array(values, 8)

        assert bits.shape == (5, 8)
        assert [str(Word.from_bits(row)) for row in bits] == [str(encode(int(v), 8)) for v in values]
        assert decode_array(bits).tolist() == values.tolist()

    def test_word_validation(self):
        """Test malformed words"""
        with pytest.raises(ConfigError):
            Word(3, (1, 0))
        with pytest.raises(ConfigError):
            Word.from_string("1021")
        with pytest.raises(ConfigError):
            Word(0, ())


class TestPermutations:
    """Test the shuffle patterns"""

    def test_hardware_shuffle_traces(self):
        """Test the two shuffles observed on the fabricated design"""
        pi2 = PermPattern(HARDWARE_PATTERNS[1])
        pi3 = PermPattern(HARDWARE_PATTERNS[2])

        assert str(apply_permutation(Word.from_string("11110101"), pi2)) == "11111010"
        assert str(apply_permutation(Word.from_string("10101001"), pi3)) == "10100110"

    def test_invert_restores_input(self):
        """Test that unshuffling undoes every hardware pattern"""
        word = Word.from_string("10110010")
        for mapping in HARDWARE_PATTERNS:
            pattern = PermPattern(mapping)
            assert invert_permutation(apply_permutation(word, pattern), pattern) == word

    def test_non_bijective_pattern(self):
        """Test that repeated sources are rejected"""
        with pytest.raises(ConfigError, match="not a permutation"):
            PermPattern((0, 0, 1))

    def test_width_mismatch(self):
        """Test that a pattern only applies to words of its width"""
        with pytest.raises(ConfigError):
            apply_permutation(Word.from_string("101"), PermPattern((1, 0)))


class TestPermSet:
    """Test weighted pattern sets"""

    def test_default_mapping_matrix(self):
        """Test that the hardware patterns spread each LSB uniformly over the LSB cells"""
        matrix = PermSet.default().mapping_matrix()

        assert np.allclose(matrix.sum(axis=0), 1.0)
        assert np.allclose(matrix.sum(axis=1), 1.0)
        assert np.allclose(matrix[:4, :4], np.eye(4))
        assert np.allclose(matrix[4:, 4:], 0.25)
        assert np.allclose(matrix[:4, 4:], 0.0)

    def test_exact_mapping_matrix(self):
        """Test the rational form of the mapping matrix"""
        exact = PermSet.default().exact_mapping_matrix()

        assert exact[4][7] == Fraction(1, 4)
        assert exact[0][0] == Fraction(1)
        assert all(sum(row) == 1 for row in exact)

    def test_weights_must_sum_to_one(self):
        """Test weight validation"""
        with pytest.raises(ConfigError):
            PermSet((PermPattern((0, 1)), PermPattern((1, 0))), (0.5, 0.4))
        with pytest.raises(ConfigError):
            PermSet((PermPattern((0, 1)), PermPattern((1, 0, 2))), (0.5, 0.5))

    def test_from_dict_round_trip(self):
        """Test loading a pattern set from config data"""
        data = {"width": 3, "patterns": [[0, 1, 2], [2, 1, 0]], "weights": [0.75, 0.25]}
        permset = PermSet.from_dict(data)

        assert permset.width == 3
        assert not permset.is_uniform
        assert permset.to_dict() == data

    def test_from_json_file(self, tmp_path):
        """Test loading patterns from a JSON file"""
        path = tmp_path / "patterns.json"
        path.write_text('{"patterns": [[0, 1], [1, 0]]}')

        permset = PermSet.from_json_file(path)
        assert permset.is_uniform
        assert permset.weights == (0.5, 0.5)


class TestCandidateSet:
    """Test candidate value sets"""

    def test_from_range_inclusive(self):
        """Test 'lo:hi' parsing"""
        candidates = CandidateSet.from_range("3:5", 8)

        assert candidates.values == (3, 4, 5)
        assert candidates.index_of([4, 9, 3]).tolist() == [1, -1, 0]

    def test_index_of_rejects_values_outside_the_width(self):
        """Test that negative and too-wide values are configuration errors"""
        candidates = CandidateSet.full(4)
        with pytest.raises(ConfigError, match="-3"):
            candidates.index_of([1, -3])
        with pytest.raises(ConfigError, match="16"):
            candidates.index_of([16])
        assert candidates.index_of([]).tolist() == []

    def test_invalid_sets(self):
        """Test duplicate, empty and out-of-range candidates"""
        with pytest.raises(ConfigError):
            CandidateSet(8, (1, 1))
        with pytest.raises(ConfigError):
            CandidateSet(8, ())
        with pytest.raises(ConfigError):
            CandidateSet(2, (4,))
        with pytest.raises(ConfigError):
            CandidateSet.from_range("5:3", 8)


class TestLfsr:
    """Test the LFSR bit generator"""

    @pytest.mark.parametrize("width", [3, 4, 5, 8])
    def test_maximal_period(self, width):
        """Test that the tabulated taps visit every non-zero state once"""
        state = LfsrState.default(width, seed=1)
        seen = set()
        current = state
        for _ in range(state.max_period):
            seen.add(current.register)
            _, current = lfsr_next(current, 1)

        assert len(seen) == state.max_period
        assert current.register == state.register

    def test_sequence_balance(self):
        """Test that one period of a maximal sequence has 2^(n-1) ones"""
        state = LfsrState.default(8, seed=0x5A)
        bits, _ = lfsr_bits(state, state.max_period)
        assert int(bits.sum()) == 128

    def test_deterministic(self):
        """Test that equal states give equal streams"""
        first, _ = lfsr_next(LfsrState.default(), 64)
        second, _ = lfsr_next(LfsrState.default(), 64)
        assert first == second

    def test_invalid_states(self):
        """Test zero seeds and unknown widths"""
        with pytest.raises(ConfigError, match="non-zero"):
            LfsrState(4, (4, 3), 0)
        with pytest.raises(ConfigError):
            LfsrState(4, (4, 3), 16)
        with pytest.raises(ConfigError):
            LfsrState.default(17)

    def test_uniform_pattern_indices(self):
        """Test LFSR pattern selection covers all four patterns"""
        selector = PatternSelector(PermSet.default(), LfsrBitSource())
        indices = selector.select(4000)
        counts = np.bincount(indices, minlength=4)

        assert indices.min() >= 0 and indices.max() <= 3
        assert np.all(counts > 800)

    def test_lfsr_rejects_weighted_patterns(self):
        """Test that the LFSR selector only draws uniform indices"""
        weighted = PermSet((PermPattern((0, 1)), PermPattern((1, 0))), (0.75, 0.25))
        with pytest.raises(ConfigError, match="uniform"):
            PatternSelector(weighted, LfsrBitSource())

    def test_generator_source_respects_weights(self):
        """Test weighted selection from a numpy Generator"""
        weighted = PermSet((PermPattern((0, 1)), PermPattern((1, 0))), (0.9, 0.1))
        selector = PatternSelector(weighted, GeneratorBitSource(np.random.default_rng(5)))
        share = float(np.mean(selector.select(20000) == 0))
        assert abs(share - 0.9) < 0.01
