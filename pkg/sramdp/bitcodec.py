"""
Bit-level encoding: words, permutation patterns, candidate sets and the LFSR
random bit generator.

Bit index 0 is always the MSB of a word. Permutation patterns are written in
destination order: ``pattern.map[d]`` is the source position whose bit lands at
destination ``d``. Under this reading the two hardware shuffle traces reproduce
exactly (11110101 with [0,1,2,3,5,4,7,6] -> 11111010, 10101001 with
[0,1,2,3,6,7,4,5] -> 10100110).
"""

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError

MAX_WIDTH = 32

# The four shuffle patterns of the 8-bit hardware; MSBs stay in place
HARDWARE_PATTERNS = (
    (0, 1, 2, 3, 4, 5, 6, 7),
    (0, 1, 2, 3, 5, 4, 7, 6),
    (0, 1, 2, 3, 6, 7, 4, 5),
    (0, 1, 2, 3, 7, 6, 5, 4),
)


def _check_width(width: int) -> int:
    if not isinstance(width, (int, np.integer)) or not 1 <= width <= MAX_WIDTH:
        raise ConfigError(f"width must be an integer in 1..{MAX_WIDTH}, got {width!r}")
    return int(width)


@dataclass(frozen=True)
class Word:
    """Fixed-width bit string, index 0 = MSB"""
    width: int
    bits: Tuple[int, ...]

    def __post_init__(self):
        _check_width(self.width)
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != self.width:
            raise ConfigError(f"word has {len(bits)} bits but width {self.width}")
        if any(b not in (0, 1) for b in bits):
            raise ConfigError(f"word bits must be 0 or 1, got {bits}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> "Word":
        text = text.strip()
        return cls(len(text), tuple(int(ch) for ch in text))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "Word":
        bits = tuple(int(b) for b in bits)
        return cls(len(bits), bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.uint8)


def encode(value: int, width: int) -> Word:
    """MSB-first binary representation of an unsigned integer"""
    width = _check_width(width)
    if value < 0 or value >= (1 << width):
        raise ConfigError(
            f"value {value} out of range for width {width} (0 <= value < {1 << width})"
        )
    value = int(value)
    return Word(width, tuple((value >> (width - 1 - i)) & 1 for i in range(width)))


def decode(word: Word) -> int:
    value = 0
    for bit in word.bits:
        value = (value << 1) | bit
    return value


def encode_array(values: Union[Sequence[int], np.ndarray], width: int) -> np.ndarray:
    """Encode many values at once into an (N, width) uint8 matrix, MSB first"""
    width = _check_width(width)
    values = np.asarray(values, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= (1 << width)):
        bad = values[(values < 0) | (values >= (1 << width))][0]
        raise ConfigError(
            f"value {int(bad)} out of range for width {width} (0 <= value < {1 << width})"
        )
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def decode_array(bits: np.ndarray) -> np.ndarray:
    """Inverse of encode_array"""
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[1]
    weights = np.left_shift(1, np.arange(width - 1, -1, -1, dtype=np.int64))
    return bits @ weights


@dataclass(frozen=True)
class PermPattern:
    """Destination-ordered list of source positions"""
    map: Tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(s) for s in self.map)
        _check_width(len(mapping))
        if sorted(mapping) != list(range(len(mapping))):
            raise ConfigError(f"pattern {list(mapping)} is not a permutation of 0..{len(mapping) - 1}")
        object.__setattr__(self, "map", mapping)

    @property
    def width(self) -> int:
        return len(self.map)

    def inverse_map(self) -> Tuple[int, ...]:
        inverse = [0] * self.width
        for dest, source in enumerate(self.map):
            inverse[source] = dest
        return tuple(inverse)


def _check_widths(word: Word, pattern: PermPattern) -> None:
    if word.width != pattern.width:
        raise ConfigError(f"word width {word.width} does not match pattern width {pattern.width}")


def apply_permutation(word: Word, pattern: PermPattern) -> Word:
    _check_widths(word, pattern)
    return Word(word.width, tuple(word.bits[source] for source in pattern.map))


def invert_permutation(word: Word, pattern: PermPattern) -> Word:
    _check_widths(word, pattern)
    restored = [0] * word.width
    for dest, source in enumerate(pattern.map):
        restored[source] = word.bits[dest]
    return Word(word.width, tuple(restored))


@dataclass(frozen=True)
class PermSet:
    """Weighted set of permutation patterns used by the bit shift step"""
    patterns: Tuple[PermPattern, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        patterns = tuple(p if isinstance(p, PermPattern) else PermPattern(tuple(p)) for p in self.patterns)
        if not patterns:
            raise ConfigError("a PermSet needs at least one pattern")
        widths = {p.width for p in patterns}
        if len(widths) != 1:
            raise ConfigError(f"all patterns must share one width, got {sorted(widths)}")
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(patterns):
            raise ConfigError(f"{len(patterns)} patterns but {len(weights)} weights")
        if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-12:
            raise ConfigError(f"weights must be non-negative and sum to 1, got {list(weights)}")
        object.__setattr__(self, "patterns", patterns)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, patterns: Sequence[Sequence[int]]) -> "PermSet":
        count = len(patterns)
        return cls(tuple(PermPattern(tuple(p)) for p in patterns), tuple([1.0 / count] * count))

    @classmethod
    def default(cls) -> "PermSet":
        """Patterns of the 8-bit hardware, selected uniformly"""
        return cls.uniform(HARDWARE_PATTERNS)

    @classmethod
    def identity(cls, width: int) -> "PermSet":
        return cls.uniform([tuple(range(_check_width(width)))])

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PermSet":
        patterns = data.get("patterns")
        if not patterns:
            raise ConfigError("PermSet config needs a non-empty 'patterns' list")
        width = data.get("width")
        if width is not None and any(len(p) != width for p in patterns):
            raise ConfigError(f"every pattern must have length {width}")
        weights = data.get("weights")
        if weights is None:
            return cls.uniform(patterns)
        return cls(tuple(PermPattern(tuple(p)) for p in patterns), tuple(weights))

    @classmethod
    def from_json_file(cls, file_path: Union[str, Path]) -> "PermSet":
        from .config import load_config_file
        return cls.from_dict(load_config_file(file_path))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "width": self.width,
            "patterns": [list(p.map) for p in self.patterns],
            "weights": list(self.weights),
        }

    @property
    def width(self) -> int:
        return self.patterns[0].width

    @property
    def is_uniform(self) -> bool:
        return len(set(self.weights)) == 1

    def pattern_matrix(self) -> np.ndarray:
        """(m, n) array of destination-ordered source indices"""
        return np.asarray([p.map for p in self.patterns], dtype=np.int64)

    def inverse_matrix(self) -> np.ndarray:
        return np.asarray([p.inverse_map() for p in self.patterns], dtype=np.int64)

    def mapping_matrix(self) -> np.ndarray:
        """P[i, k]: probability that source bit i is stored in cell k"""
        n = self.width
        matrix = np.zeros((n, n), dtype=float)
        for pattern, weight in zip(self.patterns, self.weights):
            for dest, source in enumerate(pattern.map):
                matrix[source, dest] += weight
        return matrix

    def exact_mapping_matrix(self) -> List[List[Fraction]]:
        """Mapping matrix in exact rationals (weights taken as exact decimals)"""
        n = self.width
        matrix = [[Fraction(0)] * n for _ in range(n)]
        for pattern, weight in zip(self.patterns, self.weights):
            w = Fraction(repr(weight))
            for dest, source in enumerate(pattern.map):
                matrix[source][dest] += w
        return matrix


@dataclass(frozen=True)
class CandidateSet:
    """Ordered candidate values, each encodable at the given width"""
    width: int
    values: Tuple[int, ...]

    def __post_init__(self):
        _check_width(self.width)
        values = tuple(int(v) for v in self.values)
        if not values:
            raise ConfigError("candidate set is empty")
        if len(set(values)) != len(values):
            raise ConfigError("candidate values must be distinct")
        if min(values) < 0 or max(values) >= (1 << self.width):
            raise ConfigError(f"candidate values must lie in [0, {1 << self.width})")
        object.__setattr__(self, "values", values)

    @classmethod
    def full(cls, width: int) -> "CandidateSet":
        return cls(width, tuple(range(1 << _check_width(width))))

    @classmethod
    def from_range(cls, spec: str, width: int) -> "CandidateSet":
        """Parse 'lo:hi' (inclusive) into a candidate set"""
        try:
            lo, hi = (int(part) for part in spec.split(":"))
        except ValueError:
            raise ConfigError(f"candidate range must look like 'lo:hi', got {spec!r}")
        if hi < lo:
            raise ConfigError(f"candidate range {spec!r} is empty")
        return cls(width, tuple(range(lo, hi + 1)))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.int64)

    def bits_matrix(self) -> np.ndarray:
        return encode_array(self.values, self.width)

    def index_of(self, values: np.ndarray) -> np.ndarray:
        """Position of each value in the set, -1 when absent; values must fit the width"""
        values = np.asarray(values, dtype=np.int64)
        if values.size and (values.min() < 0 or values.max() >= (1 << self.width)):
            bad = values[(values < 0) | (values >= (1 << self.width))][0]
            raise ConfigError(f"value {int(bad)} is not a {self.width}-bit word")
        lookup = np.full(1 << self.width, -1, dtype=np.int64)
        lookup[self.as_array()] = np.arange(len(self.values))
        return lookup[values]


# Maximal-length Fibonacci taps (XAPP052 table): taps (n, t1, ...) stand for the
# primitive polynomial x^n + x^t1 + ... + 1
MAXIMAL_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    32: (32, 22, 2, 1),
}


@dataclass(frozen=True)
class LfsrState:
    """
    Fibonacci shift register. The register shifts towards bit 0, which is the
    output bit; the feedback bit (parity of the tapped bits) enters at the top.
    """
    width: int
    taps: Tuple[int, ...]
    register: int

    def __post_init__(self):
        if not 2 <= self.width <= 64:
            raise ConfigError(f"LFSR width must be in 2..64, got {self.width}")
        taps = tuple(int(t) for t in self.taps)
        if not taps or taps[0] != self.width or any(not 1 <= t <= self.width for t in taps):
            raise ConfigError(f"LFSR taps must start with the width {self.width}, got {list(taps)}")
        if self.register == 0:
            raise ConfigError("LFSR seed must be non-zero")
        if not 0 < self.register < (1 << self.width):
            raise ConfigError(f"LFSR seed {self.register} does not fit in {self.width} bits")
        object.__setattr__(self, "taps", taps)

    @classmethod
    def default(cls, width: int = 16, seed: int = 0xACE1) -> "LfsrState":
        if width not in MAXIMAL_TAPS:
            raise ConfigError(f"no maximal-length taps tabulated for width {width}")
        register = seed % (1 << width)
        return cls(width, MAXIMAL_TAPS[width], register or 1)

    @property
    def tap_mask(self) -> int:
        # bit 0 always feeds back: the constant term of the polynomial
        mask = 1
        for tap in self.taps[1:]:
            mask |= 1 << tap
        return mask

    @property
    def max_period(self) -> int:
        return (1 << self.width) - 1


def _lfsr_stream(state: LfsrState, count: int) -> Tuple[np.ndarray, LfsrState]:
    register = state.register
    mask = state.tap_mask
    top = state.width - 1
    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        out[i] = register & 1
        feedback = bin(register & mask).count("1") & 1
        register = (register >> 1) | (feedback << top)
    return out, LfsrState(state.width, state.taps, register)


def lfsr_next(state: LfsrState, nbits: int) -> Tuple[Word, LfsrState]:
    """Next nbits of the sequence (first generated bit is the MSB) and the advanced state"""
    bits, new_state = _lfsr_stream(state, nbits)
    return Word(nbits, tuple(int(b) for b in bits)), new_state


class GeneratorBitSource:
    """Random bits and pattern indices drawn from a numpy Generator"""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def bits(self, count: int) -> np.ndarray:
        return self.rng.integers(0, 2, size=count, dtype=np.uint8)

    def indices(self, weights: Sequence[float], count: int) -> np.ndarray:
        weights = np.asarray(weights, dtype=float)
        if len(weights) == 1:
            return np.zeros(count, dtype=np.int64)
        return self.rng.choice(len(weights), size=count, p=weights).astype(np.int64)


class LfsrBitSource:
    """
    Random bits and pattern indices from an LFSR, like the hardware's 2-bit
    pattern selector. Holds the advancing state; not shareable across threads.
    """

    def __init__(self, state: Optional[LfsrState] = None):
        self.state = state or LfsrState.default()

    def bits(self, count: int) -> np.ndarray:
        out, self.state = _lfsr_stream(self.state, count)
        return out

    def indices(self, weights: Sequence[float], count: int) -> np.ndarray:
        m = len(weights)
        if m == 1:
            return np.zeros(count, dtype=np.int64)
        if len(set(weights)) != 1:
            raise ConfigError("LFSR pattern selection requires uniform pattern weights")
        nbits = (m - 1).bit_length()
        result = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            raw = decode_array(self.bits(nbits).reshape(1, nbits))[0]
            # reject out-of-range codes so selection stays uniform
            if raw < m:
                result[filled] = raw
                filled += 1
        return result


def lfsr_bits(state: LfsrState, nbits: int) -> Tuple[np.ndarray, LfsrState]:
    """Array form of lfsr_next, used for noise bits"""
    return _lfsr_stream(state, nbits)


class PatternSelector:
    """Draws pattern indices for a PermSet from a bit source"""

    def __init__(self, permset: PermSet, source: Union[GeneratorBitSource, LfsrBitSource]):
        if isinstance(source, LfsrBitSource) and not permset.is_uniform:
            raise ConfigError("LFSR pattern selection requires uniform pattern weights")
        self.permset = permset
        self.source = source

    def select(self, count: int) -> np.ndarray:
        return self.source.indices(self.permset.weights, count)
