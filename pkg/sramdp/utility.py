"""
Utility analytics: the exact distribution of the value perturbation
O - X, a brute-force oracle for it, the homogeneous l1 bound and the
utility-loss (UL) meter.
"""

import itertools
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from .bitcodec import CandidateSet, Word, decode
from .errors import ConfigError, SizeGuardError
from .mechanism import Channel, FailureProfile

MAX_PMF_WIDTH = 20
MAX_BRUTEFORCE_WIDTH = 12
MAX_UL_WIDTH = 16


@dataclass(frozen=True, eq=False)
class DeltaPmf:
    """PMF of the value perturbation over a = -(2^n - 1) .. 2^n - 1"""
    width: int
    probs: np.ndarray

    def __post_init__(self):
        if self.probs.shape != (2 * self.offset + 1,):
            raise ConfigError(f"PMF of width {self.width} needs {2 * self.offset + 1} entries")

    @property
    def offset(self) -> int:
        return (1 << self.width) - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(-self.offset, self.offset + 1, dtype=np.int64)

    def prob(self, a: int) -> float:
        if abs(a) > self.offset:
            return 0.0
        return float(self.probs[a + self.offset])

    def total_variation(self, other: "DeltaPmf") -> float:
        if other.width != self.width:
            raise ConfigError(f"cannot compare PMFs of widths {self.width} and {other.width}")
        return 0.5 * float(np.abs(self.probs - other.probs).sum())


def _check_width(f: FailureProfile, limit: int) -> None:
    if f.width > limit:
        raise SizeGuardError(f"width {f.width} exceeds the limit of {limit} for this computation")


def delta_pmf(f: FailureProfile) -> DeltaPmf:
    """
    Exact PMF of O - X by the bit-by-bit recursion, LSB upwards.

    Each step spreads the previous PMF by -2^(k-1), 0, +2^(k-1) with
    probabilities f/4, 1 - f/2, f/4.
    """
    _check_width(f, MAX_PMF_WIDTH)
    pmf = np.ones(1)
    for k, fk in enumerate(f.lsb_first(), start=1):
        half = 1 << (k - 1)
        length = pmf.size
        size = (1 << (k + 1)) - 1
        lower = np.zeros(size)
        middle = np.zeros(size)
        upper = np.zeros(size)
        lower[:length] = pmf
        middle[half:half + length] = pmf
        upper[2 * half:2 * half + length] = pmf
        # lower and upper mirror each other, so the sum stays exactly symmetric
        pmf = (1 - fk / 2) * middle + (fk / 4) * (lower + upper)
    return DeltaPmf(f.width, pmf)


def delta_pmf_bruteforce(f: FailureProfile) -> DeltaPmf:
    """Oracle: enumerate all 3^n per-bit perturbations"""
    _check_width(f, MAX_BRUTEFORCE_WIDTH)
    n = f.width
    steps = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int64)
    lsb = np.asarray(f.lsb_first())
    # P(step = -1), P(0), P(+1) per bit, LSB first
    table = np.stack([lsb / 4, 1 - lsb / 2, lsb / 4], axis=1)
    probs = np.prod(table[np.arange(n)[None, :], steps + 1], axis=1)
    values = steps @ (1 << np.arange(n, dtype=np.int64))
    offset = (1 << n) - 1
    pmf = np.bincount(values + offset, weights=probs, minlength=2 * offset + 1)
    return DeltaPmf(n, pmf)


def pmf_mean(pmf: DeltaPmf) -> float:
    return float(pmf.support @ pmf.probs)


def pmf_rows(pmf: DeltaPmf) -> List[Tuple[int, float]]:
    """(a, probability) rows for CSV output"""
    return [(int(a), float(p)) for a, p in zip(pmf.support, pmf.probs)]


def expected_l1(f: FailureProfile) -> float:
    """Expected |O - X| for uniformly random input bits"""
    pmf = delta_pmf(f)
    return float(np.abs(pmf.support) @ pmf.probs)


def l1_bound_homogeneous(f: float, n: int) -> float:
    """Closed-form upper bound on expected_l1 when all n positions fail at rate f"""
    if not 0.0 <= f <= 1.0:
        raise ConfigError(f"failure rate must lie in [0, 1], got {f}")
    if n < 1:
        raise ConfigError(f"width must be at least 1, got {n}")
    return (4 ** n - 2 ** n) * ((1 - f / 2) ** (n + 1) - (f / 4) ** (n + 1)) / (1 - 3 * f / 4)


def ul_values(values: Union[Sequence[int], np.ndarray], f: FailureProfile) -> np.ndarray:
    """Exact UL for each value, computed once per distinct value"""
    _check_width(f, MAX_UL_WIDTH)
    values = np.asarray(values, dtype=np.int64)
    distinct, inverse = np.unique(values, return_inverse=True)
    outputs = CandidateSet.full(f.width)
    # P(o | x) depends only on o XOR x, so rows indexed by x give P(. | x)
    probs = Channel(outputs, f).likelihoods(distinct)
    distance = np.abs(outputs.as_array()[None, :] - distinct[:, None])
    return (probs * distance).sum(axis=1)[inverse]


def ul_meter(x: Word, f: FailureProfile) -> float:
    """Expected |decode(O) - decode(x)| over all outputs"""
    if x.width != f.width:
        raise ConfigError(f"input width {x.width} does not match profile width {f.width}")
    return float(ul_values([decode(x)], f)[0])


def mean_ul(dataset: Union[Sequence[int], np.ndarray], f: FailureProfile) -> Tuple[float, float]:
    """Mean and standard deviation of UL over a dataset"""
    values = ul_values(dataset, f)
    return float(values.mean()), float(values.std())


def pmf_summary(pmf: DeltaPmf) -> Dict[str, float]:
    return {
        "width": pmf.width,
        "mean": pmf_mean(pmf),
        "expected_l1": float(np.abs(pmf.support) @ pmf.probs),
        "total": float(pmf.probs.sum()),
    }
