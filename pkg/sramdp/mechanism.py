"""
The SRAM_DP perturbation pipeline, its exact per-bit channel and the software
randomized-response reference.

Pipeline per record: pick a pattern, shuffle the bits into cells, store and
read back (failed cells return a fixed constant), replace failed readouts with
fresh random bits, and undo the shuffle.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from .bitcodec import (
    CandidateSet,
    GeneratorBitSource,
    LfsrBitSource,
    LfsrState,
    PatternSelector,
    PermSet,
    Word,
    decode_array,
    encode_array,
)
from .errors import ConfigError, SizeGuardError
from .memmodel import (
    CellSpec,
    ChipInstance,
    apply_drift,
    check_voltage,
    failure_rate_at,
    sample_chip,
)

logger = logging.getLogger(__name__)

# Largest candidate set for which the full channel matrix is materialized
MAX_CHANNEL_CANDIDATES = 1 << 16

# Pipeline stages that get their own random stream
STAGES = ("data", "selection", "failures", "noise", "chip")


class FailureMode(Enum):
    """How cell failures are realized"""
    STOCHASTIC = "stochastic"
    CHIP = "chip"


class NoiseSource(Enum):
    """Where selection and noise bits come from"""
    SYSTEM = "system"
    LFSR = "lfsr"


def stage_seed(master_seed: int, stage: str) -> np.random.SeedSequence:
    """Independent seed sequence for one pipeline stage"""
    if stage not in STAGES:
        raise ConfigError(f"unknown pipeline stage '{stage}', expected one of {STAGES}")
    return np.random.SeedSequence(master_seed, spawn_key=(STAGES.index(stage),))


def stage_rng(master_seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(stage_seed(master_seed, stage))


def _lfsr_seed(master_seed: int, stage: str) -> int:
    return int(stage_seed(master_seed, stage).generate_state(1)[0]) % 0xFFFF + 1


@dataclass(frozen=True)
class FailureProfile:
    """Per-position effective failure probabilities, MSB first"""
    f: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.f)
        if not values:
            raise ConfigError("failure profile is empty")
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ConfigError(f"failure probabilities must lie in [0, 1], got {list(values)}")
        object.__setattr__(self, "f", values)

    @classmethod
    def zeros(cls, width: int) -> "FailureProfile":
        return cls((0.0,) * width)

    @classmethod
    def homogeneous(cls, rate: float, positions: Sequence[int], width: int) -> "FailureProfile":
        """Profile failing the given positions at one rate"""
        if any(not 0 <= p < width for p in positions):
            raise ConfigError(f"positions {list(positions)} out of range for width {width}")
        return cls(tuple(rate if k in set(positions) else 0.0 for k in range(width)))

    @property
    def width(self) -> int:
        return len(self.f)

    @property
    def z(self) -> int:
        """Number of failure-prone positions"""
        return sum(1 for v in self.f if v > 0)

    @property
    def failure_prone(self) -> Tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.f) if v > 0)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.f, dtype=float)

    def lsb_first(self) -> Tuple[float, ...]:
        return tuple(reversed(self.f))

    def drifted(self, alpha: float) -> "FailureProfile":
        return FailureProfile(tuple(apply_drift(self.as_array(), alpha)))


def effective_f(permset: PermSet, cell_fail: Sequence[float]) -> FailureProfile:
    """f_i = sum_k P(bit i stored in cell k) * cell_fail[k]"""
    cell_fail = np.asarray(cell_fail, dtype=float)
    if cell_fail.shape != (permset.width,):
        raise ConfigError(
            f"cell failure vector has {cell_fail.size} entries, pattern width is {permset.width}"
        )
    f = permset.mapping_matrix() @ cell_fail
    return FailureProfile(tuple(float(np.clip(v, 0.0, 1.0)) for v in f))


@dataclass
class MechanismConfig:
    """
    Configuration of one SRAM_DP instance.

    Cell failure probabilities come either from cell specs at an operating
    voltage or directly from ``cell_rates``; exactly one of ``voltage`` and
    ``cell_rates`` is set. ``drift`` scales the run-time failure probabilities
    in stochastic mode; chips carry their own drift.
    """
    width: int = 8
    cells: Tuple[CellSpec, ...] = field(default_factory=tuple)
    voltage: Optional[float] = None
    cell_rates: Optional[Tuple[float, ...]] = None
    permset: Optional[PermSet] = None
    mode: FailureMode = FailureMode.STOCHASTIC
    chip: Optional[ChipInstance] = None
    selection_source: NoiseSource = NoiseSource.SYSTEM
    noise_source: NoiseSource = NoiseSource.SYSTEM
    fixed_output: int = 1
    drift: float = 1.0

    def __post_init__(self):
        self.mode = FailureMode(self.mode)
        self.selection_source = NoiseSource(self.selection_source)
        self.noise_source = NoiseSource(self.noise_source)
        if self.permset is None:
            self.permset = PermSet.identity(self.width)
        if self.permset.width != self.width:
            raise ConfigError(f"pattern width {self.permset.width} does not match word width {self.width}")
        if self.selection_source is NoiseSource.LFSR and not self.permset.is_uniform:
            raise ConfigError("LFSR pattern selection requires uniform pattern weights")
        if self.fixed_output not in (0, 1):
            raise ConfigError(f"fixed output must be 0 or 1, got {self.fixed_output}")
        if self.drift < 0:
            raise ConfigError(f"drift factor must be non-negative, got {self.drift}")
        if (self.voltage is None) == (self.cell_rates is None):
            raise ConfigError("set exactly one of 'voltage' and 'cell_rates'")
        if self.cell_rates is not None:
            self.cell_rates = tuple(float(r) for r in self.cell_rates)
            if len(self.cell_rates) != self.width:
                raise ConfigError(f"{len(self.cell_rates)} cell rates for width {self.width}")
            if any(not 0.0 <= r <= 1.0 for r in self.cell_rates):
                raise ConfigError("cell rates must lie in [0, 1]")
        else:
            if len(self.cells) != self.width:
                raise ConfigError(f"{len(self.cells)} cell specs for width {self.width}")
            check_voltage(self.cells, self.voltage)
        if self.mode is FailureMode.CHIP:
            if self.chip is None or self.voltage is None:
                raise ConfigError("chip mode needs both a chip and an operating voltage")
            if self.chip.width != self.width:
                raise ConfigError(f"chip width {self.chip.width} does not match word width {self.width}")
            check_voltage(self.chip.specs, self.voltage)
        elif self.chip is not None:
            raise ConfigError("a chip was given but the failure mode is stochastic")

    @classmethod
    def default(cls) -> "MechanismConfig":
        """8-bit word: four MSBs on reliable cells, four LSBs on 6T cells at 0.50 V"""
        cells = (CellSpec.reliable(),) * 4 + (CellSpec.c61_6t(),) * 4
        return cls(width=8, cells=cells, voltage=0.50, permset=PermSet.default())

    @classmethod
    def from_rates(
        cls, cell_rates: Sequence[float], permset: Optional[PermSet] = None, **kwargs
    ) -> "MechanismConfig":
        return cls(width=len(cell_rates), cell_rates=tuple(cell_rates), permset=permset, **kwargs)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MechanismConfig":
        width = int(data.get("width", 8))
        if "permset" in data:
            permset = PermSet.from_dict(data["permset"])
        elif data.get("patterns") == "default":
            permset = PermSet.default()
        else:
            permset = PermSet.identity(width)
        cells = tuple(CellSpec.from_dict(c) for c in data.get("cells", ()))
        cell_rates = data.get("cell_rates")
        mode = FailureMode(data.get("mode", "stochastic"))
        fixed_output = int(data.get("fixed_output", 1))
        chip = None
        if mode is FailureMode.CHIP:
            chip_data = data.get("chip", {})
            chip = sample_chip(
                cells,
                int(chip_data.get("words", 1000)),
                int(chip_data.get("seed", 0)),
                alpha=float(chip_data.get("alpha", 1.0)),
                fixed_output=fixed_output,
                wordline_sigma=float(chip_data.get("wordline_sigma", 0.0)),
            )
        return cls(
            width=width,
            cells=cells,
            voltage=data.get("voltage"),
            cell_rates=tuple(cell_rates) if cell_rates is not None else None,
            permset=permset,
            mode=mode,
            chip=chip,
            selection_source=data.get("selection_source", "system"),
            noise_source=data.get("noise_source", "system"),
            fixed_output=fixed_output,
            drift=float(data.get("drift", 1.0)),
        )

    @classmethod
    def from_file(cls, file_path: Union[str, Path]) -> "MechanismConfig":
        from .config import load_config_file
        return cls.from_dict(load_config_file(file_path))

    def cell_fail(self) -> np.ndarray:
        """Nominal per-cell failure probabilities"""
        if self.cell_rates is not None:
            return np.asarray(self.cell_rates, dtype=float)
        return np.asarray([failure_rate_at(spec, self.voltage) for spec in self.cells])

    def runtime_cell_fail(self) -> np.ndarray:
        return np.asarray(apply_drift(self.cell_fail(), self.drift), dtype=float).reshape(-1)

    def noise_columns(self) -> np.ndarray:
        """Bit positions wired to the noise injector; failures elsewhere read the fixed output"""
        if self.cell_rates is not None:
            return np.asarray(self.cell_rates) > 0
        return np.asarray([not spec.never_fails for spec in self.cells])

    def profile(self, drifted: bool = False) -> FailureProfile:
        cells = self.runtime_cell_fail() if drifted else self.cell_fail()
        return effective_f(self.permset, cells)

    def with_chip(self, chip: ChipInstance) -> "MechanismConfig":
        return MechanismConfig(
            width=self.width,
            cells=self.cells,
            voltage=self.voltage,
            cell_rates=self.cell_rates,
            permset=self.permset,
            mode=FailureMode.CHIP,
            chip=chip,
            selection_source=self.selection_source,
            noise_source=self.noise_source,
            fixed_output=self.fixed_output,
            drift=self.drift,
        )


@dataclass
class RandomSources:
    """Random streams for pattern selection, failures and noise"""
    selection: Union[GeneratorBitSource, LfsrBitSource]
    failures: np.random.Generator
    noise: Union[GeneratorBitSource, LfsrBitSource]

    @classmethod
    def from_seed(cls, seed: int, config: Optional[MechanismConfig] = None) -> "RandomSources":
        """Per-stage streams derived from one master seed"""
        selection_lfsr = config is not None and config.selection_source is NoiseSource.LFSR
        noise_lfsr = config is not None and config.noise_source is NoiseSource.LFSR
        return cls(
            selection=(
                LfsrBitSource(LfsrState.default(16, _lfsr_seed(seed, "selection")))
                if selection_lfsr
                else GeneratorBitSource(stage_rng(seed, "selection"))
            ),
            failures=stage_rng(seed, "failures"),
            noise=(
                LfsrBitSource(LfsrState.default(16, _lfsr_seed(seed, "noise")))
                if noise_lfsr
                else GeneratorBitSource(stage_rng(seed, "noise"))
            ),
        )

    @classmethod
    def from_generator(cls, rng: np.random.Generator) -> "RandomSources":
        source = GeneratorBitSource(rng)
        return cls(selection=source, failures=rng, noise=source)


RngLike = Union[np.random.Generator, RandomSources, int]


def _as_sources(rng: RngLike, config: MechanismConfig) -> RandomSources:
    if isinstance(rng, RandomSources):
        return rng
    if isinstance(rng, np.random.Generator):
        return RandomSources.from_generator(rng)
    return RandomSources.from_seed(int(rng), config)


@dataclass
class PerturbBatch:
    """Outputs of a batch run with the side information stored per record"""
    inputs: np.ndarray
    outputs: np.ndarray
    pattern_indices: np.ndarray
    word_indices: np.ndarray


@dataclass
class PerturbTrace:
    """Every intermediate of one pass through the pipeline"""
    input: Word
    pattern_index: int
    word_index: int
    shuffled: Word
    failed: Tuple[bool, ...]
    readout: Word
    noise: Tuple[int, ...]
    noised: Word
    output: Word


def _run_pipeline(
    bits: np.ndarray,
    config: MechanismConfig,
    sources: RandomSources,
    word_indices: np.ndarray,
) -> Dict[str, np.ndarray]:
    count, width = bits.shape
    selector = PatternSelector(config.permset, sources.selection)
    pattern_idx = selector.select(count)
    maps = config.permset.pattern_matrix()[pattern_idx]
    inverse = config.permset.inverse_matrix()[pattern_idx]

    # Step 1: destination d receives source bit maps[r, d]
    shuffled = np.take_along_axis(bits, maps, axis=1)

    # Step 2: store and read back
    if config.mode is FailureMode.CHIP:
        failed = config.chip.fault_matrix(config.voltage)[word_indices]
    else:
        failed = sources.failures.random((count, width)) < config.runtime_cell_fail()[None, :]
    readout = np.where(failed, np.uint8(config.fixed_output), shuffled).astype(np.uint8)

    # Step 3: failed cells in noise-injected columns are overwritten with fresh random bits
    injected = failed & config.noise_columns()[None, :]
    noise = np.zeros_like(readout)
    noise[injected] = sources.noise.bits(int(injected.sum()))
    noised = np.where(injected, noise, readout).astype(np.uint8)

    # Step 4: reverse the shuffle
    output = np.take_along_axis(noised, inverse, axis=1)
    return {
        "pattern_idx": pattern_idx,
        "shuffled": shuffled,
        "failed": failed,
        "readout": readout,
        "noise": noise,
        "noised": noised,
        "output": output,
    }


def _word_indices(config: MechanismConfig, count: int, offset: int) -> np.ndarray:
    indices = np.arange(offset, offset + count, dtype=np.int64)
    if config.mode is FailureMode.CHIP:
        return indices % config.chip.words
    return indices


def perturb_many(
    values: Union[Sequence[int], np.ndarray],
    config: MechanismConfig,
    rng: RngLike,
    word_offset: int = 0,
) -> PerturbBatch:
    """Perturb a batch of values; record i is stored in word (offset + i) mod words"""
    values = np.asarray(values, dtype=np.int64)
    sources = _as_sources(rng, config)
    word_indices = _word_indices(config, len(values), word_offset)
    stages = _run_pipeline(encode_array(values, config.width), config, sources, word_indices)
    return PerturbBatch(
        inputs=values,
        outputs=decode_array(stages["output"]),
        pattern_indices=stages["pattern_idx"],
        word_indices=word_indices,
    )


def trace_perturb(
    x: Word, config: MechanismConfig, rng: RngLike, word_index: int = 0
) -> PerturbTrace:
    """Debug view of one record: shuffled word, fixed-output readout, noise, output"""
    if x.width != config.width:
        raise ConfigError(f"input width {x.width} does not match mechanism width {config.width}")
    sources = _as_sources(rng, config)
    word_indices = _word_indices(config, 1, word_index)
    stages = _run_pipeline(x.as_array()[None, :], config, sources, word_indices)

    def word(name: str) -> Word:
        return Word(config.width, tuple(int(b) for b in stages[name][0]))

    return PerturbTrace(
        input=x,
        pattern_index=int(stages["pattern_idx"][0]),
        word_index=int(word_indices[0]),
        shuffled=word("shuffled"),
        failed=tuple(bool(b) for b in stages["failed"][0]),
        readout=word("readout"),
        noise=tuple(int(b) for b in stages["noise"][0]),
        noised=word("noised"),
        output=word("output"),
    )


def perturb(x: Word, config: MechanismConfig, rng: RngLike, word_index: int = 0) -> Word:
    """Run one word through the full pipeline and return the final output"""
    return trace_perturb(x, config, rng, word_index).output


def channel_prob(x: Word, o: Word, f: FailureProfile) -> float:
    """P(O = o | X = x) under the per-bit flip law"""
    if not x.width == o.width == f.width:
        raise ConfigError(f"width mismatch: x={x.width}, o={o.width}, f={f.width}")
    prob = 1.0
    for xi, oi, fi in zip(x.bits, o.bits, f.f):
        prob *= fi / 2 if xi != oi else 1 - fi / 2
    return prob


class Channel:
    """
    Exact P(O | X) over a candidate set, factored per bit.

    Likelihoods are computed in the log domain; positions with f = 0 demand an
    exact match.
    """

    def __init__(self, candidates: CandidateSet, profile: FailureProfile):
        if candidates.width != profile.width:
            raise ConfigError(
                f"candidate width {candidates.width} does not match profile width {profile.width}"
            )
        self.candidates = candidates
        self.profile = profile
        self._matrix: Optional[np.ndarray] = None

        f = profile.as_array()
        self._noisy = f > 0
        noisy_f = f[self._noisy]
        self._log_keep = np.log1p(-noisy_f / 2)
        self._log_ratio = np.log(noisy_f / 2) - self._log_keep

    def log_likelihoods(self, observations: Union[Sequence[int], np.ndarray]) -> np.ndarray:
        """(len(observations), |candidates|) matrix of log P(o | x)"""
        obs_bits = encode_array(np.asarray(observations, dtype=np.int64), self.profile.width).astype(float)
        cand_bits = self.candidates.bits_matrix().astype(float)

        noisy_o = obs_bits[:, self._noisy]
        noisy_x = cand_bits[:, self._noisy]
        # sum_i ratio_i * (o_i XOR x_i)
        flips = (
            (noisy_o @ self._log_ratio)[:, None]
            + (noisy_x @ self._log_ratio)[None, :]
            - 2.0 * (noisy_o * self._log_ratio) @ noisy_x.T
        )
        log_l = self._log_keep.sum() + flips

        exact_o = obs_bits[:, ~self._noisy]
        exact_x = cand_bits[:, ~self._noisy]
        mismatches = (
            exact_o.sum(axis=1)[:, None] + exact_x.sum(axis=1)[None, :] - 2.0 * exact_o @ exact_x.T
        )
        return np.where(mismatches > 0.5, -np.inf, log_l)

    def likelihoods(self, observations: Union[Sequence[int], np.ndarray]) -> np.ndarray:
        return np.exp(self.log_likelihoods(observations))

    @property
    def matrix(self) -> np.ndarray:
        """Materialized M[x][o] over the candidate set"""
        if self._matrix is None:
            if len(self.candidates) > MAX_CHANNEL_CANDIDATES:
                raise SizeGuardError(
                    f"channel matrix over {len(self.candidates)} candidates exceeds "
                    f"the limit of {MAX_CHANNEL_CANDIDATES}"
                )
            self._matrix = self.likelihoods(self.candidates.values).T
        return self._matrix


def build_channel(candidates: CandidateSet, f: FailureProfile) -> Channel:
    if len(candidates) > MAX_CHANNEL_CANDIDATES:
        raise SizeGuardError(
            f"channel over {len(candidates)} candidates exceeds the limit of {MAX_CHANNEL_CANDIDATES}"
        )
    channel = Channel(candidates, f)
    _ = channel.matrix
    return channel


def _check_epsilon(epsilon: float) -> None:
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")


def rr_keep_probability(epsilon: float) -> float:
    _check_epsilon(epsilon)
    if math.isinf(epsilon):
        return 1.0
    return 1.0 / (1.0 + math.exp(-epsilon))


def rr_matrix(epsilon: float) -> np.ndarray:
    """2x2 randomized response matrix [[p00, p01], [p10, p11]]"""
    keep = rr_keep_probability(epsilon)
    return np.array([[keep, 1 - keep], [1 - keep, keep]])


def rr_reference(bit: int, epsilon: float, rng: np.random.Generator) -> int:
    if bit not in (0, 1):
        raise ConfigError(f"bit must be 0 or 1, got {bit}")
    keep = rr_keep_probability(epsilon)
    return bit if rng.random() < keep else 1 - bit


def rr_epsilons_for_profile(f: FailureProfile) -> Tuple[float, ...]:
    """Per-bit RR budget matching each position's flip probability f_i / 2"""
    return tuple(
        math.inf if fi == 0 else math.log((1 - fi / 2) / (fi / 2)) for fi in f.f
    )


def _rr_matrix_or_trivial(epsilon: float) -> np.ndarray:
    # a position that always fails reads back a fair coin
    if epsilon == 0:
        return np.full((2, 2), 0.5)
    if math.isinf(epsilon):
        return np.eye(2)
    return rr_matrix(epsilon)


def rr_channel_for_profile(f: FailureProfile) -> Tuple[np.ndarray, ...]:
    """2x2 RR matrices per position, identity where the position never fails"""
    return tuple(_rr_matrix_or_trivial(eps) for eps in rr_epsilons_for_profile(f))


def rr_perturb_many(
    values: Union[Sequence[int], np.ndarray],
    epsilons: Sequence[float],
    rng: np.random.Generator,
) -> np.ndarray:
    """Per-bit randomized response on each value; epsilons are MSB first, inf = untouched"""
    width = len(epsilons)
    values = np.asarray(values, dtype=np.int64)
    bits = encode_array(values, width)
    flip_p = np.array([_rr_matrix_or_trivial(e)[0, 1] for e in epsilons])
    flips = rng.random(bits.shape) < flip_p[None, :]
    return decode_array(np.where(flips, 1 - bits, bits))
