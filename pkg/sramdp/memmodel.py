"""
Voltage-dependent memory cell failure models for sramdp

Cells are described by a calibration table of (voltage, failure probability)
points. Between points the failure curve is piecewise linear; outside the
table it is not defined. A fabricated chip is modelled by a critical voltage
per cell: the cell fails at V iff V < V_crit, which gives fault inclusion.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bitcodec import Word
from .errors import ConfigError

logger = logging.getLogger(__name__)

# Failure rates of the 6T cell in the target process, ascending voltage
C61_CALIBRATION = (
    (0.50, 0.8157),
    (0.55, 0.7057),
    (0.56, 0.6831),
    (0.57, 0.6615),
    (0.58, 0.6409),
    (0.59, 0.6203),
    (0.60, 0.6026),
)

# Supply range over which reliable cells are specified
RELIABLE_RANGE = (0.30, 1.20)

# Standard supply voltage; no cell fails here
NOMINAL_VOLTAGE = 1.0

# Layout cell height shared by all cell variants, micrometres
CELL_HEIGHT_UM = 0.45
CELL_WIDTHS_UM = {
    "6T-C61": 1.523,
    "6T-C62": 1.758,
    "8T-C81": 1.663,
    "8T-C82": 1.740,
}


def sigma_vth(a_vt: float, width_um: float, length_um: float) -> float:
    """Threshold voltage mismatch from device area (Pelgrom scaling)"""
    if a_vt <= 0 or width_um <= 0 or length_um <= 0:
        raise ConfigError(
            f"sigma_vth needs positive inputs, got A_VT={a_vt}, W={width_um}, L={length_um}"
        )
    return a_vt / math.sqrt(width_um * length_um)


def apply_drift(rate: Union[float, np.ndarray], alpha: float) -> Union[float, np.ndarray]:
    """Scale failure probabilities by a drift factor and clamp to [0, 1]"""
    if alpha < 0:
        raise ConfigError(f"drift factor must be non-negative, got {alpha}")
    drifted = np.clip(np.asarray(rate, dtype=float) * alpha, 0.0, 1.0)
    if np.ndim(drifted) == 0:
        return float(drifted)
    return drifted


@dataclass(frozen=True)
class CellSizing:
    """Transistor sizing metadata"""
    width_um: float
    length_um: float
    a_vt: float

    def sigma_vth(self) -> float:
        return sigma_vth(self.a_vt, self.width_um, self.length_um)


@dataclass(frozen=True)
class CellArea:
    width_um: float
    height_um: float = CELL_HEIGHT_UM

    @property
    def area_um2(self) -> float:
        return self.width_um * self.height_um


@dataclass(frozen=True)
class CellSpec:
    """A memory cell type and its failure calibration"""
    kind: str
    calibration: Tuple[Tuple[float, float], ...]
    sizing: Optional[CellSizing] = None
    area: Optional[CellArea] = None

    def __post_init__(self):
        points = tuple((float(v), float(p)) for v, p in self.calibration)
        if not points:
            raise ConfigError(f"cell '{self.kind}' has no calibration points")
        voltages = [v for v, _ in points]
        rates = [p for _, p in points]
        if any(v <= 0 for v in voltages):
            raise ConfigError(f"cell '{self.kind}' has non-positive calibration voltages")
        if any(b <= a for a, b in zip(voltages, voltages[1:])):
            raise ConfigError(f"cell '{self.kind}' calibration voltages must be strictly ascending")
        if any(not 0.0 <= p <= 1.0 for p in rates):
            raise ConfigError(f"cell '{self.kind}' failure probabilities must lie in [0, 1]")
        if any(rates) and any(b >= a for a, b in zip(rates, rates[1:])):
            raise ConfigError(
                f"cell '{self.kind}' failure probabilities must strictly decrease with voltage"
            )
        if self.kind == "reliable" and any(rates):
            raise ConfigError("a 'reliable' cell cannot have a non-zero failure probability")
        object.__setattr__(self, "calibration", points)

    @classmethod
    def c61_6t(cls) -> "CellSpec":
        return cls("6T-C61", C61_CALIBRATION, area=CellArea(CELL_WIDTHS_UM["6T-C61"]))

    @classmethod
    def c81_8t(cls) -> "CellSpec":
        """Custom 8T cell, zero failures over the supported range"""
        return cls(
            "8T-C81",
            ((RELIABLE_RANGE[0], 0.0), (RELIABLE_RANGE[1], 0.0)),
            area=CellArea(CELL_WIDTHS_UM["8T-C81"]),
        )

    @classmethod
    def reliable(cls) -> "CellSpec":
        return cls("reliable", ((RELIABLE_RANGE[0], 0.0), (RELIABLE_RANGE[1], 0.0)))

    @classmethod
    def from_preset(cls, name: str) -> "CellSpec":
        presets = {
            "6T-C61": cls.c61_6t,
            "6t": cls.c61_6t,
            "8T-C81": cls.c81_8t,
            "8t": cls.c81_8t,
            "reliable": cls.reliable,
        }
        if name not in presets:
            raise ConfigError(f"unknown cell preset '{name}', expected one of {sorted(presets)}")
        return presets[name]()

    @classmethod
    def from_dict(cls, data: Union[str, Dict[str, Any]]) -> "CellSpec":
        """Build from a preset name or {"kind": ..., "calibration": [[V, f], ...]}"""
        if isinstance(data, str):
            return cls.from_preset(data)
        if "preset" in data:
            return cls.from_preset(data["preset"])
        if "calibration" not in data:
            raise ConfigError("cell config needs 'calibration' or 'preset'")
        sizing = data.get("sizing")
        return cls(
            kind=data.get("kind", "custom"),
            calibration=tuple(tuple(point) for point in data["calibration"]),
            sizing=CellSizing(**sizing) if sizing else None,
        )

    @property
    def voltage_range(self) -> Tuple[float, float]:
        return self.calibration[0][0], self.calibration[-1][0]

    @property
    def never_fails(self) -> bool:
        return not any(p for _, p in self.calibration)

    def curve(self) -> "FailureCurve":
        return FailureCurve(self)


class FailureCurve:
    """Piecewise-linear failure probability over a cell's calibration range"""

    def __init__(self, spec: CellSpec):
        self.spec = spec
        self.voltages = np.array([v for v, _ in spec.calibration])
        self.rates = np.array([p for _, p in spec.calibration])

    def supports(self, voltage: float) -> bool:
        lo, hi = self.spec.voltage_range
        return lo - 1e-12 <= voltage <= hi + 1e-12

    def __call__(self, voltage: float) -> float:
        if not self.supports(voltage):
            lo, hi = self.spec.voltage_range
            raise ConfigError(
                f"voltage {voltage} V outside the calibrated range [{lo}, {hi}] V of cell '{self.spec.kind}'"
            )
        return float(np.interp(voltage, self.voltages, self.rates))

    def inverse(self, rate: float) -> float:
        """Voltage at which the curve reaches the given rate"""
        if self.spec.never_fails:
            raise ConfigError(f"cell '{self.spec.kind}' never fails; no voltage gives rate {rate}")
        if not self.rates[-1] <= rate <= self.rates[0]:
            raise ConfigError(
                f"rate {rate} outside the calibrated range [{self.rates[-1]}, {self.rates[0]}] "
                f"of cell '{self.spec.kind}'"
            )
        # rates decrease with voltage; interp wants ascending sample points
        return float(np.interp(rate, self.rates[::-1], self.voltages[::-1]))


def failure_rate_at(spec: CellSpec, voltage: float) -> float:
    return FailureCurve(spec)(voltage)


def voltage_for_rate(spec: CellSpec, rate: float) -> float:
    return FailureCurve(spec).inverse(rate)


def nearest_voltage(spec: CellSpec, rate: float) -> Tuple[float, float]:
    """Calibration point (voltage, rate) whose rate is closest to the target"""
    if spec.never_fails:
        raise ConfigError(f"cell '{spec.kind}' never fails; no operating point for rate {rate}")
    return min(spec.calibration, key=lambda point: (abs(point[1] - rate), point[0]))


def supported_voltage_range(specs: Sequence[CellSpec]) -> Tuple[float, float]:
    """Voltages supported by every spec in the list"""
    lo = max(spec.voltage_range[0] for spec in specs)
    hi = min(spec.voltage_range[1] for spec in specs)
    if lo > hi + 1e-12:
        raise ConfigError("cell specs share no common supported voltage")
    return lo, hi


def check_voltage(specs: Sequence[CellSpec], voltage: float) -> None:
    lo, hi = supported_voltage_range(specs)
    if not lo - 1e-12 <= voltage <= hi + 1e-12:
        raise ConfigError(f"voltage {voltage} V not supported by all cells (range [{lo}, {hi}] V)")


@dataclass(frozen=True)
class FaultMap:
    """Failed bit positions of one word at one voltage"""
    failed: Tuple[bool, ...]

    @property
    def z(self) -> int:
        return sum(self.failed)

    @property
    def positions(self) -> Tuple[int, ...]:
        return tuple(k for k, bad in enumerate(self.failed) if bad)

    def is_subset_of(self, other: "FaultMap") -> bool:
        return all(b or not a for a, b in zip(self.failed, other.failed))


def critical_voltage_floor(spec: CellSpec) -> float:
    """Critical voltage of a cell that holds over its whole calibrated range"""
    return min(RELIABLE_RANGE[0], spec.voltage_range[0])


def _sample_critical_voltages(
    spec: CellSpec, uniforms: np.ndarray, alpha: float
) -> np.ndarray:
    floor = critical_voltage_floor(spec)
    if spec.never_fails or alpha == 0:
        return np.full_like(uniforms, floor)
    curve = FailureCurve(spec)
    # P(V_crit > V) = min(1, alpha * f(V)) <=> V_crit is where f crosses u / alpha
    targets = uniforms / alpha
    v_crit = np.interp(targets, curve.rates[::-1], curve.voltages[::-1])
    v_crit = np.where(targets >= curve.rates[0], floor, v_crit)
    v_crit = np.where(targets < curve.rates[-1], np.inf, v_crit)
    return v_crit


@dataclass(frozen=True, eq=False)
class ChipInstance:
    """
    One fabricated memory array: a critical voltage per cell, words x bits.

    Immutable after sampling. Cell k of every word is built from specs[k].
    """
    v_crit: np.ndarray
    specs: Tuple[CellSpec, ...]
    seed: int
    alpha: float = 1.0
    fixed_output: int = 1
    wordline_sigma: float = 0.0

    def __post_init__(self):
        if self.v_crit.ndim != 2 or self.v_crit.shape[1] != len(self.specs):
            raise ConfigError("critical voltage array must be words x len(specs)")
        if self.fixed_output not in (0, 1):
            raise ConfigError(f"fixed output must be 0 or 1, got {self.fixed_output}")
        self.v_crit.setflags(write=False)

    @property
    def words(self) -> int:
        return self.v_crit.shape[0]

    @property
    def width(self) -> int:
        return self.v_crit.shape[1]

    def _check(self, word_index: int, voltage: float) -> None:
        if not 0 <= word_index < self.words:
            raise ConfigError(f"word index {word_index} out of range [0, {self.words})")
        check_voltage(self.specs, voltage)

    def fault_matrix(self, voltage: float) -> np.ndarray:
        """Boolean words x bits matrix of failed cells"""
        check_voltage(self.specs, voltage)
        return voltage < self.v_crit

    def fault_map(self, word_index: int, voltage: float) -> FaultMap:
        self._check(word_index, voltage)
        return FaultMap(tuple(bool(b) for b in voltage < self.v_crit[word_index]))

    def fault_maps(self, voltage: float) -> List[FaultMap]:
        return [FaultMap(tuple(bool(b) for b in row)) for row in self.fault_matrix(voltage)]

    def read_raw(self, word_index: int, stored: Word, voltage: float) -> Word:
        """Readout without noise injection: failed cells return the fixed constant"""
        if stored.width != self.width:
            raise ConfigError(f"stored word width {stored.width} does not match chip width {self.width}")
        fmap = self.fault_map(word_index, voltage)
        bits = tuple(self.fixed_output if bad else bit for bit, bad in zip(stored.bits, fmap.failed))
        return Word(self.width, bits)

    def failure_prone_positions(self) -> Tuple[int, ...]:
        return tuple(k for k, spec in enumerate(self.specs) if not spec.never_fails)

    def failure_fraction(self, voltage: float, positions: Optional[Sequence[int]] = None) -> float:
        """Fraction of failed cells among the given (default failure-prone) positions"""
        positions = self.failure_prone_positions() if positions is None else tuple(positions)
        if not positions:
            return 0.0
        return float(self.fault_matrix(voltage)[:, list(positions)].mean())

    def word_profile(self, word_index: int, voltage: float) -> Tuple[float, ...]:
        """Per-cell failure probability of one word: 1 on failed cells, 0 elsewhere"""
        return tuple(1.0 if bad else 0.0 for bad in self.fault_map(word_index, voltage).failed)

    def measured_profile(self, voltage: float) -> Tuple[float, ...]:
        """Per-cell failure rate averaged over all words, as a BIST pass would measure it"""
        return tuple(float(x) for x in self.fault_matrix(voltage).mean(axis=0))

    def weak_words(self, voltage: float) -> np.ndarray:
        """Indices of words with a failed cell outside the failure-prone columns"""
        reliable = [k for k, spec in enumerate(self.specs) if spec.never_fails]
        if not reliable:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.fault_matrix(voltage)[:, reliable].any(axis=1))

    def dump_fault_map(self, voltage: float) -> Dict[str, Any]:
        """Fault map of every word at one voltage, as written to fault-map.json"""
        faults = self.fault_matrix(voltage)
        return {
            "voltage": float(voltage),
            "seed": int(self.seed),
            "alpha": float(self.alpha),
            "wordline_sigma": float(self.wordline_sigma),
            "fixed_output": int(self.fixed_output),
            "cells": [spec.kind for spec in self.specs],
            "failure_fraction": self.failure_fraction(voltage),
            "weak_words": self.weak_words(voltage).tolist(),
            "words": faults.astype(int).tolist(),
        }


def sample_chip(
    specs: Sequence[CellSpec],
    words: int,
    seed: int,
    alpha: float = 1.0,
    fixed_output: int = 1,
    wordline_sigma: float = 0.0,
) -> ChipInstance:
    """
    Fabricate a chip by inverse-transform sampling of per-cell critical voltages.

    With wordline_sigma > 0 every wordline also gets a Gaussian offset added to
    the critical voltage of all its cells, reliable ones included. Words then
    fail more or less often than the calibrated average, and a wordline whose
    offset exceeds the reliable margin loses cells that have no noise injection.

    Args:
        specs: Cell type of each bit position
        words: Number of words (wordlines)
        seed: Seed for the cell draws
        alpha: Drift factor applied to the failure curve at run time
        fixed_output: Constant read from failed cells
        wordline_sigma: Standard deviation of the per-wordline offset, volts

    Returns:
        ChipInstance; with no wordline offset P(V_crit > V) = min(1, alpha * failure_rate_at(spec, V))
    """
    if words < 1 or not specs:
        raise ConfigError(f"chip geometry must be positive, got {words} words x {len(specs)} bits")
    if alpha < 0:
        raise ConfigError(f"drift factor must be non-negative, got {alpha}")
    if wordline_sigma < 0:
        raise ConfigError(f"wordline sigma must be non-negative, got {wordline_sigma}")
    rng = np.random.default_rng(seed)
    uniforms = rng.random((words, len(specs)))
    columns = [
        _sample_critical_voltages(spec, uniforms[:, k], alpha) for k, spec in enumerate(specs)
    ]
    v_crit = np.column_stack(columns)
    if wordline_sigma > 0:
        # drawn after the cells so a chip without offsets keeps its cell draws
        offsets = rng.normal(0.0, wordline_sigma, words)
        v_crit = v_crit + offsets[:, None]
    logger.debug(
        "sampled chip: %d words x %d bits, seed=%d, alpha=%s, wordline_sigma=%s",
        words, len(specs), seed, alpha, wordline_sigma,
    )
    return ChipInstance(v_crit, tuple(specs), seed, alpha, fixed_output, wordline_sigma)
