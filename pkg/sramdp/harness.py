"""
Experiment harness for sramdp: synthetic datasets, named failure patterns,
end-to-end runs, the randomized-response comparison and parallel sweeps.
"""

import asyncio
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bitcodec import CandidateSet, PermSet
from .config import get_setting
from .errors import ConfigError
from .mechanism import (
    FailureProfile,
    MechanismConfig,
    RandomSources,
    effective_f,
    perturb_many,
    rr_epsilons_for_profile,
    rr_perturb_many,
    stage_rng,
    stage_seed,
)
from .memmodel import CellSpec, sample_chip
from .privacy import build_prior, epsilon_inf, f_for_epsilon, ia_values
from .recovery import (
    EmConfig,
    RecoveryResult,
    clr_recover,
    count_mse,
    em_recover,
    empirical_distribution,
    total_variation,
)
from .reporting import ArtifactWriter, ResultRecord, read_column
from .utility import ul_values

logger = logging.getLogger(__name__)

# Measured on the fabricated design; documentation only, not reproducible in software
HARDWARE_REFERENCE = {
    "power_nominal_w": 3.713e-3,
    "power_low_voltage_w": 5.724e-4,
    "latency_baseline_ns": 0.84,
    "latency_ns": 1.02,
    "transistors_baseline": 66000,
    "transistors": 67623,
    "nominal_supply_v": 1.0,
    "banks": 8,
    "words_per_bank": 128,
    "bits_per_word": 10,
}

PATTERN_POSITIONS = {
    "F1": (5, 6, 7),
    "F2": (2, 3, 4),
    "F3": (0, 1, 2),
}

CHIP_PROFILES = ("average", "measured", "per-word")
ALGORITHMS = ("em", "clr")

# Spread of the per-wordline critical-voltage offset on the reference chip, volts.
# About one wordline in eleven sits past the 0.20 V reliable-cell margin at 0.50 V.
CHIP_WORDLINE_SIGMA = 0.15


def gen_gaussian(
    mean: float,
    std: float,
    count: int,
    width: int,
    clip: Optional[Tuple[int, int]] = None,
    seed: int = 0,
) -> np.ndarray:
    """Rounded, clipped Gaussian integers drawn from the seed's data stream"""
    lo, hi = clip if clip is not None else (0, (1 << width) - 1)
    if not 0 <= lo <= hi < (1 << width):
        raise ConfigError(f"clip range [{lo}, {hi}] must lie within [0, {(1 << width) - 1}]")
    if count < 1 or std < 0:
        raise ConfigError(f"need count >= 1 and std >= 0, got count={count}, std={std}")
    rng = stage_rng(seed, "data")
    samples = rng.normal(mean, std, size=count) if std > 0 else np.full(count, float(mean))
    return np.clip(np.rint(samples), lo, hi).astype(np.int64)


def gen_grid_checkins(
    count: int = 4759, seed: int = 0, grid: int = 64, width: int = 8, hotspots: int = 6
) -> np.ndarray:
    """
    Synthetic location check-ins over a grid x grid set of areas of interest.

    Popularity of an area falls off with distance to a few random hotspots.
    Each check-in is placed uniformly inside its area and returned as a pair of
    width-bit coordinates, shape (count, 2).
    """
    side = 1 << width
    if grid < 1 or side % grid:
        raise ConfigError(f"grid size {grid} must divide the coordinate range {side}")
    rng = stage_rng(seed, "data")
    centers = rng.uniform(0, grid, size=(hotspots, 2))
    spreads = rng.uniform(grid / 32, grid / 8, size=hotspots)
    cells = np.stack(np.meshgrid(np.arange(grid), np.arange(grid), indexing="ij"), axis=-1).reshape(-1, 2)
    cells_center = cells + 0.5
    dist2 = ((cells_center[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    weights = np.exp(-0.5 * dist2 / spreads[None, :] ** 2).sum(axis=1) + 1e-3
    chosen = rng.choice(len(cells), size=count, p=weights / weights.sum())
    cell_size = side // grid
    offsets = rng.integers(0, cell_size, size=(count, 2))
    return (cells[chosen] * cell_size + offsets).astype(np.int64)


def named_pattern(name: str, epsilon: float, width: int = 8) -> FailureProfile:
    """F1 fails the three LSBs, F2 three middle bits, F3 the three MSBs"""
    if name not in PATTERN_POSITIONS:
        raise ConfigError(f"unknown failure pattern '{name}', expected one of {sorted(PATTERN_POSITIONS)}")
    if width != 8:
        raise ConfigError(f"named patterns are defined for 8-bit words, got width {width}")
    positions = PATTERN_POSITIONS[name]
    return FailureProfile.homogeneous(f_for_epsilon(epsilon, len(positions)), positions, width)


@dataclass
class DatasetSpec:
    """Where the input values come from"""
    kind: str = "gaussian"
    mean: float = 125.0
    std: float = 20.0
    count: int = 1000
    width: int = 8
    clip: Optional[Tuple[int, int]] = None
    path: Optional[str] = None
    axis: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "grid", "file"):
            raise ConfigError(f"dataset kind must be gaussian, grid or file, got '{self.kind}'")
        if self.kind == "file" and not self.path:
            raise ConfigError("a file dataset needs a path")
        if self.clip is not None:
            self.clip = (int(self.clip[0]), int(self.clip[1]))

    def generate(self, seed: int) -> np.ndarray:
        if self.kind == "gaussian":
            return gen_gaussian(self.mean, self.std, self.count, self.width, self.clip, seed)
        if self.kind == "grid":
            return gen_grid_checkins(self.count, seed, width=self.width)[:, self.axis]
        values = np.asarray(read_column(self.path), dtype=np.int64)
        if values.size and (values.min() < 0 or values.max() >= (1 << self.width)):
            raise ConfigError(f"dataset {self.path} has values outside [0, {(1 << self.width) - 1}]")
        return values


@dataclass
class ExperimentConfig:
    """
    One end-to-end run.

    The failure setting is exactly one of: epsilon (with an optional named
    pattern; without one the four LSBs share the budget), an operating
    voltage for the default cell layout, or an explicit MSB-first f vector.
    """
    name: str = "experiment"
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    pattern: Optional[str] = None
    f: Optional[Tuple[float, ...]] = None
    epsilon: Optional[float] = None
    voltage: Optional[float] = None
    mode: str = "stochastic"
    chip_words: Optional[int] = None
    chip_drift: float = 1.0
    chip_wordline_sigma: float = 0.0
    chip_profile: str = "average"
    algorithms: Tuple[str, ...] = ("em",)
    em: EmConfig = field(default_factory=EmConfig.fast)
    prior: str = "K1"
    noise_source: str = "system"
    seed: int = 12345
    out_dir: Optional[str] = None
    include_runtime: bool = False

    def __post_init__(self):
        chosen = [k for k in ("epsilon", "voltage", "f") if getattr(self, k) is not None]
        if len(chosen) != 1:
            raise ConfigError(f"set exactly one of epsilon, voltage and f (got {chosen or 'none'})")
        if self.pattern is not None and self.epsilon is None:
            raise ConfigError("a named pattern needs an epsilon")
        if self.f is not None:
            self.f = tuple(float(v) for v in self.f)
            if len(self.f) != self.dataset.width:
                raise ConfigError(f"f has {len(self.f)} entries for width {self.dataset.width}")
        if self.mode not in ("stochastic", "chip"):
            raise ConfigError(f"mode must be stochastic or chip, got '{self.mode}'")
        if self.mode == "chip" and self.voltage is None:
            raise ConfigError("chip mode needs an operating voltage")
        if self.chip_drift < 0 or self.chip_wordline_sigma < 0:
            raise ConfigError("chip drift and wordline sigma must be non-negative")
        if self.chip_profile not in CHIP_PROFILES:
            raise ConfigError(f"chip_profile must be one of {CHIP_PROFILES}, got '{self.chip_profile}'")
        self.algorithms = tuple(self.algorithms)
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown recovery algorithms {unknown}, expected {ALGORITHMS}")
        if self.prior not in ("K1", "K2"):
            raise ConfigError(f"prior must be K1 or K2, got '{self.prior}'")

    @classmethod
    def simulation(cls, **overrides) -> "ExperimentConfig":
        """Four LSBs at 0.50 V with i.i.d. failures"""
        return replace(cls(voltage=0.50, name="simulation"), **overrides)

    @classmethod
    def chip_experiment(cls, **overrides) -> "ExperimentConfig":
        """
        Four LSBs at 0.50 V on a sampled chip that runs 10% noisier than its
        calibration and whose wordlines deviate from the average, recovered
        with the calibrated average profile.
        """
        return replace(
            cls(
                voltage=0.50,
                mode="chip",
                chip_drift=1.1,
                chip_wordline_sigma=CHIP_WORDLINE_SIGMA,
                chip_profile="average",
                name="chip",
            ),
            **overrides,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        dataset = DatasetSpec(**data.pop("dataset", {}))
        em = EmConfig.from_dict(data.pop("em", {}))
        epsilon = data.pop("epsilon", None)
        if isinstance(epsilon, str):
            epsilon = parse_epsilon(epsilon)
        if "f" in data and data["f"] is not None:
            data["f"] = tuple(data["f"])
        if "algorithms" in data:
            data["algorithms"] = tuple(data["algorithms"])
        return cls(dataset=dataset, em=em, epsilon=epsilon, **data)

    def output_dir(self) -> Path:
        return Path(self.out_dir or get_setting("SRAMDP_OUT_DIR")) / self.name


def parse_epsilon(text: Union[str, float]) -> float:
    """Parse an epsilon such as '1.49', 'ln3' or 'ln(3)'"""
    if not isinstance(text, str):
        return float(text)
    raw = text.strip().lower().replace(" ", "")
    try:
        if raw.startswith("ln"):
            return math.log(float(raw[2:].strip("()")))
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse epsilon '{text}'")


def chip_seed_for(master_seed: int) -> int:
    """Seed of the chip fabricated for a run with this master seed"""
    return int(stage_seed(master_seed, "chip").generate_state(1)[0])


def mechanism_for(cfg: ExperimentConfig) -> MechanismConfig:
    """Mechanism realizing the experiment's failure setting"""
    width = cfg.dataset.width
    noise = cfg.noise_source
    if cfg.voltage is not None:
        cells = (CellSpec.reliable(),) * (width - 4) + (CellSpec.c61_6t(),) * 4
        permset = PermSet.default() if width == 8 else PermSet.identity(width)
        base = MechanismConfig(
            width=width, cells=cells, voltage=cfg.voltage, permset=permset, noise_source=noise
        )
        if cfg.mode == "chip":
            words = cfg.chip_words or cfg.dataset.count
            chip = sample_chip(
                cells,
                words,
                chip_seed_for(cfg.seed),
                alpha=cfg.chip_drift,
                wordline_sigma=cfg.chip_wordline_sigma,
            )
            return base.with_chip(chip)
        return base
    if cfg.f is not None:
        return MechanismConfig.from_rates(cfg.f, noise_source=noise)
    if cfg.pattern is not None:
        return MechanismConfig.from_rates(named_pattern(cfg.pattern, cfg.epsilon, width).f, noise_source=noise)
    lsbs = tuple(range(width - 4, width))
    profile = FailureProfile.homogeneous(f_for_epsilon(cfg.epsilon, 4), lsbs, width)
    return MechanismConfig.from_rates(profile.f, noise_source=noise)


def curator_profiles(
    cfg: ExperimentConfig, mechanism: MechanismConfig, word_indices: np.ndarray
) -> Union[FailureProfile, List[FailureProfile]]:
    """Failure profile(s) the curator recovers with"""
    if mechanism.chip is None or cfg.chip_profile == "average":
        return mechanism.profile()
    chip = mechanism.chip
    if cfg.chip_profile == "measured":
        return effective_f(mechanism.permset, chip.measured_profile(mechanism.voltage))
    per_word = {
        int(w): effective_f(mechanism.permset, chip.word_profile(int(w), mechanism.voltage))
        for w in np.unique(word_indices)
    }
    return [per_word[int(w)] for w in word_indices]


def _recover(
    algorithm: str,
    outputs: np.ndarray,
    profile: Union[FailureProfile, List[FailureProfile]],
    candidates: CandidateSet,
    cfg: ExperimentConfig,
) -> RecoveryResult:
    if algorithm == "em":
        return em_recover(outputs, profile, candidates, cfg.em)
    if not isinstance(profile, FailureProfile):
        raise ConfigError("CLR recovery needs a single failure profile, not per-word profiles")
    return clr_recover(outputs, profile, candidates)


def _evaluate(
    cfg: ExperimentConfig,
    data: np.ndarray,
    outputs: np.ndarray,
    nominal: FailureProfile,
    recovery_profile: Union[FailureProfile, List[FailureProfile]],
    mode: str,
) -> Tuple[ResultRecord, Dict[str, RecoveryResult], np.ndarray, np.ndarray]:
    width = cfg.dataset.width
    candidates = CandidateSet.full(width)
    prior = (
        build_prior("K2", candidates, dataset=data) if cfg.prior == "K2" else build_prior("K1", candidates)
    )
    ia = ia_values(outputs, prior, nominal)
    ul = ul_values(data, nominal)
    truth = empirical_distribution(data, candidates)

    record = ResultRecord(
        name=cfg.name,
        mode=mode,
        seed=cfg.seed,
        count=int(data.size),
        epsilon=epsilon_inf(nominal),
        z=nominal.z,
        ia_mean=float(ia.mean()),
        ia_std=float(ia.std()),
        ul_mean=float(ul.mean()),
        ul_std=float(ul.std()),
        l1_mean=float(np.abs(outputs - data).mean()),
    )
    recoveries: Dict[str, RecoveryResult] = {}
    for algorithm in cfg.algorithms:
        result = _recover(algorithm, outputs, recovery_profile, candidates, cfg)
        recoveries[algorithm] = result
        record.mse[algorithm] = count_mse(result.distribution, data)
        record.tv[algorithm] = total_variation(result.distribution, truth)
        record.iterations[algorithm] = result.iterations
        record.converged[algorithm] = result.converged
    return record, recoveries, ia, ul


def _write_artifacts(
    cfg: ExperimentConfig,
    record: ResultRecord,
    data: np.ndarray,
    outputs: np.ndarray,
    pattern_indices: np.ndarray,
    word_indices: np.ndarray,
    ia: np.ndarray,
    ul: np.ndarray,
    recoveries: Dict[str, RecoveryResult],
    fault_map: Optional[Dict[str, Any]] = None,
) -> Dict[str, str]:
    out_dir = cfg.output_dir()
    size = 1 << cfg.dataset.width
    original = np.bincount(data, minlength=size)
    perturbed = np.bincount(outputs, minlength=size)
    algorithms = list(recoveries)
    with ArtifactWriter(out_dir) as writer:
        records_path = writer.csv(
            "records.csv",
            ["input", "output", "pattern_index", "word_index", "ul", "ia"],
            zip(data, outputs, pattern_indices, word_indices, ul, ia),
        )
        histogram_path = writer.csv(
            "histograms.csv",
            ["value", "original", "perturbed"] + [f"recovered_{a}" for a in algorithms],
            (
                [v, original[v], perturbed[v]]
                + [float(recoveries[a].distribution.probs[v] * data.size) for a in algorithms]
                for v in range(size)
            ),
        )
        result_path = writer.json("result.json", record.to_dict(include_runtime=cfg.include_runtime))
        paths = {"records": str(records_path), "histograms": str(histogram_path), "result": str(result_path)}
        if fault_map is not None:
            paths["fault_map"] = str(writer.json("fault-map.json", fault_map))
    return paths


def run_experiment(cfg: ExperimentConfig, write_artifacts: bool = True) -> ResultRecord:
    """
    Generate data, perturb every record, measure IA and UL, recover the input
    distribution and (optionally) write records.csv, histograms.csv and
    result.json, plus fault-map.json for chip runs. Identical config and seed
    give identical artifacts.
    """
    start = time.time()
    data = cfg.dataset.generate(cfg.seed)
    mechanism = mechanism_for(cfg)
    batch = perturb_many(data, mechanism, RandomSources.from_seed(cfg.seed, mechanism))
    nominal = mechanism.profile()
    recovery_profile = curator_profiles(cfg, mechanism, batch.word_indices)
    logger.info("run %s: %d records perturbed in %s mode", cfg.name, data.size, cfg.mode)

    record, recoveries, ia, ul = _evaluate(
        cfg, data, batch.outputs, nominal, recovery_profile, cfg.mode
    )
    record.runtime = time.time() - start
    if write_artifacts:
        record.artifacts = _write_artifacts(
            cfg, record, data, batch.outputs, batch.pattern_indices, batch.word_indices,
            ia, ul, recoveries,
            mechanism.chip.dump_fault_map(mechanism.voltage) if mechanism.chip is not None else None,
        )
    logger.info("run %s finished in %.2fs: mse=%s", cfg.name, record.runtime, record.mse)
    return record


@dataclass
class RrComparison:
    """SRAM_DP and per-bit randomized response on the same data"""
    sram: ResultRecord
    rr: ResultRecord
    sram_outputs: np.ndarray
    rr_outputs: np.ndarray

    def get_summary(self) -> Dict[str, Any]:
        return {
            "epsilon": self.sram.epsilon,
            "sram": {"ul_mean": self.sram.ul_mean, "l1_mean": self.sram.l1_mean, "mse": self.sram.mse},
            "rr": {"ul_mean": self.rr.ul_mean, "l1_mean": self.rr.l1_mean, "mse": self.rr.mse},
        }


def compare_rr(cfg: ExperimentConfig) -> RrComparison:
    """
    Run SRAM_DP and randomized response at matched per-bit budgets.

    RR flips bit i with probability f_i/2 of the curator's nominal profile and
    is recovered with that same profile.
    """
    data = cfg.dataset.generate(cfg.seed)
    mechanism = mechanism_for(cfg)
    batch = perturb_many(data, mechanism, RandomSources.from_seed(cfg.seed, mechanism))
    nominal = mechanism.profile()
    recovery_profile = curator_profiles(cfg, mechanism, batch.word_indices)
    sram = _evaluate(cfg, data, batch.outputs, nominal, recovery_profile, cfg.mode)[0]

    rr_outputs = rr_perturb_many(data, rr_epsilons_for_profile(nominal), stage_rng(cfg.seed, "noise"))
    rr = _evaluate(cfg, data, rr_outputs, nominal, nominal, "rr")[0]
    logger.info("compare-rr %s: sram mse=%s rr mse=%s", cfg.name, sram.mse, rr.mse)
    return RrComparison(sram, rr, batch.outputs, rr_outputs)


async def _run_parallel(configs: Sequence[ExperimentConfig], write_artifacts: bool) -> List[Any]:
    loop = asyncio.get_running_loop()
    tasks = [
        loop.run_in_executor(None, run_experiment, cfg, write_artifacts) for cfg in configs
    ]
    return await asyncio.gather(*tasks, return_exceptions=True)


def run_sweep(
    configs: Sequence[ExperimentConfig], parallel: bool = True, write_artifacts: bool = False
) -> List[ResultRecord]:
    """Run independent experiments, concurrently when asked; results keep submission order"""
    if not parallel:
        return [run_experiment(cfg, write_artifacts) for cfg in configs]
    results = asyncio.run(_run_parallel(configs, write_artifacts))
    for cfg, result in zip(configs, results):
        if isinstance(result, Exception):
            logger.error("sweep run %s failed: %s", cfg.name, result)
            raise result
    return list(results)
