"""
Reporting functionality for sramdp: result records, suite summaries and
deterministic CSV/JSON artifact writers.
"""

import csv
import json
import logging
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from .errors import ConfigError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class ResultRecord:
    """Metrics of one experiment run"""
    name: str
    mode: str
    seed: int
    count: int
    epsilon: float
    z: int
    ia_mean: float = 0.0
    ia_std: float = 0.0
    ul_mean: float = 0.0
    ul_std: float = 0.0
    l1_mean: float = 0.0
    mse: Dict[str, float] = field(default_factory=dict)
    tv: Dict[str, float] = field(default_factory=dict)
    iterations: Dict[str, int] = field(default_factory=dict)
    converged: Dict[str, bool] = field(default_factory=dict)
    runtime: float = 0.0
    artifacts: Dict[str, str] = field(default_factory=dict)

    def to_dict(self, include_runtime: bool = False) -> Dict[str, Any]:
        """Plain dict; runtime is left out unless asked for so reruns compare byte-equal"""
        data = {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "count": self.count,
            "epsilon": self.epsilon,
            "z": self.z,
            "ia_mean": self.ia_mean,
            "ia_std": self.ia_std,
            "ul_mean": self.ul_mean,
            "ul_std": self.ul_std,
            "l1_mean": self.l1_mean,
            "mse": dict(self.mse),
            "tv": dict(self.tv),
            "iterations": dict(self.iterations),
            "converged": dict(self.converged),
        }
        if include_runtime:
            data["runtime"] = self.runtime
        return data


@dataclass
class SuiteStats:
    """Statistics over a set of runs"""
    total: int = 0
    mean_mse: Dict[str, float] = field(default_factory=dict)
    median_mse: Dict[str, float] = field(default_factory=dict)
    execution_time: float = 0.0


@dataclass
class ExperimentSuiteResult:
    """Results from running several experiments"""
    records: List[ResultRecord] = field(default_factory=list)
    stats: SuiteStats = field(default_factory=SuiteStats)
    timestamp: str = field(default_factory=lambda: time.strftime("%Y-%m-%d %H:%M:%S"))

    def add_record(self, record: ResultRecord):
        self.records.append(record)
        self._update_stats()

    def _update_stats(self):
        self.stats.total = len(self.records)
        self.stats.execution_time = sum(r.runtime for r in self.records)
        algorithms = sorted({algo for r in self.records for algo in r.mse})
        self.stats.mean_mse = {
            algo: statistics.fmean([r.mse[algo] for r in self.records if algo in r.mse])
            for algo in algorithms
        }
        self.stats.median_mse = {
            algo: statistics.median([r.mse[algo] for r in self.records if algo in r.mse])
            for algo in algorithms
        }

    def get_summary(self) -> Dict[str, Any]:
        return {
            "timestamp": self.timestamp,
            "total_runs": self.stats.total,
            "mean_mse": self.stats.mean_mse,
            "median_mse": self.stats.median_mse,
            "execution_time": f"{self.stats.execution_time:.2f}s",
        }


def format_value(value: Any) -> str:
    """Stable text form of a CSV cell"""
    if hasattr(value, "item"):
        return format_value(value.item())
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV with a header row; identical input gives identical bytes"""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(obj), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def read_column(path: PathLike, column: Optional[str] = None) -> List[int]:
    """
    Read integers from a CSV file.

    With a header row the named column (default: the first) is read; a file of
    bare integers, one per line, is read as is.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = [row for row in csv.reader(f) if row]
    except FileNotFoundError:
        raise ConfigError(f"Input file not found: {path}")
    if not rows:
        raise ConfigError(f"Input file {path} is empty")

    first = rows[0][0].strip()
    has_header = not first.lstrip("-").isdigit()
    index = 0
    if has_header:
        header = [h.strip() for h in rows[0]]
        if column is not None:
            if column not in header:
                raise ConfigError(f"column '{column}' not found in {path}; columns are {header}")
            index = header.index(column)
        rows = rows[1:]
    try:
        return [int(row[index]) for row in rows]
    except (ValueError, IndexError) as e:
        raise ConfigError(f"Invalid integer data in {path}: {e}")


class ArtifactWriter:
    """
    Writes a set of artifacts all-or-nothing.

    Files go to temporary names inside the output directory and are renamed
    into place when the block exits cleanly; on error every temporary is
    removed.
    """

    def __init__(self, out_dir: PathLike):
        self.out_dir = Path(out_dir)
        self._pending: Dict[Path, Path] = {}

    def __enter__(self) -> "ArtifactWriter":
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def _temp_path(self, name: str) -> Path:
        final = self.out_dir / name
        temp = self.out_dir / f".{name}.partial"
        self._pending[final] = temp
        return temp

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        write_csv(self._temp_path(name), header, rows)
        return self.out_dir / name

    def json(self, name: str, obj: Any) -> Path:
        write_json(self._temp_path(name), obj)
        return self.out_dir / name

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            for final, temp in self._pending.items():
                os.replace(temp, final)
        else:
            for temp in self._pending.values():
                if temp.exists():
                    temp.unlink()
            logger.warning("discarded %d partial artifacts in %s", len(self._pending), self.out_dir)
        self._pending.clear()
        return False


def export_report(suite_result: ExperimentSuiteResult, output_path: PathLike, format: str = "json"):
    """Export suite results to a file"""
    if format.lower() == "json":
        _export_json_report(suite_result, output_path)
    elif format.lower() == "csv":
        _export_csv_report(suite_result, output_path)
    else:
        raise ConfigError(f"Unsupported report format: {format}")


def _export_json_report(suite_result: ExperimentSuiteResult, output_path: PathLike):
    data = {
        "summary": suite_result.get_summary(),
        "results": [record.to_dict(include_runtime=True) for record in suite_result.records],
    }
    write_json(output_path, data)


def _export_csv_report(suite_result: ExperimentSuiteResult, output_path: PathLike):
    algorithms = sorted({algo for r in suite_result.records for algo in r.mse})
    header = ["name", "mode", "seed", "count", "epsilon", "z", "ia_mean", "ul_mean", "l1_mean"]
    header += [f"mse_{a}" for a in algorithms] + [f"tv_{a}" for a in algorithms]
    rows = []
    for r in suite_result.records:
        row = [r.name, r.mode, r.seed, r.count, r.epsilon, r.z, r.ia_mean, r.ul_mean, r.l1_mean]
        row += [r.mse.get(a, "") for a in algorithms] + [r.tv.get(a, "") for a in algorithms]
        rows.append(row)
    write_csv(output_path, header, rows)
