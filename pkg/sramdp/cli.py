"""
Command-line interface for sramdp
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bitcodec import CandidateSet
from .config import get_seed, get_setting, load_config_file
from .errors import ConfigError, NumericError
from .harness import (
    DatasetSpec,
    ExperimentConfig,
    chip_seed_for,
    compare_rr,
    gen_grid_checkins,
    named_pattern,
    parse_epsilon,
    run_experiment,
)
from .mechanism import FailureProfile, MechanismConfig, RandomSources, perturb_many
from .memmodel import CellSpec, nearest_voltage, sample_chip, voltage_for_rate
from .privacy import build_prior, f_for_epsilon, privacy_report
from .recovery import EmConfig, MomentConstraints, clr_recover, em_recover
from .reporting import read_column, write_csv, write_json
from .utility import (
    delta_pmf,
    delta_pmf_bruteforce,
    expected_l1,
    l1_bound_homogeneous,
    mean_ul,
    pmf_rows,
)
from .__version__ import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

LOG_FORMAT = "%(asctime)s  %(name)s:  %(levelname)s  %(message)s"


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got '{text}'")


def _emit(obj: Any) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _out_path(args: argparse.Namespace, name: str) -> Path:
    if getattr(args, "out", None):
        path = Path(args.out)
    else:
        path = Path(args.out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _profile_from_args(args: argparse.Namespace, width: int = 8) -> FailureProfile:
    """Failure profile from --f, --f-profile, --pattern/--epsilon or --config"""
    if getattr(args, "f", None):
        return FailureProfile(tuple(_parse_floats(args.f)))
    if getattr(args, "f_profile", None):
        data = load_config_file(args.f_profile)
        if "f" not in data:
            raise ConfigError(f"profile file {args.f_profile} needs an 'f' list")
        return FailureProfile(tuple(data["f"]))
    if getattr(args, "pattern", None):
        if not args.epsilon:
            raise ConfigError("--pattern needs --epsilon")
        return named_pattern(args.pattern, parse_epsilon(args.epsilon), width)
    if args.config:
        return MechanismConfig.from_file(args.config).profile()
    return MechanismConfig.default().profile()


def _parse_clip(text: str) -> Tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"clip range looks like 'lo:hi', got '{text}'")
    return lo, hi


def cmd_gen_data(args: argparse.Namespace) -> int:
    seed = get_seed(args.seed)
    if args.kind == "grid":
        points = gen_grid_checkins(args.count, seed, width=args.width)
        path = write_csv(_out_path(args, "checkins.csv"), ["x", "y"], points.tolist())
    else:
        clip = _parse_clip(args.clip) if args.clip else None
        spec = DatasetSpec(
            kind="gaussian", mean=args.mean, std=args.std, count=args.count, width=args.width, clip=clip
        )
        path = write_csv(_out_path(args, "data.csv"), ["value"], ([v] for v in spec.generate(seed)))
    logger.info("wrote %s", path)
    return EXIT_OK


def cmd_perturb(args: argparse.Namespace) -> int:
    config = MechanismConfig.from_file(args.config) if args.config else MechanismConfig.default()
    values = np.asarray(read_column(args.input, args.column), dtype=np.int64)
    seed = get_seed(args.seed)
    batch = perturb_many(values, config, RandomSources.from_seed(seed, config))
    path = write_csv(
        _out_path(args, "perturbed.csv"),
        ["input", "output", "pattern_index"],
        zip(batch.inputs, batch.outputs, batch.pattern_indices),
    )
    logger.info("perturbed %d values into %s", values.size, path)
    return EXIT_OK


def _parse_moments(items: Optional[Sequence[str]]) -> Optional[MomentConstraints]:
    if not items:
        return None
    pairs = []
    for item in items:
        try:
            order, value = item.split("=")
            pairs.append((int(order), float(value)))
        except ValueError:
            raise ConfigError(f"moment constraints look like 'j=value', got '{item}'")
    return MomentConstraints(tuple(pairs))


def cmd_recover(args: argparse.Namespace) -> int:
    profile = _profile_from_args(args)
    observations = read_column(args.obs, "output")
    candidates = CandidateSet.from_range(args.omega, profile.width) if args.omega else CandidateSet.full(profile.width)
    if args.algo == "em":
        result = em_recover(observations, profile, candidates, EmConfig(args.delta, args.max_iterations))
    else:
        result = clr_recover(observations, profile, candidates, _parse_moments(args.moment))
    path = write_csv(_out_path(args, "phat.csv"), ["value", "probability"], result.distribution.rows())
    logger.info("%s recovery: %d iterations, converged=%s -> %s", args.algo, result.iterations, result.converged, path)
    return EXIT_OK


def cmd_pmf(args: argparse.Namespace) -> int:
    profile = FailureProfile(tuple(_parse_floats(args.f)))
    pmf = delta_pmf_bruteforce(profile) if args.bruteforce else delta_pmf(profile)
    write_csv(_out_path(args, "pmf.csv"), ["a", "probability"], pmf_rows(pmf))
    return EXIT_OK


def cmd_ul(args: argparse.Namespace) -> int:
    profile = _profile_from_args(args)
    report: Dict[str, Any] = {"f": list(profile.f), "expected_l1": expected_l1(profile)}
    if len(set(profile.f)) == 1:
        report["l1_bound"] = l1_bound_homogeneous(profile.f[0], profile.width)
    if args.input:
        mean, std = mean_ul(read_column(args.input, args.column), profile)
        report["ul_mean"] = mean
        report["ul_std"] = std
    _emit(report)
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    epsilon = parse_epsilon(args.epsilon)
    rate = f_for_epsilon(epsilon, args.cells)
    spec = CellSpec.c61_6t()
    voltage, table_rate = nearest_voltage(spec, rate)
    try:
        interpolated: Optional[float] = voltage_for_rate(spec, rate)
    except ConfigError:
        interpolated = None
    _emit({
        "epsilon": epsilon,
        "cells": args.cells,
        "f": rate,
        "nearest_voltage": voltage,
        "nearest_rate": table_rate,
        "interpolated_voltage": interpolated,
    })
    return EXIT_OK


def cmd_privacy_report(args: argparse.Namespace) -> int:
    profile = _profile_from_args(args)
    alpha = _parse_floats(args.alpha) if args.alpha else None
    if alpha is not None and len(alpha) == 1:
        alpha = alpha[0]
    observations = read_column(args.obs, "output") if args.obs else None
    prior = None
    if observations is not None and args.prior == "K2":
        if not args.data:
            raise ConfigError("a K2 prior needs --data")
        prior = build_prior("K2", CandidateSet.full(profile.width), dataset=read_column(args.data))
    report = privacy_report(profile, alpha, observations, prior, args.include_intact)
    data = report.to_dict()
    if args.out:
        write_json(_out_path(args, "privacy.json"), data)
    else:
        _emit(data)
    return EXIT_OK


def cmd_fault_map(args: argparse.Namespace) -> int:
    if args.config:
        config = MechanismConfig.from_file(args.config)
        if config.chip is None:
            raise ConfigError(f"mechanism config {args.config} does not describe a chip")
        chip, voltage = config.chip, config.voltage
    else:
        cells = MechanismConfig.default().cells
        chip = sample_chip(
            cells,
            args.words,
            chip_seed_for(get_seed(args.seed)),
            alpha=args.alpha,
            wordline_sigma=args.wordline_sigma,
        )
        voltage = args.voltage
    dump = chip.dump_fault_map(voltage)
    path = write_json(_out_path(args, "fault-map.json"), dump)
    logger.info("fault map of %d words (%d weak) -> %s", chip.words, len(dump["weak_words"]), path)
    return EXIT_OK


def _experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides: Dict[str, Any] = {"out_dir": args.out_dir}
    if args.config:
        data = load_config_file(args.config)
        if args.seed is not None or "seed" not in data:
            overrides["seed"] = get_seed(args.seed)
        data.update(overrides)
        return ExperimentConfig.from_dict(data)
    overrides["seed"] = get_seed(args.seed)
    if args.preset == "chip":
        base = ExperimentConfig.chip_experiment(**overrides)
    elif args.epsilon or args.f:
        fields: Dict[str, Any] = dict(overrides, name=args.name or "experiment")
        if args.f:
            fields["f"] = _parse_floats(args.f)
        else:
            fields["epsilon"] = parse_epsilon(args.epsilon)
            fields["pattern"] = args.pattern
        base = ExperimentConfig.from_dict(fields)
    else:
        base = ExperimentConfig.simulation(**overrides)
    if args.algo:
        base.algorithms = tuple(args.algo)
    if args.name:
        base.name = args.name
    return base


def cmd_run_experiment(args: argparse.Namespace) -> int:
    cfg = _experiment_from_args(args)
    record = run_experiment(cfg)
    _emit(record.to_dict())
    return EXIT_OK


def cmd_compare_rr(args: argparse.Namespace) -> int:
    cfg = _experiment_from_args(args)
    summary = compare_rr(cfg).get_summary()
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "compare-rr.json", summary)
    _emit(summary)
    return EXIT_OK


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=["simulation", "chip"], default="simulation")
    parser.add_argument("--name", help="Run name (artifact subdirectory)")
    parser.add_argument("--pattern", choices=["F1", "F2", "F3"])
    parser.add_argument("--epsilon", help="Privacy budget, e.g. 1.49 or ln3")
    parser.add_argument("--f", help="Explicit MSB-first failure profile, comma separated")
    parser.add_argument("--algo", action="append", choices=["em", "clr"], help="Recovery algorithm (repeatable)")


def _add_global_flags(parser: argparse.ArgumentParser, default: Any) -> None:
    parser.add_argument("--seed", type=int, default=default, help="Master seed (default: SRAMDP_SEED)")
    parser.add_argument("--config", default=default, help="YAML or JSON config file")
    parser.add_argument("--out-dir", default=default, help="Output directory (default: SRAMDP_OUT_DIR)")
    parser.add_argument("--log-level", default=default, help="Logging level (default: SRAMDP_LOG_LEVEL)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sramdp", description="SRAM_DP local differential privacy simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_global_flags(parser, None)
    # the same flags after the subcommand; suppressed so they only override when given
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="Generate a synthetic dataset")
    p.add_argument("--kind", choices=["gaussian", "grid"], default="gaussian")
    p.add_argument("--mean", type=float, default=125.0)
    p.add_argument("--std", type=float, default=20.0)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--width", type=int, default=8)
    p.add_argument("--clip", help="lo:hi clip range")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("perturb", parents=[common], help="Run values through the mechanism")
    p.add_argument("--input", required=True)
    p.add_argument("--column", default=None, help="Input column when the CSV has a header")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_perturb)

    p = sub.add_parser("recover", parents=[common], help="Recover the input distribution")
    p.add_argument("--algo", choices=["em", "clr"], default="em")
    p.add_argument("--f-profile", help="JSON/YAML file with an 'f' list")
    p.add_argument("--f", help="MSB-first failure profile, comma separated")
    p.add_argument("--obs", required=True, help="Perturbed CSV (reads the 'output' column)")
    p.add_argument("--omega", help="Candidate range lo:hi")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--max-iterations", type=int, default=10000)
    p.add_argument("--moment", action="append", help="CLR moment constraint j=value (repeatable)")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_recover)

    p = sub.add_parser("pmf", parents=[common], help="Exact PMF of the value perturbation")
    p.add_argument("--f", required=True, help="MSB-first failure profile, comma separated")
    p.add_argument("--bruteforce", action="store_true")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_pmf)

    p = sub.add_parser("ul", parents=[common], help="Utility loss of a failure profile")
    p.add_argument("--pattern", choices=["F1", "F2", "F3"])
    p.add_argument("--epsilon")
    p.add_argument("--f")
    p.add_argument("--input", help="Dataset CSV for the mean UL")
    p.add_argument("--column", default=None)
    p.set_defaults(handler=cmd_ul)

    p = sub.add_parser("calibrate", parents=[common], help="Failure rate and voltage for a target epsilon")
    p.add_argument("--epsilon", required=True)
    p.add_argument("--cells", type=int, default=4)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("privacy-report", parents=[common], help="Epsilon, droop bound and IA report")
    p.add_argument("--f")
    p.add_argument("--alpha", help="Drift factor(s), comma separated")
    p.add_argument("--obs", help="Perturbed CSV for IA statistics")
    p.add_argument("--prior", choices=["K1", "K2"], default="K1")
    p.add_argument("--data", help="Dataset CSV for a K2 prior")
    p.add_argument("--include-intact", action="store_true")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_privacy_report)

    p = sub.add_parser("fault-map", parents=[common], help="Sample a chip and dump its fault map")
    p.add_argument("--words", type=int, default=1000)
    p.add_argument("--voltage", type=float, default=0.50)
    p.add_argument("--alpha", type=float, default=1.0, help="Drift factor of the sampled chip")
    p.add_argument("--wordline-sigma", type=float, default=0.0, help="Per-wordline offset spread, volts")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_fault_map)

    p = sub.add_parser("run-experiment", parents=[common], help="End-to-end experiment with artifacts")
    _add_experiment_flags(p)
    p.set_defaults(handler=cmd_run_experiment)

    p = sub.add_parser("compare-rr", parents=[common], help="SRAM_DP against randomized response")
    _add_experiment_flags(p)
    p.set_defaults(handler=cmd_compare_rr)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = (args.log_level or get_setting("SRAMDP_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format=LOG_FORMAT)
    if args.out_dir is None:
        args.out_dir = get_setting("SRAMDP_OUT_DIR")

    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as e:
        logger.error("numeric failure: %s", e)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
