"""
Curator-side distribution recovery for sramdp: EM and constrained least
squares (CLR), plus the exact-inversion oracle and error metrics.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from .bitcodec import CandidateSet, Word, decode
from .errors import ConfigError, InfeasibleConstraintsError, NumericError
from .mechanism import Channel, FailureProfile

logger = logging.getLogger(__name__)

__all__ = [
    "CandidateSet",
    "Distribution",
    "MomentConstraints",
    "EmConfig",
    "ClrConfig",
    "RecoveryResult",
    "em_recover",
    "clr_recover",
    "exact_inversion",
    "empirical_distribution",
    "total_variation",
    "count_mse",
]

Observations = Union[Sequence[int], Sequence[Word], np.ndarray]


def _as_values(observations: Observations) -> np.ndarray:
    items = list(observations) if not isinstance(observations, np.ndarray) else observations
    if len(items) == 0:
        raise ConfigError("no observations given")
    if isinstance(items[0], Word):
        return np.array([decode(w) for w in items], dtype=np.int64)
    return np.asarray(items, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector over a candidate set"""
    candidates: CandidateSet
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (len(self.candidates),):
            raise ConfigError(f"{probs.size} probabilities for {len(self.candidates)} candidates")
        if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigError("distribution must be non-negative and sum to 1")
        object.__setattr__(self, "probs", np.clip(probs, 0.0, None))

    @classmethod
    def uniform(cls, candidates: CandidateSet) -> "Distribution":
        return cls(candidates, np.full(len(candidates), 1.0 / len(candidates)))

    def moment(self, order: int) -> float:
        return float(self.probs @ self.candidates.as_array().astype(float) ** order)

    def counts(self, total: int) -> np.ndarray:
        return self.probs * total

    def rows(self) -> List[Tuple[int, float]]:
        """(value, probability) rows for CSV output"""
        return [(int(v), float(p)) for v, p in zip(self.candidates.values, self.probs)]


@dataclass(frozen=True)
class MomentConstraints:
    """Equality constraints E[X^j] = m_j"""
    items: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        items = tuple((int(j), float(m)) for j, m in self.items)
        orders = [j for j, _ in items]
        if any(j < 1 for j in orders) or len(set(orders)) != len(orders):
            raise ConfigError(f"moment orders must be distinct positive integers, got {orders}")
        object.__setattr__(self, "items", items)

    @classmethod
    def from_dataset(cls, values: Sequence[int], orders: Sequence[int] = (1,)) -> "MomentConstraints":
        data = np.asarray(values, dtype=float)
        return cls(tuple((j, float(np.mean(data ** j))) for j in orders))

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class EmConfig:
    """Stopping rule for EM: max |P_t - P_t-1| <= delta or max_iterations"""
    delta: float = 1e-3
    max_iterations: int = 10000

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"EM tolerance must be positive, got {self.delta}")
        if self.max_iterations < 1:
            raise ConfigError(f"EM needs at least one iteration, got {self.max_iterations}")

    @classmethod
    def fast(cls) -> "EmConfig":
        """Tolerance used for the reconstruction experiments"""
        return cls(delta=1e-3, max_iterations=10000)

    @classmethod
    def strict(cls) -> "EmConfig":
        return cls(delta=1e-7, max_iterations=200000)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EmConfig":
        return cls(
            delta=float(data.get("delta", 1e-3)),
            max_iterations=int(data.get("max_iterations", 10000)),
        )


@dataclass
class ClrConfig:
    """
    Projected-gradient solver settings.

    moment_tolerance bounds |m_j(P) - m_j| / max(1, |m_j|) on the natural moments.
    """
    tolerance: float = 1e-8
    max_iterations: int = 100000
    moment_tolerance: float = 1e-8
    max_penalty_rounds: int = 40

    def __post_init__(self):
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise ConfigError("CLR tolerance must be positive and max_iterations at least 1")


@dataclass
class RecoveryResult:
    """Recovered distribution and solver diagnostics"""
    distribution: Distribution
    algorithm: str
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


ProfileArg = Union[FailureProfile, Sequence[FailureProfile]]


def _grouped_likelihoods(
    values: np.ndarray, f: ProfileArg, candidates: CandidateSet
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Likelihood rows for each distinct (profile, observation) pair and their counts.

    Rows are rescaled by their maximum; the posterior is unaffected.
    """
    if isinstance(f, FailureProfile):
        distinct, counts = np.unique(values, return_counts=True)
        log_l = Channel(candidates, f).log_likelihoods(distinct)
    else:
        profiles = list(f)
        if len(profiles) != len(values):
            raise ConfigError(f"{len(profiles)} profiles for {len(values)} observations")
        profile_ids: Dict[FailureProfile, int] = {}
        ids = np.array([profile_ids.setdefault(p, len(profile_ids)) for p in profiles])
        keys = ids * (1 << candidates.width) + values
        distinct_keys, counts = np.unique(keys, return_counts=True)
        key_profiles = distinct_keys >> candidates.width
        key_values = distinct_keys & ((1 << candidates.width) - 1)
        log_l = np.empty((len(distinct_keys), len(candidates)))
        for profile, pid in profile_ids.items():
            rows = key_profiles == pid
            log_l[rows] = Channel(candidates, profile).log_likelihoods(key_values[rows])

    row_max = log_l.max(axis=1, keepdims=True)
    if np.any(np.isneginf(row_max)):
        missing = int(np.isneginf(row_max).sum())
        raise NumericError(
            f"{missing} distinct observations have zero likelihood under every candidate"
        )
    return np.exp(log_l - row_max), counts.astype(float)


def em_recover(
    observations: Observations,
    f: ProfileArg,
    candidates: CandidateSet,
    cfg: Optional[EmConfig] = None,
) -> RecoveryResult:
    """
    Estimate the input distribution by expectation maximization.

    Args:
        observations: Perturbed values (ints or Words)
        f: One failure profile for all records, or one per record
        candidates: Candidate input values
        cfg: Stopping rule

    Returns:
        RecoveryResult; converged is False when max_iterations was reached.
        On convergence the final pass that only confirms the fixed point is
        not counted in iterations (history still records its change).
    """
    cfg = cfg or EmConfig()
    values = _as_values(observations)
    likelihood, counts = _grouped_likelihoods(values, f, candidates)
    total = counts.sum()

    prior = np.full(len(candidates), 1.0 / len(candidates))
    history: List[float] = []
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        joint = likelihood * prior[None, :]
        evidence = joint.sum(axis=1, keepdims=True)
        if np.any(evidence <= 0):
            raise NumericError("EM posterior has a zero denominator; prior lost all support")
        updated = counts @ (joint / evidence) / total
        change = float(np.abs(updated - prior).max())
        history.append(change)
        prior = updated
        if change <= cfg.delta:
            converged = True
            break

    if converged:
        # the last pass only confirms the fixed point
        iteration = max(1, iteration - 1)
        logger.info("EM converged after %d iterations (delta=%g)", iteration, cfg.delta)
    else:
        logger.warning(
            "EM stopped after %d iterations without reaching delta=%g (last change %.3g)",
            iteration, cfg.delta, history[-1],
        )
    prior = prior / prior.sum()
    return RecoveryResult(Distribution(candidates, prior), "em", iteration, converged, history)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex"""
    u = np.sort(v)[::-1]
    cssv = np.cumsum(u) - 1.0
    index = np.arange(1, v.size + 1)
    rho = np.nonzero(u - cssv / index > 0)[0][-1]
    theta = cssv[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def _fista(
    gram: np.ndarray,
    linear: np.ndarray,
    lipschitz: float,
    start: np.ndarray,
    tolerance: float,
    max_iterations: int,
) -> Tuple[np.ndarray, int, bool]:
    """Accelerated projected gradient for min 1/2 p'Gp - h'p over the simplex"""
    p = start.copy()
    y = p.copy()
    t = 1.0
    for iteration in range(1, max_iterations + 1):
        grad = y @ gram - linear
        p_next = _project_simplex(y - grad / lipschitz)
        mapping_norm = lipschitz * float(np.linalg.norm(y - p_next))
        if mapping_norm < tolerance:
            return p_next, iteration, True
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        momentum = (t - 1.0) / t_next
        # restart momentum when the step moves against the gradient
        if float((y - p_next) @ (p_next - p)) > 0:
            t_next, momentum = 1.0, 0.0
        y = p_next + momentum * (p_next - p)
        p, t = p_next, t_next
    return p, max_iterations, False


def _moment_system(
    constraints: MomentConstraints, candidates: CandidateSet
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Moment rows and targets on values scaled to [0, 1], and the factor back to natural units"""
    values = candidates.as_array().astype(float)
    scale = max(float(values.max()), 1.0)
    rows = np.array([(values / scale) ** j for j, _ in constraints.items])
    targets = np.array([m / scale ** j for j, m in constraints.items])
    units = np.array([scale ** j for j, _ in constraints.items])
    return rows, targets, units


def _check_feasible(rows: np.ndarray, targets: np.ndarray) -> None:
    size = rows.shape[1]
    result = linprog(
        c=np.zeros(size),
        A_eq=np.vstack([rows, np.ones(size)]),
        b_eq=np.append(targets, 1.0),
        bounds=[(0.0, 1.0)] * size,
        method="highs",
    )
    if result.status != 0:
        raise InfeasibleConstraintsError(
            f"no distribution over the candidates meets the moment constraints ({result.message})"
        )


def clr_recover(
    observations: Observations,
    f: FailureProfile,
    candidates: CandidateSet,
    constraints: Optional[MomentConstraints] = None,
    cfg: Optional[ClrConfig] = None,
) -> RecoveryResult:
    """
    Constrained least squares: minimize 1/2 ||P M - Q||^2 over distributions P.

    Moment equalities are enforced with an augmented Lagrangian whose penalty
    grows tenfold whenever the violation stalls.
    """
    cfg = cfg or ClrConfig()
    values = _as_values(observations)
    channel = Channel(candidates, f)
    matrix = channel.matrix
    index = candidates.index_of(values)
    observed = np.bincount(index[index >= 0], minlength=len(candidates)).astype(float) / len(values)

    gram = matrix @ matrix.T
    linear = observed @ matrix.T
    lipschitz = max(float(np.linalg.norm(matrix, 2)) ** 2, 1e-12)
    start = np.full(len(candidates), 1.0 / len(candidates))

    if not constraints:
        p, iterations, converged = _fista(
            gram, linear, lipschitz, start, cfg.tolerance, cfg.max_iterations
        )
        if not converged:
            logger.warning("CLR stopped after %d iterations without converging", iterations)
        return RecoveryResult(Distribution(candidates, p / p.sum()), "clr", iterations, converged)

    rows, targets, units = _moment_system(constraints, candidates)
    # violations are judged on the natural moments, relative to max(1, |m_j|)
    natural_targets = targets * units
    violation_scale = np.maximum(1.0, np.abs(natural_targets))
    _check_feasible(rows, targets)
    row_norm = float(np.linalg.norm(rows, 2)) ** 2
    multipliers = np.zeros(len(targets))
    penalty = 1.0
    p = start
    total_iterations = 0
    history: List[float] = []
    previous = np.inf
    for _ in range(cfg.max_penalty_rounds):
        aug_gram = gram + penalty * rows.T @ rows
        aug_linear = linear - rows.T @ multipliers + penalty * rows.T @ targets
        p, iterations, _ = _fista(
            aug_gram, aug_linear, lipschitz + penalty * row_norm, p,
            cfg.tolerance, max(1, cfg.max_iterations - total_iterations),
        )
        total_iterations += iterations
        residual = rows @ p - targets
        violation = float((np.abs(residual * units) / violation_scale).max())
        history.append(violation)
        logger.debug("CLR penalty round: mu=%g violation=%.3g", penalty, violation)
        if violation < cfg.moment_tolerance:
            return RecoveryResult(
                Distribution(candidates, p / p.sum()), "clr", total_iterations, True, history
            )
        multipliers = multipliers + penalty * residual
        if violation > 0.25 * previous:
            penalty *= 10.0
        previous = violation
        if total_iterations >= cfg.max_iterations:
            break
    raise InfeasibleConstraintsError(
        f"moment constraints still violated by {history[-1]:.3g} after {total_iterations} iterations"
    )


def exact_inversion(observations: Observations, f: FailureProfile, candidates: CandidateSet) -> np.ndarray:
    """Unconstrained estimate Q M^-1; entries may be negative"""
    values = _as_values(observations)
    matrix = Channel(candidates, f).matrix
    index = candidates.index_of(values)
    observed = np.bincount(index[index >= 0], minlength=len(candidates)).astype(float) / len(values)
    try:
        return np.linalg.solve(matrix.T, observed)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"channel matrix is singular: {e}")


def empirical_distribution(values: Observations, candidates: CandidateSet) -> Distribution:
    """Normalized histogram of the values that fall inside the candidate set"""
    index = candidates.index_of(_as_values(values))
    inside = index[index >= 0]
    if inside.size == 0:
        raise ConfigError("no values fall inside the candidate set")
    counts = np.bincount(inside, minlength=len(candidates)).astype(float)
    return Distribution(candidates, counts / counts.sum())


def total_variation(
    p: Union[Distribution, np.ndarray], q: Union[Distribution, np.ndarray]
) -> float:
    p = p.probs if isinstance(p, Distribution) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, Distribution) else np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def count_mse(estimate: Distribution, true_values: Observations) -> float:
    """Mean squared error between estimated and true per-value counts"""
    values = _as_values(true_values)
    index = estimate.candidates.index_of(values)
    truth = np.bincount(index[index >= 0], minlength=len(estimate.candidates)).astype(float)
    return float(np.mean((estimate.counts(len(values)) - truth) ** 2))
