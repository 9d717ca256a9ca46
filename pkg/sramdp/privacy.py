"""
Privacy analytics: worst-case epsilon, its inversion, the voltage-droop bound,
the MLE adversary and the in-accurateness (IA) meter.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bitcodec import CandidateSet, Word, decode, encode
from .errors import ConfigError, NumericError, UnboundedEpsilonError
from .mechanism import Channel, FailureProfile, MechanismConfig

logger = logging.getLogger(__name__)

PRIOR_KINDS = ("K1", "K2", "custom")

# Log-score margin under which two MLE candidates count as tied
TIE_TOLERANCE = 1e-12


def _position_epsilon(fi: float) -> float:
    return math.log((1 - fi / 2) / (fi / 2))


def _prone_positions(
    f: FailureProfile, failure_prone: Optional[Sequence[int]]
) -> Tuple[int, ...]:
    if failure_prone is None:
        return f.failure_prone
    positions = tuple(sorted(set(int(p) for p in failure_prone)))
    if any(not 0 <= p < f.width for p in positions):
        raise ConfigError(f"failure-prone positions {list(positions)} out of range for width {f.width}")
    unbounded = [p for p in positions if f.f[p] == 0]
    if unbounded:
        raise UnboundedEpsilonError(
            f"positions {unbounded} are declared failure-prone but have f = 0; epsilon is unbounded"
        )
    return positions


def epsilon_contributions(
    f: FailureProfile,
    failure_prone: Optional[Sequence[int]] = None,
    include_intact: bool = False,
) -> Tuple[float, ...]:
    """
    Per-position share of the worst-case epsilon, MSB first.

    Positions outside the failure-prone set contribute 0, or infinity when
    include_intact is set.
    """
    positions = set(_prone_positions(f, failure_prone))
    intact = math.inf if include_intact else 0.0
    return tuple(
        _position_epsilon(fi) if k in positions else intact for k, fi in enumerate(f.f)
    )


def epsilon_inf(
    f: FailureProfile,
    failure_prone: Optional[Sequence[int]] = None,
    include_intact: bool = False,
) -> float:
    """Worst-case epsilon: sum of ln((1 - f_i/2) / (f_i/2)) over failure-prone positions"""
    return float(sum(epsilon_contributions(f, failure_prone, include_intact)))


def f_for_epsilon(epsilon: float, z: int) -> float:
    """Homogeneous failure rate on z positions giving the target epsilon"""
    if epsilon < 0:
        raise ConfigError(f"epsilon must be non-negative, got {epsilon}")
    if z < 1:
        raise ConfigError(f"need at least one failed cell, got z={z}")
    return 2.0 / (1.0 + math.exp(epsilon / z))


def droop_bound(
    alpha: Union[float, Sequence[float]], f: Optional[FailureProfile] = None
) -> float:
    """
    Upper bound on |delta epsilon| when failure rates drift to alpha_i * f_i.

    Args:
        alpha: Drift factor per failure-prone position (or a single factor)
        f: Profile the drift applies to; when given, alpha_i <= 1/f_i is checked
    """
    if np.isscalar(alpha):
        count = f.z if f is not None else 1
        alphas = [float(alpha)] * count
    else:
        alphas = [float(a) for a in alpha]
    bad = [a for a in alphas if a <= 0.5]
    if bad:
        raise ConfigError(f"droop bound undefined for alpha <= 1/2, got {bad}")
    if f is not None:
        rates = [f.f[k] for k in f.failure_prone]
        if len(rates) != len(alphas):
            raise ConfigError(f"{len(alphas)} drift factors for {len(rates)} failure-prone positions")
        over = [(a, r) for a, r in zip(alphas, rates) if a * r > 1 + 1e-12]
        if over:
            raise ConfigError(f"drift pushes failure rate past 1: (alpha, f) = {over}")
    return float(sum(abs(math.log(2 * a - 1)) for a in alphas))


def drift_epsilon(f: FailureProfile, alpha: Union[float, Sequence[float]]) -> float:
    """Epsilon after scaling failure-prone rates by alpha (clamped to [0, 1])"""
    prone = f.failure_prone
    factors = np.ones(f.width)
    if np.isscalar(alpha):
        factors[list(prone)] = float(alpha)
    else:
        if len(alpha) != len(prone):
            raise ConfigError(f"{len(alpha)} drift factors for {len(prone)} failure-prone positions")
        factors[list(prone)] = np.asarray(alpha, dtype=float)
    drifted = np.clip(f.as_array() * factors, 0.0, 1.0)
    return epsilon_inf(FailureProfile(tuple(drifted)), failure_prone=prone)


def indistinguishable_set(o: Word, f: FailureProfile) -> CandidateSet:
    """The 2^z values that agree with o on every position that cannot fail"""
    if o.width != f.width:
        raise ConfigError(f"observation width {o.width} does not match profile width {f.width}")
    base = decode(o)
    for k in f.failure_prone:
        base &= ~(1 << (f.width - 1 - k))
    values = [base]
    for k in f.failure_prone:
        bit = 1 << (f.width - 1 - k)
        values = values + [v | bit for v in values]
    return CandidateSet(f.width, tuple(sorted(values)))


@dataclass(frozen=True)
class AdversaryPrior:
    """Adversary's prior belief over candidate values"""
    candidates: CandidateSet
    probs: Tuple[float, ...]
    kind: str = "custom"

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ConfigError(f"prior kind must be one of {PRIOR_KINDS}, got {self.kind!r}")
        probs = tuple(float(p) for p in self.probs)
        if len(probs) != len(self.candidates):
            raise ConfigError(f"{len(probs)} prior masses for {len(self.candidates)} candidates")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ConfigError("prior must be non-negative and sum to 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_weights(
        cls, candidates: CandidateSet, weights: Sequence[float], kind: str = "custom"
    ) -> "AdversaryPrior":
        """Normalize non-negative weights into a prior"""
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if total <= 0:
            raise ConfigError("prior weights have no mass")
        probs = weights / total
        # absorb rounding so the masses sum to 1 within tolerance
        probs[np.argmax(probs)] += 1.0 - probs.sum()
        return cls(candidates, tuple(probs), kind)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


def build_prior(
    kind: str,
    candidates: CandidateSet,
    dataset: Optional[Sequence[int]] = None,
    mean: Optional[float] = None,
    std: Optional[float] = None,
) -> AdversaryPrior:
    """
    Build an adversary prior.

    K1 is uniform over the candidates. K2 uses dataset statistics: the empirical
    histogram when a dataset is given, otherwise a discretized Gaussian from
    mean/std. A K2 prior with no mass on the candidates falls back to K1.
    """
    if kind == "K1":
        return AdversaryPrior.from_weights(candidates, np.ones(len(candidates)), "K1")
    if kind != "K2":
        raise ConfigError(f"unknown prior kind '{kind}', expected K1 or K2")

    if dataset is not None:
        counts = np.bincount(np.asarray(dataset, dtype=np.int64), minlength=1 << candidates.width)
        weights = counts[candidates.as_array()].astype(float)
    elif mean is not None and std is not None:
        values = candidates.as_array().astype(float)
        if std <= 0:
            weights = (values == round(mean)).astype(float)
        else:
            weights = np.exp(-0.5 * ((values - mean) / std) ** 2)
    else:
        raise ConfigError("a K2 prior needs a dataset or mean and std")

    if weights.sum() <= 0:
        logger.warning("K2 prior has no mass on the %d candidates; using K1", len(candidates))
        return build_prior("K1", candidates)
    return AdversaryPrior.from_weights(candidates, weights, "K2")


def _log_scores(
    observations: np.ndarray, prior: AdversaryPrior, f: FailureProfile
) -> np.ndarray:
    channel = Channel(prior.candidates, f)
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior.as_array())
    return channel.log_likelihoods(observations) + log_prior[None, :]


def _mle_from_scores(scores: np.ndarray, values: np.ndarray) -> np.ndarray:
    best = scores.max(axis=1)
    if np.any(np.isneginf(best)):
        raise NumericError("no candidate in the prior support can produce the observation")
    tied = scores >= best[:, None] - TIE_TOLERANCE
    return np.where(tied, values[None, :], np.iinfo(np.int64).max).min(axis=1)


def _posteriors(scores: np.ndarray) -> np.ndarray:
    best = scores.max(axis=1, keepdims=True)
    weights = np.exp(scores - best)
    return weights / weights.sum(axis=1, keepdims=True)


def mle_infer(o: Word, prior: AdversaryPrior, f: FailureProfile) -> Word:
    """Most likely input given the observation; ties go to the smallest value"""
    if o.width != f.width:
        raise ConfigError(f"observation width {o.width} does not match profile width {f.width}")
    scores = _log_scores(np.array([decode(o)]), prior, f)
    guess = _mle_from_scores(scores, prior.candidates.as_array())[0]
    return encode(int(guess), f.width)


def posterior(o: Word, prior: AdversaryPrior, f: FailureProfile) -> np.ndarray:
    """P(X | o) over the prior's candidates"""
    scores = _log_scores(np.array([decode(o)]), prior, f)
    if np.isneginf(scores.max()):
        raise NumericError("no candidate in the prior support can produce the observation")
    return _posteriors(scores)[0]


def ia_values(
    observations: Union[Sequence[int], np.ndarray], prior: AdversaryPrior, f: FailureProfile
) -> np.ndarray:
    """IA for each observed value, computed once per distinct value"""
    observations = np.asarray(observations, dtype=np.int64)
    distinct, inverse = np.unique(observations, return_inverse=True)
    scores = _log_scores(distinct, prior, f)
    values = prior.candidates.as_array()
    guesses = _mle_from_scores(scores, values)
    post = _posteriors(scores)
    ia = (post * np.abs(guesses[:, None] - values[None, :])).sum(axis=1)
    return ia[inverse]


def ia_meter(o: Word, prior: AdversaryPrior, f: FailureProfile) -> float:
    """Posterior-weighted absolute error of the MLE guess"""
    if o.width != f.width:
        raise ConfigError(f"observation width {o.width} does not match profile width {f.width}")
    return float(ia_values([decode(o)], prior, f)[0])


def mean_ia(
    observations: Union[Sequence[int], np.ndarray], prior: AdversaryPrior, f: FailureProfile
) -> Tuple[float, float]:
    """Mean and standard deviation of IA over the observations"""
    values = ia_values(observations, prior, f)
    return float(values.mean()), float(values.std())


@dataclass
class PrivacyReport:
    """Privacy summary of one operating point"""
    epsilon: float
    contributions: Tuple[float, ...]
    failure_prone: Tuple[int, ...]
    alpha: Optional[Tuple[float, ...]] = None
    droop_bound: Optional[float] = None
    drift_epsilon: Optional[float] = None
    ia_mean: Optional[float] = None
    ia_std: Optional[float] = None
    ia_per_observation: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        def number(x: Optional[float]) -> Any:
            if x is None:
                return None
            return "inf" if math.isinf(x) else x

        return {
            "epsilon": number(self.epsilon),
            "contributions": [number(c) for c in self.contributions],
            "failure_prone": list(self.failure_prone),
            "alpha": list(self.alpha) if self.alpha is not None else None,
            "droop_bound": number(self.droop_bound),
            "drift_epsilon": number(self.drift_epsilon),
            "ia_mean": number(self.ia_mean),
            "ia_std": number(self.ia_std),
            "ia_per_observation": list(self.ia_per_observation),
        }


def privacy_report(
    source: Union[FailureProfile, MechanismConfig],
    alpha: Optional[Union[float, Sequence[float]]] = None,
    observations: Optional[Sequence[int]] = None,
    prior: Optional[AdversaryPrior] = None,
    include_intact: bool = False,
) -> PrivacyReport:
    """
    Assemble a PrivacyReport for a profile or mechanism config.

    With alpha, the droop bound and the recomputed epsilon are included. With
    observations, IA statistics are included under the given prior (K1 over
    the full domain by default).
    """
    f = source.profile() if isinstance(source, MechanismConfig) else source
    contributions = epsilon_contributions(f, include_intact=include_intact)
    report = PrivacyReport(
        epsilon=float(sum(contributions)),
        contributions=contributions,
        failure_prone=f.failure_prone,
    )
    if alpha is not None:
        alphas = (
            tuple([float(alpha)] * f.z) if np.isscalar(alpha) else tuple(float(a) for a in alpha)
        )
        report.alpha = alphas
        report.droop_bound = droop_bound(alphas, f)
        report.drift_epsilon = drift_epsilon(f, alphas)
    if observations is not None:
        if prior is None:
            prior = build_prior("K1", CandidateSet.full(f.width))
        values = ia_values(observations, prior, f)
        report.ia_mean = float(values.mean())
        report.ia_std = float(values.std())
        report.ia_per_observation = [float(v) for v in values]
    logger.info("privacy report: epsilon=%.4f over %d positions", report.epsilon, f.z)
    return report
