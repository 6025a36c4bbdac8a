"""Posterior over the linear preference vector and its estimators.

The user's preferences are a vector theta; offered a question (an ordered
set of m alternatives), the model-consistent answer is the first alternative
maximizing theta . x. Responses observed through a noise channel reweight
the Gaussian prior by piecewise-constant channel factors; this module holds
that belief, samples it by hit-and-run, and estimates predictive
distributions, differential entropy, and halfspace depth from the samples.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from ._core import run_chain
from .channel import DiscreteNoiseChannel, PredictiveDistribution
from .errors import (
    DimensionMismatchError,
    InitializationError,
    InvalidArgumentError,
)

_LN2 = float(np.log(2.0))
_LOG_CLAMP = 1e-300

DEFAULT_BURN_IN = 1_000
DEFAULT_THINNING = 5
DECISION_SAMPLE_COUNT = 4_000
REPORTING_SAMPLE_COUNT = 20_000


@dataclass(frozen=True)
class Alternative:
    """One item: an id plus its d-dimensional feature vector."""

    id: str
    features: np.ndarray
    title: str | None = None

    def __post_init__(self):
        f = np.array(self.features, dtype=float)
        if f.ndim != 1:
            raise InvalidArgumentError(f"features must be a vector, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise InvalidArgumentError(f"alternative {self.id!r} has non-finite features")
        f.flags.writeable = False
        object.__setattr__(self, "features", f)

    @property
    def d(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Question:
    """Ordered list of m alternatives; order fixes signal indexing and ties."""

    alternatives: tuple[Alternative, ...]

    def __post_init__(self):
        alts = tuple(self.alternatives)
        if len(alts) < 2:
            raise InvalidArgumentError("a question needs at least 2 alternatives")
        dims = {a.d for a in alts}
        if len(dims) != 1:
            raise InvalidArgumentError(f"alternatives disagree on dimension: {sorted(dims)}")
        ids = [a.id for a in alts]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"duplicate alternative ids in question: {ids}")
        object.__setattr__(self, "alternatives", alts)

    @property
    def m(self) -> int:
        return len(self.alternatives)

    @property
    def d(self) -> int:
        return self.alternatives[0].d

    def feature_matrix(self) -> np.ndarray:
        return np.vstack([a.features for a in self.alternatives])


@dataclass(frozen=True)
class ResponseRecord:
    """A served question with the observed (possibly noise-corrupted) signal."""

    question: Question
    observed_signal: int  # 1-based

    def __post_init__(self):
        y = int(self.observed_signal)
        if not 1 <= y <= self.question.m:
            raise InvalidArgumentError(
                f"signal {y} out of range for a {self.question.m}-way question"
            )
        object.__setattr__(self, "observed_signal", y)


@dataclass(frozen=True)
class BeliefState:
    """Gaussian prior plus the ordered response history.

    The posterior density is known up to a constant: prior(theta) times the
    product over history of P[answer(theta, X), y]. ``log_normalizer_estimate``
    accumulates the natural log of the estimated predictive probability of
    each observed signal, which estimates the log of that constant.
    """

    prior_mean: np.ndarray
    prior_covariance: np.ndarray
    channel: DiscreteNoiseChannel
    history: tuple[ResponseRecord, ...] = ()
    log_normalizer_estimate: float = 0.0

    def __post_init__(self):
        mean = np.array(self.prior_mean, dtype=float)
        cov = np.array(self.prior_covariance, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise InvalidArgumentError(
                f"prior mean/covariance shapes disagree: {mean.shape} vs {cov.shape}"
            )
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise InvalidArgumentError("prior covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidArgumentError("prior covariance must be positive-definite") from exc
        for record in self.history:
            if record.question.m != self.channel.m:
                raise DimensionMismatchError(
                    f"history question has {record.question.m} alternatives "
                    f"but channel is {self.channel.m}-way"
                )
            if record.question.d != mean.shape[0]:
                raise DimensionMismatchError("history question dimension differs from prior")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_covariance", cov)
        object.__setattr__(self, "history", tuple(self.history))

    @property
    def d(self) -> int:
        return self.prior_mean.shape[0]


@dataclass(frozen=True)
class PosteriorSampleSet:
    """Draws from the current posterior, with the chain settings that made them."""

    samples: np.ndarray
    seed: int
    burn_in: int
    thinning: int

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim != 2:
            raise InvalidArgumentError("samples must be a 2-D array")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class EntropyEstimate:
    bits: float
    stderr: float
    count: int

    def __float__(self) -> float:
        return self.bits


def model_consistent_answer(theta, question: Question) -> int:
    """1-based index of the first alternative maximizing theta . x."""
    theta = np.asarray(theta, dtype=float)
    feats = question.feature_matrix()
    if theta.shape[0] != feats.shape[1]:
        raise DimensionMismatchError(
            f"theta has dimension {theta.shape[0]}, question has {feats.shape[1]}"
        )
    return int(np.argmax(feats @ theta)) + 1


def answers_for_samples(thetas: np.ndarray, feature_matrix: np.ndarray) -> np.ndarray:
    """Vectorized model-consistent answers, 0-based, first-max tie-breaking."""
    return np.argmax(thetas @ feature_matrix.T, axis=1)


def update(
    belief: BeliefState,
    question: Question,
    signal: int,
    predictive_estimate: PredictiveDistribution,
) -> BeliefState:
    """Append one observed response and advance the normalizer ledger.

    The ledger grows by ln(u_hat^T P[:, y]); u_hat is the caller's current
    predictive estimate for the question, used only for this bookkeeping.
    """
    y = int(signal)
    if not 1 <= y <= question.m:
        raise InvalidArgumentError(f"signal {y} out of range 1..{question.m}")
    if question.m != belief.channel.m:
        raise DimensionMismatchError("question size does not match channel size")
    if predictive_estimate.m != question.m:
        raise DimensionMismatchError("predictive estimate size does not match question")
    record = ResponseRecord(question=question, observed_signal=y)
    signal_prob = float(predictive_estimate.weights @ belief.channel.matrix[:, y - 1])
    ledger = belief.log_normalizer_estimate + float(np.log(max(signal_prob, _LOG_CLAMP)))
    return replace(
        belief,
        history=belief.history + (record,),
        log_normalizer_estimate=ledger,
    )


def _prior_log_density_terms(belief: BeliefState):
    chol = np.linalg.cholesky(belief.prior_covariance)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    const = -0.5 * (belief.d * np.log(2.0 * np.pi) + log_det)
    return chol, const


def log_prior_density(belief: BeliefState, thetas: np.ndarray) -> np.ndarray:
    """Natural-log Gaussian prior density, vectorized over rows of thetas."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    chol, const = _prior_log_density_terms(belief)
    centered = thetas - belief.prior_mean
    solved = solve_triangular(chol, centered.T, lower=True)
    return const - 0.5 * np.sum(solved * solved, axis=0)


def log_unnormalized_posterior_batch(belief: BeliefState, thetas: np.ndarray) -> np.ndarray:
    """Natural log of prior(theta) * prod_l P[answer_l(theta), y_l], rows of thetas.

    Returns -inf where a channel factor is exactly zero.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    if thetas.shape[1] != belief.d:
        raise DimensionMismatchError(
            f"theta dimension {thetas.shape[1]} does not match belief dimension {belief.d}"
        )
    logs = log_prior_density(belief, thetas)
    with np.errstate(divide="ignore"):
        log_p = np.log(belief.channel.matrix)
    for record in belief.history:
        answers = answers_for_samples(thetas, record.question.feature_matrix())
        logs = logs + log_p[answers, record.observed_signal - 1]
    return logs


def log_unnormalized_posterior(belief: BeliefState, theta) -> float:
    return float(log_unnormalized_posterior_batch(belief, np.asarray(theta))[0])


def _history_arrays(belief: BeliefState):
    """Stack history into the flat (feats, offsets, logfac) kernel inputs."""
    if not belief.history:
        return (
            np.zeros((0, belief.d)),
            np.zeros(1, dtype=np.int64),
            np.zeros(0),
        )
    feats = np.vstack([r.question.feature_matrix() for r in belief.history])
    sizes = [r.question.m for r in belief.history]
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    with np.errstate(divide="ignore"):
        log_p = np.log(belief.channel.matrix)
    logfac = np.concatenate(
        [log_p[:, r.observed_signal - 1] for r in belief.history]
    )
    return np.ascontiguousarray(feats), offsets, np.ascontiguousarray(logfac)


def _find_start(belief: BeliefState, rng: np.random.Generator, initial, max_restarts: int):
    candidates = []
    if initial is not None:
        arr = np.atleast_2d(np.asarray(initial, dtype=float))
        candidates.extend(arr[::-1])  # most recent draws first
    for point in candidates:
        if np.isfinite(log_unnormalized_posterior(belief, point)):
            return np.array(point, dtype=float)
    if np.isfinite(log_unnormalized_posterior(belief, belief.prior_mean)):
        return np.array(belief.prior_mean, dtype=float)
    chol = np.linalg.cholesky(belief.prior_covariance)
    for _ in range(max_restarts):
        point = belief.prior_mean + chol @ rng.standard_normal(belief.d)
        if np.isfinite(log_unnormalized_posterior(belief, point)):
            return point
    raise InitializationError(
        f"no positive-density starting point found in {max_restarts} prior draws"
    )


def hit_and_run_sample(
    belief: BeliefState,
    count: int,
    burn_in: int = DEFAULT_BURN_IN,
    thinning: int = DEFAULT_THINNING,
    seed: int = 0,
    initial=None,
    max_restarts: int = 1_000,
) -> PosteriorSampleSet:
    """Draw posterior samples by hit-and-run.

    Each step picks a uniform direction on the unit sphere and samples the
    exact conditional along that line: a univariate Gaussian from the prior
    times channel weights that are constant between the crossings of the
    history's answer-region boundaries. Deterministic given ``seed``;
    ``initial`` (a point or an array of candidate points, e.g. the previous
    sample set) provides a warm start checked for positive density.
    """
    if count < 0 or burn_in < 0:
        raise InvalidArgumentError("count and burn_in must be nonnegative")
    if thinning < 1:
        raise InvalidArgumentError("thinning must be >= 1")
    rng = np.random.default_rng(seed)
    start = _find_start(belief, rng, initial, max_restarts)
    cov_factor = cho_factor(belief.prior_covariance, lower=True)
    precision = cho_solve(cov_factor, np.eye(belief.d))
    precision = np.ascontiguousarray((precision + precision.T) / 2.0)

    feats, offsets, logfac = _history_arrays(belief)
    steps = burn_in + count * thinning
    normals = rng.standard_normal((steps, belief.d))
    u_segment = rng.random(steps)
    u_position = rng.random(steps)
    out = np.empty((count, belief.d))
    run_chain(
        np.ascontiguousarray(start),
        np.ascontiguousarray(belief.prior_mean),
        precision,
        feats,
        offsets,
        logfac,
        np.ascontiguousarray(normals),
        u_segment,
        u_position,
        burn_in,
        thinning,
        out,
    )
    return PosteriorSampleSet(samples=out, seed=seed, burn_in=burn_in, thinning=thinning)


def predictive_distribution(samples: PosteriorSampleSet, question: Question) -> PredictiveDistribution:
    """Fraction of posterior samples whose model-consistent answer is each index."""
    if samples.count == 0:
        raise InvalidArgumentError("predictive distribution needs a nonempty sample set")
    if samples.d != question.d:
        raise DimensionMismatchError("sample dimension does not match question dimension")
    answers = answers_for_samples(samples.samples, question.feature_matrix())
    counts = np.bincount(answers, minlength=question.m).astype(float)
    return PredictiveDistribution(counts / samples.count)


def gaussian_entropy_bits(covariance: np.ndarray) -> float:
    """Differential entropy of a Gaussian: 0.5 * log2((2 pi e)^d det(cov))."""
    covariance = np.asarray(covariance, dtype=float)
    d = covariance.shape[0]
    _, log_det = np.linalg.slogdet(covariance)
    return float(0.5 * (d * np.log(2.0 * np.pi * np.e) + log_det) / _LN2)


def differential_entropy_estimate(
    belief: BeliefState, samples: PosteriorSampleSet
) -> EntropyEstimate:
    """Monte Carlo posterior differential entropy in bits.

    Averages -(log2 unnormalized density - log2 normalizer) over the sample
    set, using the belief's normalizer ledger; the ledger must be current
    for the belief's history.
    """
    if samples.count == 0:
        raise InvalidArgumentError("entropy estimate needs a nonempty sample set")
    logs = log_unnormalized_posterior_batch(belief, samples.samples)
    per_sample = -(logs - belief.log_normalizer_estimate) / _LN2
    bits = float(np.mean(per_sample))
    stderr = float(np.std(per_sample, ddof=1) / np.sqrt(samples.count)) if samples.count > 1 else np.inf
    return EntropyEstimate(bits=bits, stderr=stderr, count=samples.count)


def depth_direction(
    points: np.ndarray,
    restarts: int = 64,
    seed: int = 0,
    polish_iters: int = 80,
) -> tuple[float, np.ndarray]:
    """Best (smallest) halfspace mass found and the direction achieving it.

    Multi-start search over unit directions minimizing the fraction of
    points with x . v >= 0, followed by a shrinking random-perturbation
    polish. The result upper-bounds the true sample depth.
    """
    points = np.asarray(points, dtype=float)
    n, d = points.shape
    rng = np.random.default_rng(seed)

    def frac(v: np.ndarray) -> float:
        return float(np.count_nonzero(points @ v >= 0.0) / n)

    candidates = rng.standard_normal((restarts, d))
    mean = points.mean(axis=0)
    if np.linalg.norm(mean) > 0:
        candidates = np.vstack([candidates, mean, -mean])
    candidates /= np.linalg.norm(candidates, axis=1, keepdims=True)
    fracs = np.count_nonzero(points @ candidates.T >= 0.0, axis=0) / n
    best_idx = int(np.argmin(fracs))
    best_v = candidates[best_idx]
    best = float(fracs[best_idx])

    step = 0.5
    for _ in range(polish_iters):
        trial = best_v + step * rng.standard_normal(d)
        norm = np.linalg.norm(trial)
        if norm == 0.0:
            continue
        trial /= norm
        value = frac(trial)
        if value < best:
            best, best_v = value, trial
        else:
            step *= 0.93
    return best, best_v


def halfspace_depth_estimate(
    samples: PosteriorSampleSet | np.ndarray,
    restarts: int = 64,
    seed: int = 0,
) -> float:
    """Approximate halfspace depth of the origin under the sample cloud."""
    points = samples.samples if isinstance(samples, PosteriorSampleSet) else np.asarray(samples)
    if points.shape[0] == 0:
        raise InvalidArgumentError("depth estimate needs a nonempty sample set")
    depth, _ = depth_direction(points, restarts=restarts, seed=seed)
    return depth


def belief_to_dict(belief: BeliefState) -> dict:
    """JSON-ready snapshot sufficient to reproduce the belief exactly."""
    return {
        "prior": {
            "mean": belief.prior_mean.tolist(),
            "covariance": belief.prior_covariance.tolist(),
        },
        "channel": {"m": belief.channel.m, "matrix": belief.channel.matrix.tolist()},
        "history": [
            {
                "question": [
                    {"id": a.id, "title": a.title, "features": a.features.tolist()}
                    for a in r.question.alternatives
                ],
                "observed_signal": r.observed_signal,
            }
            for r in belief.history
        ],
        "log_normalizer_estimate": belief.log_normalizer_estimate,
    }


def belief_from_dict(data: dict) -> BeliefState:
    channel = DiscreteNoiseChannel(np.asarray(data["channel"]["matrix"], dtype=float))
    history = tuple(
        ResponseRecord(
            question=Question(
                tuple(
                    Alternative(id=a["id"], features=a["features"], title=a.get("title"))
                    for a in r["question"]
                )
            ),
            observed_signal=int(r["observed_signal"]),
        )
        for r in data["history"]
    )
    return BeliefState(
        prior_mean=np.asarray(data["prior"]["mean"], dtype=float),
        prior_covariance=np.asarray(data["prior"]["covariance"], dtype=float),
        channel=channel,
        history=history,
        log_normalizer_estimate=float(data["log_normalizer_estimate"]),
    )
