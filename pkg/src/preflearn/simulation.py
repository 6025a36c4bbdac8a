"""Simulated-user experiments: trajectories, aggregates, and the Fano floor.

A trajectory draws a ground-truth preference vector from the prior, then
loops: select a question under the configured policy, sample the user's
noisy response, update the belief, re-sample the posterior, and record
entropy and misclassification estimates. Experiments average many
trajectories on derived seeds and emit a CSV plus a JSON summary.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .belief import (
    BeliefState,
    PosteriorSampleSet,
    Question,
    differential_entropy_estimate,
    gaussian_entropy_bits,
    hit_and_run_sample,
    model_consistent_answer,
    predictive_distribution,
    update,
)
from .catalog import Catalog, load_catalog, synthetic_catalog
from .channel import (
    DiscreteNoiseChannel,
    channel_equation,
    channel_from_dict,
    compute_capacity,
)
from .errors import InfeasibleTargetError, InvalidArgumentError
from .selection import (
    Box,
    POLICY_ENTROPY_PURSUIT,
    PolicyConfig,
    construct_question_continuum,
    entropy_pursuit_select,
    knowledge_gradient_select,
    misclassification_estimate,
    project_predictive,
)

QUESTION_SOURCE_CATALOG = "catalog"
QUESTION_SOURCE_CONTINUUM = "continuum"

# Stream tags for seed derivation; paired runs on one master seed share
# theta and catalog streams across policies.
_STREAM_CATALOG = 0
_STREAM_THETA = 1
_STREAM_RESPONSE = 2
_STREAM_DECISION = 3
_STREAM_MCMC = 4
_STREAM_EVAL = 5


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))


def derive_seed(master_seed: int, *key: int) -> int:
    seq = np.random.SeedSequence([int(master_seed), *map(int, key)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    horizon: int
    paths: int
    policy: PolicyConfig
    channel: DiscreteNoiseChannel
    prior_mean: np.ndarray
    prior_covariance: np.ndarray
    master_seed: int = 0
    question_source: str = QUESTION_SOURCE_CATALOG
    catalog_path: str | None = None
    catalog_size: int = 2_000
    eval_questions_per_step: int = 200
    entropy_sample_count: int = 0  # 0: reuse the decision sample set
    record_timing: bool = False  # wall-clock timings break byte-reproducibility

    def __post_init__(self):
        if self.paths < 1 or self.horizon < 1:
            raise InvalidArgumentError("paths and horizon must be >= 1")
        if self.question_source not in (QUESTION_SOURCE_CATALOG, QUESTION_SOURCE_CONTINUUM):
            raise InvalidArgumentError(f"unknown question source {self.question_source!r}")
        if self.channel.m != self.policy.m:
            raise InvalidArgumentError(
                f"channel is {self.channel.m}-way but policy asks {self.policy.m}-way questions"
            )
        mean = np.array(self.prior_mean, dtype=float)
        cov = np.array(self.prior_covariance, dtype=float)
        if mean.shape != (self.d,) or cov.shape != (self.d, self.d):
            raise InvalidArgumentError("prior shapes do not match d")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_covariance", cov)

    @classmethod
    def from_dict(cls, spec: dict) -> "ExperimentConfig":
        d = int(spec["d"])
        prior = spec.get("prior", {})
        mean_spec = prior.get("mean", 0.0)
        mean = np.full(d, float(mean_spec)) if np.isscalar(mean_spec) else np.asarray(mean_spec, float)
        cov_spec = prior.get("covariance", {"scale": 1.0})
        if isinstance(cov_spec, dict):
            cov = float(cov_spec.get("scale", 1.0)) * np.eye(d)
        else:
            cov = np.asarray(cov_spec, dtype=float)
        catalog_spec = spec.get("catalog", {"synthetic": {"count": 2_000}})
        catalog_path = catalog_spec.get("file")
        catalog_size = int(catalog_spec.get("synthetic", {}).get("count", 2_000))
        return cls(
            d=d,
            horizon=int(spec["horizon"]),
            paths=int(spec["paths"]),
            policy=PolicyConfig.from_dict(spec["policy"]),
            channel=channel_from_dict(spec["channel"]),
            prior_mean=mean,
            prior_covariance=cov,
            master_seed=int(spec.get("master_seed", 0)),
            question_source=spec.get("question_source", QUESTION_SOURCE_CATALOG),
            catalog_path=catalog_path,
            catalog_size=catalog_size,
            eval_questions_per_step=int(spec.get("eval_questions_per_step", 200)),
            entropy_sample_count=int(spec.get("entropy_sample_count", 0)),
            record_timing=bool(spec.get("record_timing", False)),
        )

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "horizon": self.horizon,
            "paths": self.paths,
            "policy": {
                name: getattr(self.policy, name)
                for name in self.policy.__dataclass_fields__
            },
            "channel": {"m": self.channel.m, "matrix": self.channel.matrix.tolist()},
            "prior": {
                "mean": self.prior_mean.tolist(),
                "covariance": self.prior_covariance.tolist(),
            },
            "master_seed": self.master_seed,
            "question_source": self.question_source,
            "catalog": (
                {"file": self.catalog_path}
                if self.catalog_path
                else {"synthetic": {"count": self.catalog_size}}
            ),
            "eval_questions_per_step": self.eval_questions_per_step,
            "entropy_sample_count": self.entropy_sample_count,
            "record_timing": self.record_timing,
        }


@dataclass(frozen=True)
class TrajectoryMetrics:
    """Per-step metric arrays of length horizon + 1 (index 0 = baseline)."""

    policy: str
    path: int
    entropy_bits: np.ndarray
    entropy_se: np.ndarray
    misclass: np.ndarray
    misclass_se: np.ndarray
    phi_bits: np.ndarray
    decision_ms: np.ndarray


def simulate_response(
    theta_true: np.ndarray,
    question: Question,
    channel: DiscreteNoiseChannel,
    rng: np.random.Generator,
) -> int:
    """Noisy 1-based signal: the model answer pushed through its channel row."""
    z = model_consistent_answer(theta_true, question)
    row = channel.matrix[z - 1]
    return int(rng.choice(channel.m, p=row)) + 1


def load_experiment_catalog(config: ExperimentConfig) -> Catalog:
    if config.catalog_path:
        return load_catalog(config.catalog_path)
    return synthetic_catalog(
        config.catalog_size,
        config.prior_mean,
        config.prior_covariance,
        seed=derive_seed(config.master_seed, 0, _STREAM_CATALOG),
    )


def _evaluation_misclass(
    samples: PosteriorSampleSet,
    catalog: Catalog,
    n_eval: int,
    batch: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Mean and standard error of misclassification over a fresh question batch."""
    values = np.empty(batch)
    for i in range(batch):
        idx = rng.choice(len(catalog), size=n_eval, replace=False)
        values[i] = misclassification_estimate(samples, catalog.question(idx))
    se = float(np.std(values, ddof=1) / np.sqrt(batch)) if batch > 1 else np.inf
    return float(np.mean(values)), se


def _continuum_question(
    belief: BeliefState,
    samples: PosteriorSampleSet,
    target_u,
    box: Box,
    epsilon: float,
) -> Question:
    """Synthesize a question for the target, projecting it feasible if needed."""
    from .belief import halfspace_depth_estimate

    try:
        return construct_question_continuum(belief, samples, target_u, box)
    except InfeasibleTargetError:
        depth = halfspace_depth_estimate(samples)
        projected = project_predictive(target_u, depth, epsilon, belief.channel.m)
        return construct_question_continuum(belief, samples, projected.distribution, box)


def run_trajectory(config: ExperimentConfig, path: int, catalog: Catalog | None = None) -> TrajectoryMetrics:
    """One simulated elicitation run, fully reproducible from the derived seeds."""
    if catalog is None:
        catalog = load_experiment_catalog(config)
    seed = config.master_seed
    theta_rng = derive_rng(seed, path, _STREAM_THETA)
    response_rng = derive_rng(seed, path, _STREAM_RESPONSE)
    decision_rng = derive_rng(seed, path, _STREAM_DECISION)
    eval_rng = derive_rng(seed, path, _STREAM_EVAL)

    chol = np.linalg.cholesky(config.prior_covariance)
    theta_true = config.prior_mean + chol @ theta_rng.standard_normal(config.d)

    belief = BeliefState(
        prior_mean=config.prior_mean,
        prior_covariance=config.prior_covariance,
        channel=config.channel,
    )
    pol = config.policy
    samples = hit_and_run_sample(
        belief,
        pol.decision_samples,
        burn_in=pol.burn_in,
        thinning=pol.thinning,
        seed=derive_seed(seed, path, _STREAM_MCMC, 0),
    )

    steps = config.horizon + 1
    entropy = np.zeros(steps)
    entropy_se = np.zeros(steps)
    misclass = np.zeros(steps)
    misclass_se = np.zeros(steps)
    phi = np.zeros(steps)
    decision_ms = np.zeros(steps)

    entropy[0] = gaussian_entropy_bits(config.prior_covariance)
    entropy_se[0] = 0.0
    misclass[0], misclass_se[0] = _evaluation_misclass(
        samples, catalog, pol.evaluation_size, config.eval_questions_per_step, eval_rng
    )

    continuum_target = None
    box = None
    if config.question_source == QUESTION_SOURCE_CONTINUUM:
        continuum_target = compute_capacity(config.channel).optimal_u
        box = Box.unit_cube(catalog.features.mean(axis=0))

    for k in range(1, steps):
        started = time.perf_counter()
        if config.question_source == QUESTION_SOURCE_CONTINUUM:
            question = _continuum_question(
                belief, samples, continuum_target, box, pol.epsilon
            )
            u_hat = predictive_distribution(samples, question)
            score = channel_equation(u_hat, config.channel)
        elif pol.policy == POLICY_ENTROPY_PURSUIT:
            question, u_hat, score = entropy_pursuit_select(
                belief, samples, catalog, pol, decision_rng
            )
        else:
            question, _ = knowledge_gradient_select(
                belief, samples, catalog, pol, decision_rng
            )
            u_hat = predictive_distribution(samples, question)
            score = channel_equation(u_hat, config.channel)
        if config.record_timing:
            decision_ms[k] = (time.perf_counter() - started) * 1e3
        phi[k] = score

        signal = simulate_response(theta_true, question, config.channel, response_rng)
        belief = update(belief, question, signal, u_hat)
        samples = hit_and_run_sample(
            belief,
            pol.decision_samples,
            burn_in=pol.burn_in,
            thinning=pol.thinning,
            seed=derive_seed(seed, path, _STREAM_MCMC, k),
            initial=samples.samples,
        )
        if config.entropy_sample_count > pol.decision_samples:
            entropy_samples = hit_and_run_sample(
                belief,
                config.entropy_sample_count,
                burn_in=pol.burn_in,
                thinning=pol.thinning,
                seed=derive_seed(seed, path, _STREAM_MCMC, k, 1),
                initial=samples.samples,
            )
        else:
            entropy_samples = samples
        estimate = differential_entropy_estimate(belief, entropy_samples)
        entropy[k] = estimate.bits
        entropy_se[k] = estimate.stderr
        misclass[k], misclass_se[k] = _evaluation_misclass(
            samples, catalog, pol.evaluation_size, config.eval_questions_per_step, eval_rng
        )

    return TrajectoryMetrics(
        policy=pol.policy,
        path=path,
        entropy_bits=entropy,
        entropy_se=entropy_se,
        misclass=misclass,
        misclass_se=misclass_se,
        phi_bits=phi,
        decision_ms=decision_ms,
    )


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    trajectories: tuple[TrajectoryMetrics, ...]

    def step_summary(self) -> list[dict]:
        """Across-path mean and standard error per step per metric."""
        steps = self.config.horizon + 1
        paths = len(self.trajectories)
        rows = []
        for k in range(steps):
            ent = np.array([t.entropy_bits[k] for t in self.trajectories])
            mis = np.array([t.misclass[k] for t in self.trajectories])
            phi = np.array([t.phi_bits[k] for t in self.trajectories])
            se = lambda arr: float(np.std(arr, ddof=1) / np.sqrt(paths)) if paths > 1 else 0.0
            rows.append(
                {
                    "step": k,
                    "entropy_mean": float(ent.mean()),
                    "entropy_se": se(ent),
                    "misclass_mean": float(mis.mean()),
                    "misclass_se": se(mis),
                    "phi_mean": float(phi.mean()),
                }
            )
        return rows


def _trajectory_job(args):
    config, path = args
    catalog = load_experiment_catalog(config)
    return run_trajectory(config, path, catalog)


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | None = None,
    workers: int = 1,
) -> ExperimentResult:
    """Run all sample paths and optionally write metrics.csv + summary.json.

    Paths run on derived per-path seeds; aggregation is by path index, so
    parallel and serial runs produce identical outputs.
    """
    catalog = load_experiment_catalog(config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajectories = list(
                pool.map(_trajectory_job, [(config, p) for p in range(config.paths)])
            )
    else:
        trajectories = [run_trajectory(config, p, catalog) for p in range(config.paths)]
    result = ExperimentResult(config=config, trajectories=tuple(trajectories))
    if out_dir is not None:
        write_experiment_outputs(result, out_dir)
    return result


def _atomic_write(path: str, data: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write(data)
    os.replace(tmp, path)


def write_experiment_outputs(result: ExperimentResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    header = [
        "policy", "path", "step", "entropy_bits", "entropy_se",
        "misclass", "misclass_se", "phi_bits", "decision_ms",
    ]
    lines.append(",".join(header))
    for t in result.trajectories:
        for k in range(result.config.horizon + 1):
            lines.append(
                ",".join(
                    [
                        t.policy,
                        str(t.path),
                        str(k),
                        f"{t.entropy_bits[k]:.9g}",
                        f"{t.entropy_se[k]:.9g}",
                        f"{t.misclass[k]:.9g}",
                        f"{t.misclass_se[k]:.9g}",
                        f"{t.phi_bits[k]:.9g}",
                        f"{t.decision_ms[k]:.6g}",
                    ]
                )
            )
    _atomic_write(os.path.join(out_dir, "metrics.csv"), "\n".join(lines) + "\n")

    summary = {
        "config": result.config.to_dict(),
        "master_seed": result.config.master_seed,
        "paths": result.config.paths,
        "steps": result.step_summary(),
    }
    _atomic_write(
        os.path.join(out_dir, "summary.json"), json.dumps(summary, indent=2, sort_keys=True)
    )


def fano_lower_bound(
    k: int, capacity_bits: float, answer_entropy_bits: float, n: int
) -> float:
    """Floor on misclassification after k questions, clamped at zero.

    max(0, (H - C*k - 1) / log2 n): no policy routed through a capacity-C
    channel can beat it on n-way evaluation questions with prior answer
    entropy H.
    """
    if n < 2:
        raise InvalidArgumentError("evaluation size n must be >= 2")
    bound = (answer_entropy_bits - capacity_bits * k - 1.0) / np.log2(n)
    return max(0.0, float(bound))


def answer_entropy_estimate(
    prior_samples: np.ndarray,
    catalog: Catalog,
    n_eval: int,
    question_count: int,
    rng: np.random.Generator,
) -> float:
    """MC estimate of the expected answer entropy of a random evaluation question."""
    from .channel import _entropy_bits
    from .belief import answers_for_samples

    total = 0.0
    n = prior_samples.shape[0]
    for _ in range(question_count):
        idx = rng.choice(len(catalog), size=n_eval, replace=False)
        answers = answers_for_samples(prior_samples, catalog.features[idx])
        dist = np.bincount(answers, minlength=n_eval) / n
        total += float(_entropy_bits(dist))
    return total / question_count
