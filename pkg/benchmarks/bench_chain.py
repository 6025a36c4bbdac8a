"""Benchmark the hit-and-run chain kernel: compiled extension vs numpy fallback.

Runs identical pre-drawn random streams through both backends across a grid
of dimensions and history lengths, reports per-step times and the speedup,
and cross-checks that the sampled moments agree.

    python benchmarks/bench_chain.py [--steps 20000]
"""

import argparse
import time

import numpy as np

from preflearn._core import available_backends
from preflearn.belief import BeliefState, hit_and_run_sample, update
from preflearn.channel import PredictiveDistribution, make_symmetric_channel


def build_belief(d: int, history: int, rng: np.random.Generator) -> BeliefState:
    belief = BeliefState(
        prior_mean=np.zeros(d),
        prior_covariance=np.eye(d),
        channel=make_symmetric_channel(2, 0.7),
    )
    from preflearn.belief import Alternative, Question

    for k in range(history):
        w = rng.standard_normal(d)
        question = Question(
            (Alternative(f"a{k}", w), Alternative(f"b{k}", np.zeros(d)))
        )
        belief = update(belief, question, 1, PredictiveDistribution([0.5, 0.5]))
    return belief


def bench(steps: int) -> None:
    backends = available_backends()
    print(f"backends available: {', '.join(backends)}")
    print(f"{'d':>4} {'history':>8} " + " ".join(f"{name+' us/step':>18}" for name in backends)
          + f" {'speedup':>9}")
    rng = np.random.default_rng(0)
    import preflearn.belief as belief_module

    for d in (2, 5, 10):
        for history in (0, 5, 20):
            belief = build_belief(d, history, rng)
            times = {}
            means = {}
            count = steps // 5
            for name, module in backends.items():
                original = belief_module.run_chain
                belief_module.run_chain = module.run_chain
                try:
                    started = time.perf_counter()
                    samples = hit_and_run_sample(
                        belief, count, burn_in=steps - count * 5 + 0, thinning=5, seed=7
                    )
                    elapsed = time.perf_counter() - started
                finally:
                    belief_module.run_chain = original
                times[name] = elapsed / steps * 1e6
                means[name] = samples.samples.mean(axis=0)
            row = f"{d:>4} {history:>8} " + " ".join(
                f"{times[name]:>18.2f}" for name in backends
            )
            if len(times) == 2:
                row += f" {times['python'] / times['compiled']:>8.1f}x"
                drift = float(np.max(np.abs(means["python"] - means["compiled"])))
                if drift > 0.2:
                    row += f"  (moment drift {drift:.3f})"
            print(row)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20_000)
    args = parser.parse_args()
    bench(args.steps)
