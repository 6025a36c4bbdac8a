"""Question selection: greedy policies and continuum constructions.

Two policies score candidate questions over a seeded subsample of the
catalog: entropy pursuit maximizes the one-step entropy reduction
phi(u(X); P), and knowledge gradient minimizes the expected
misclassification error on a random evaluation question after one more
response. When alternatives may be fabricated, the fan construction
synthesizes a question whose predictive distribution hits a requested
target exactly (up to sampling noise), by carving the plane into m salient
cones of prescribed mass and walking alternative vectors that realize them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .belief import (
    Alternative,
    BeliefState,
    PosteriorSampleSet,
    Question,
    answers_for_samples,
    depth_direction,
)
from .catalog import Catalog
from .channel import (
    PredictiveDistribution,
    as_distribution,
    channel_equation,
    channel_equation_batch,
)
from .errors import (
    ConstructionError,
    DimensionMismatchError,
    InfeasibleTargetError,
    InvalidArgumentError,
)

TWO_PI = 2.0 * np.pi

POLICY_ENTROPY_PURSUIT = "entropy_pursuit"
POLICY_KNOWLEDGE_GRADIENT = "knowledge_gradient"
_POLICIES = (POLICY_ENTROPY_PURSUIT, POLICY_KNOWLEDGE_GRADIENT)

_CANDIDATE_CHUNK = 256


@dataclass(frozen=True)
class PolicyConfig:
    """Knobs for one selection policy run."""

    policy: str
    m: int = 2
    subsample_size: int = 15
    evaluation_size: int = 2
    seed: int = 0
    decision_samples: int = 4_000
    burn_in: int = 1_000
    thinning: int = 5
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.policy not in _POLICIES:
            raise InvalidArgumentError(f"unknown policy {self.policy!r}, want one of {_POLICIES}")
        if self.m < 2:
            raise InvalidArgumentError("question size m must be >= 2")
        if self.subsample_size < self.m:
            raise InvalidArgumentError("subsample size N must be >= m")
        if self.evaluation_size < 2:
            raise InvalidArgumentError("evaluation size n must be >= 2")

    @classmethod
    def from_dict(cls, spec: dict) -> "PolicyConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(spec) - known
        if unknown:
            raise InvalidArgumentError(f"unknown policy config keys: {sorted(unknown)}")
        return cls(**spec)


def subsample_indices(catalog: Catalog, config: PolicyConfig, rng: np.random.Generator) -> np.ndarray:
    """Seeded uniform subsample of N catalog rows, without replacement, sorted."""
    n_catalog = len(catalog)
    if config.subsample_size > n_catalog:
        raise InvalidArgumentError(
            f"subsample size {config.subsample_size} exceeds catalog size {n_catalog}"
        )
    picked = rng.choice(n_catalog, size=config.subsample_size, replace=False)
    return np.sort(picked)


def _candidate_tuples(n: int, m: int, unordered: bool):
    if unordered:
        return list(itertools.combinations(range(n), m))
    return list(itertools.permutations(range(n), m))


def _answers_per_candidate(dots: np.ndarray, candidates: list[tuple[int, ...]]) -> np.ndarray:
    """(n_samples, n_candidates) model-consistent answers, chunked over candidates."""
    n_samples = dots.shape[0]
    answers = np.empty((n_samples, len(candidates)), dtype=np.int64)
    cand = np.asarray(candidates, dtype=np.int64)
    for start in range(0, len(candidates), _CANDIDATE_CHUNK):
        block = cand[start : start + _CANDIDATE_CHUNK]
        answers[:, start : start + block.shape[0]] = np.argmax(dots[:, block], axis=2)
    return answers


def _predictive_counts(answers: np.ndarray, m: int) -> np.ndarray:
    """(n_candidates, m) fraction of samples answering each index."""
    n_samples, n_candidates = answers.shape
    counts = np.empty((n_candidates, m))
    for z in range(m):
        counts[:, z] = np.count_nonzero(answers == z, axis=0)
    return counts / n_samples


def entropy_pursuit_select(
    belief: BeliefState,
    samples: PosteriorSampleSet,
    catalog: Catalog,
    config: PolicyConfig,
    rng: np.random.Generator | None = None,
):
    """Question from the subsample maximizing estimated phi(u(X); P).

    Enumerates all m-subsets of the subsample (ordered m-tuples when the
    channel is not relabel-invariant), ties broken toward the lowest
    lexicographic candidate. Returns (question, estimated predictive
    distribution, score in bits).
    """
    if samples.count == 0:
        raise InvalidArgumentError("selection needs a nonempty sample set")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    sub = subsample_indices(catalog, config, rng)
    dots = samples.samples @ catalog.features[sub].T
    candidates = _candidate_tuples(len(sub), config.m, belief.channel.is_symmetric())
    answers = _answers_per_candidate(dots, candidates)
    u_hat = _predictive_counts(answers, config.m)
    scores = channel_equation_batch(u_hat, belief.channel)
    best = int(np.argmax(scores))
    question = catalog.question(sub[list(candidates[best])])
    winner = PredictiveDistribution(u_hat[best])
    # Recompute through the scalar path so the returned score is exactly
    # phi(u_hat, P) as any caller would evaluate it.
    return question, winner, channel_equation(winner, belief.channel)


def misclassification_estimate(
    samples: PosteriorSampleSet | np.ndarray,
    question: Question,
    weights: np.ndarray | None = None,
) -> float:
    """1 - (weighted fraction of samples agreeing with the majority answer)."""
    points = samples.samples if isinstance(samples, PosteriorSampleSet) else np.asarray(samples)
    if points.shape[0] == 0:
        raise InvalidArgumentError("misclassification estimate needs samples")
    answers = answers_for_samples(points, question.feature_matrix())
    masses = np.bincount(answers, weights=weights, minlength=question.m).astype(float)
    total = masses.sum()
    if total <= 0:
        raise InvalidArgumentError("weights sum to zero")
    return float(1.0 - masses.max() / total)


def knowledge_gradient_scores(
    belief: BeliefState,
    samples: PosteriorSampleSet,
    catalog: Catalog,
    config: PolicyConfig,
    rng: np.random.Generator | None = None,
):
    """Expected next-step misclassification for every candidate question.

    For each candidate question and each hypothetical signal, the posterior
    samples are importance-reweighted by the channel factor (no re-sampling),
    and the misclassification of the weighted-majority predictor is averaged
    uniformly over all n-subsets of the same subsample; the signal
    expectation folds in because the reweighting normalizer is the signal
    probability. Returns (subsample indices, candidate index tuples, scores).
    """
    if samples.count == 0:
        raise InvalidArgumentError("selection needs a nonempty sample set")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    sub = subsample_indices(catalog, config, rng)
    dots = samples.samples @ catalog.features[sub].T
    n_samples = samples.count
    m, n_eval = config.m, config.evaluation_size

    ask_candidates = _candidate_tuples(len(sub), m, belief.channel.is_symmetric())
    eval_candidates = list(itertools.combinations(range(len(sub)), n_eval))
    eval_answers = _answers_per_candidate(dots, eval_candidates)  # (S, nS)
    n_eval_qs = len(eval_candidates)
    eval_onehot = np.zeros((n_samples, n_eval_qs * n_eval))
    for w in range(n_eval):
        eval_onehot[:, w::n_eval] = eval_answers == w

    p_matrix = belief.channel.matrix  # (m, m): rows true answer, cols signal
    scores = np.empty(len(ask_candidates))
    cand = np.asarray(ask_candidates, dtype=np.int64)
    for start in range(0, len(ask_candidates), _CANDIDATE_CHUNK):
        block = cand[start : start + _CANDIDATE_CHUNK]
        n_block = block.shape[0]
        ask_answers = np.argmax(dots[:, block], axis=2)  # (S, n_block)
        ask_onehot = np.zeros((n_block * m, n_samples))
        for z in range(m):
            ask_onehot[z::m, :] = (ask_answers == z).T
        # counts[x, z, s, w] = #samples answering z on X and w on S
        counts = (ask_onehot @ eval_onehot).reshape(n_block, m, n_eval_qs, n_eval)
        # mass[x, y, s, w] = sum_z P[z, y] * counts[x, z, s, w]
        mass = np.einsum("zy,xzsw->xysw", p_matrix, counts)
        best_mass = mass.max(axis=3).sum(axis=1)  # (n_block, n_eval_qs)
        scores[start : start + n_block] = 1.0 - best_mass.mean(axis=1) / n_samples
    return sub, ask_candidates, scores


def knowledge_gradient_select(
    belief: BeliefState,
    samples: PosteriorSampleSet,
    catalog: Catalog,
    config: PolicyConfig,
    rng: np.random.Generator | None = None,
):
    """Question minimizing expected next-step misclassification error.

    Ties break toward the lowest lexicographic candidate. Returns
    (question, expected misclassification of the winner).
    """
    sub, candidates, scores = knowledge_gradient_scores(belief, samples, catalog, config, rng)
    best = int(np.argmin(scores))
    question = catalog.question(sub[list(candidates[best])])
    return question, float(scores[best])


# ---------------------------------------------------------------------------
# Continuum constructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned region with nonempty interior for fabricated alternatives."""

    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        center = np.array(self.center, dtype=float)
        half = np.array(self.half_widths, dtype=float)
        if half.ndim == 0:
            half = np.full_like(center, float(half))
        if center.shape != half.shape:
            raise InvalidArgumentError("box center and half_widths shapes disagree")
        if np.any(half <= 0):
            raise ConstructionError("box has empty interior")
        center.flags.writeable = False
        half.flags.writeable = False
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_widths", half)

    @classmethod
    def unit_cube(cls, center) -> "Box":
        center = np.asarray(center, dtype=float)
        return cls(center=center, half_widths=np.full(center.shape, 0.5))

    def contains_interior(self, point: np.ndarray, margin: float = 1e-9) -> bool:
        return bool(np.all(np.abs(point - self.center) < self.half_widths - margin))


@dataclass(frozen=True)
class FanConstruction:
    """m salient cones splitting the plane, tagged with target components.

    ``angles`` are the sorted cone boundaries on [0, 2pi); arc j spans
    [angles[j], angles[j+1]) (wrapping); ``arc_of_component[z]`` is the arc
    realizing target component z.
    """

    angles: np.ndarray
    arc_of_component: tuple[int, ...]
    target_masses: np.ndarray

    def __post_init__(self):
        ang = np.array(self.angles, dtype=float)
        if ang.ndim != 1 or ang.shape[0] < 3:
            raise InvalidArgumentError("a fan needs at least 3 boundary angles")
        if np.any(np.diff(ang) <= 0):
            raise InvalidArgumentError("fan angles must be strictly increasing")
        gaps = np.diff(np.concatenate([ang, [ang[0] + TWO_PI]]))
        if np.any(gaps >= np.pi):
            raise ConstructionError("fan has a non-salient cone (gap >= pi)")
        if sorted(self.arc_of_component) != list(range(ang.shape[0])):
            raise InvalidArgumentError("arc_of_component must be a permutation")
        ang.flags.writeable = False
        object.__setattr__(self, "angles", ang)
        masses = np.array(self.target_masses, dtype=float)
        masses.flags.writeable = False
        object.__setattr__(self, "target_masses", masses)

    @property
    def m(self) -> int:
        return self.angles.shape[0]


def empirical_arc_mass(points_2d: np.ndarray):
    """Arc-mass oracle of the empirical angular measure of 2-D points.

    Returns mass(lo, hi): the fraction of points whose angle lies in the
    arc swept counterclockwise from lo to hi (hi - lo in [0, 2pi]).
    """
    points_2d = np.asarray(points_2d, dtype=float)
    angles = np.sort(np.mod(np.arctan2(points_2d[:, 1], points_2d[:, 0]), TWO_PI))
    extended = np.concatenate([angles, angles + TWO_PI])
    n = angles.shape[0]

    def mass(lo: float, hi: float) -> float:
        width = hi - lo
        if width <= 0.0:
            return 0.0
        if width >= TWO_PI:
            return 1.0
        lo_n = lo % TWO_PI
        hi_n = lo_n + width
        count = np.searchsorted(extended, hi_n, side="right") - np.searchsorted(
            extended, lo_n, side="right"
        )
        return float(count) / n

    return mass


def uniform_arc_mass(lo: float, hi: float) -> float:
    """Arc mass of the rotation-invariant angular measure."""
    return max(0.0, min(hi - lo, TWO_PI)) / TWO_PI


def circular_depth(points_2d: np.ndarray) -> float:
    """Exact minimum half-circle mass of the empirical angular measure.

    The closed-arc count changes only when an endpoint crosses a sample
    angle, so the minimum is attained by arcs anchored just at or just past
    a sample; both variants are evaluated for every sample.
    """
    points_2d = np.asarray(points_2d, dtype=float)
    angles = np.sort(np.mod(np.arctan2(points_2d[:, 1], points_2d[:, 0]), TWO_PI))
    n = angles.shape[0]
    extended = np.concatenate([angles, angles + TWO_PI])
    idx = np.arange(n)
    ends = angles + np.pi
    closed_from_sample = np.searchsorted(extended, ends, side="right") - idx
    open_past_sample = np.searchsorted(extended, ends, side="right") - idx - 1
    half_open = np.searchsorted(extended, ends, side="left") - idx
    best = min(closed_from_sample.min(), open_past_sample.min(), half_open.min())
    return max(float(best) / n, 0.0)


def _bisect_arc_end(mass, anchor: float, target: float, max_width: float = np.pi,
                    iters: int = 40) -> float:
    """Endpoint x in (anchor, anchor+max_width] with mass(anchor, x) ~= target.

    The arc mass is nondecreasing in the endpoint, so plain bisection
    converges; the caller guarantees the target is reachable within
    max_width.
    """
    lo_w, hi_w = 0.0, max_width
    for _ in range(iters):
        mid = 0.5 * (lo_w + hi_w)
        if mass(anchor, anchor + mid) < target:
            lo_w = mid
        else:
            hi_w = mid
    return anchor + 0.5 * (lo_w + hi_w)


def construct_fan_2d(circular_mass, u_star, depth: float) -> FanConstruction:
    """Fan whose cone masses realize the target distribution.

    ``circular_mass`` is an arc-mass oracle; ``depth`` is the halfspace
    depth of the underlying measure. Requires m > 2, a strictly positive
    target, and max(u) < 1 - depth. When every component is below the
    depth, arcs are placed sequentially from an arbitrary anchor; otherwise
    the maximal arc is placed first (anchored so the half-circle from it
    holds between max(u) and max(u) + min(u) of mass) with the minimal arc
    adjacent to it on one side or the other. Every placed arc is verified;
    anchors whose bisections miss are skipped, and if no anchor admits the
    two primary orders the remaining cyclic component orders are searched.
    """
    u = as_distribution(u_star).weights
    m = u.shape[0]
    if m < 3:
        raise InvalidArgumentError("fan construction needs m > 2; use the pairwise path")
    if np.any(u <= 0.0):
        raise InvalidArgumentError("fan construction needs a strictly positive target")
    if float(u.max()) >= 1.0 - depth:
        raise InfeasibleTargetError(
            f"max target {u.max():.4f} >= 1 - depth {1.0 - depth:.4f}"
        )

    z_max = int(np.argmax(u))
    order_by_value = np.argsort(u, kind="stable")
    z_min = int(order_by_value[0]) if int(order_by_value[0]) != z_max else int(order_by_value[1])
    rest = [z for z in range(m) if z not in (z_max, z_min)]

    if float(u.max()) < depth:
        # Every component is smaller than any half-circle mass: any anchor
        # works up to oracle noise.
        order = list(range(m))
        for anchor in np.linspace(0.0, TWO_PI, 16, endpoint=False):
            angles = _attempt_sequential_fan(circular_mass, float(anchor), order, u)
            if angles is not None:
                return _normalize_fan(angles, order, u)
        raise ConstructionError("sequential arc placement failed below the depth")

    order_a = [z_max, z_min] + rest  # minimal arc right after the maximal
    order_b = [z_max] + rest + [z_min]  # minimal arc closing the circle
    for eta1 in _half_mass_anchors(circular_mass, lower=float(u.max()),
                                   upper=float(u.max() + u.min())):
        for order in (order_a, order_b):
            angles = _attempt_sequential_fan(circular_mass, eta1, order, u)
            if angles is not None:
                return _normalize_fan(angles, order, u)
    # Clustered measures can defeat the two primary orders for every valid
    # anchor even though a fan exists; search the remaining cyclic orders.
    for order_rest in itertools.permutations([z for z in range(m) if z != z_max]):
        order = [z_max] + list(order_rest)
        for anchor in np.linspace(0.0, TWO_PI, 96, endpoint=False):
            angles = _attempt_sequential_fan(circular_mass, float(anchor), order, u)
            if angles is not None:
                return _normalize_fan(angles, order, u)
    raise ConstructionError("no salient fan found realizing the target masses")


_ARC_MASS_TOL = 2e-3


def _attempt_sequential_fan(circular_mass, anchor: float, order: list[int],
                            u: np.ndarray, tol: float = _ARC_MASS_TOL):
    """Place arcs for ``order`` one after another from ``anchor``.

    Every placed arc (and the implicit closing arc) is verified for mass
    and salience; returns the boundary angles or None when this anchor and
    order cannot realize the target.
    """
    angles = [anchor]
    for z in order[:-1]:
        end = _bisect_arc_end(circular_mass, angles[-1], float(u[z]))
        width = end - angles[-1]
        if width >= np.pi * (1.0 - 1e-9) or width <= 0.0:
            return None
        if abs(circular_mass(angles[-1], end) - float(u[z])) > tol:
            return None
        angles.append(end)
    closing_width = anchor + TWO_PI - angles[-1]
    if closing_width >= np.pi or closing_width <= 0.0:
        return None
    if abs(circular_mass(angles[-1], anchor + TWO_PI) - float(u[order[-1]])) > len(order) * tol:
        return None
    return np.asarray(angles)


def _half_mass_anchors(circular_mass, lower: float, upper: float,
                       grid: int = 1024, picks: int = 48):
    """Anchors whose forward half-circle mass lies strictly in (lower, upper)."""
    etas = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    valid = [
        float(eta)
        for eta in etas
        if lower < circular_mass(eta, eta + np.pi) < upper
    ]
    if not valid:
        return []
    stride = max(1, len(valid) // picks)
    return valid[::stride]



def _normalize_fan(angles: np.ndarray, component_order: list[int], u: np.ndarray) -> FanConstruction:
    """Reduce angles mod 2pi, sort, and track which arc serves which component."""
    m = angles.shape[0]
    reduced = np.mod(angles, TWO_PI)
    order = np.argsort(reduced, kind="stable")
    sorted_angles = reduced[order]
    if np.any(np.diff(sorted_angles) <= 0):
        raise ConstructionError("fan produced coincident boundary angles")
    # Arc starting at original angle k serves component_order[k]; after
    # sorting, arc j starts at sorted_angles[j] which is original angle
    # order[j].
    arc_of_component = [0] * m
    for j in range(m):
        arc_of_component[component_order[order[j]]] = j
    return FanConstruction(
        angles=sorted_angles,
        arc_of_component=tuple(arc_of_component),
        target_masses=u,
    )


def _closed_loop_scales(directions: np.ndarray) -> np.ndarray:
    """Positive step lengths making the walk close along -directions[0].

    The boundary between the last and first alternatives runs along the sum
    of all steps, so that sum must be a negative multiple of the first fan
    direction; a strictly positive solution exists because every cone gap
    is below pi. Returns the m-1 step lengths (loop closure implied).
    """
    from scipy.optimize import linprog

    m = directions.shape[0]
    # Variables: c_1..c_{m-1}, beta. Constraint: sum c_j v_j + beta v_0 = 0.
    a_eq = np.column_stack([directions[1:].T, directions[0]])
    n_var = m
    res = linprog(
        np.ones(n_var),
        A_eq=a_eq,
        b_eq=np.zeros(2),
        bounds=[(1.0, None)] * n_var,
        method="highs",
    )
    if res.status != 0:
        raise ConstructionError("no positive closed loop for the fan directions")
    return res.x[: m - 1]


def recover_alternatives_2d(
    fan: FanConstruction, interior_point: np.ndarray, box: Box
) -> Question:
    """Walk 2-D alternatives whose answer regions are the fan's cones.

    Boundary angle eta contributes direction (-sin eta, cos eta); starting
    from an interior point, each next alternative steps along the next
    boundary direction. Step lengths are chosen so the walk closes back
    along the first direction, which makes every adjacent answer-region
    boundary (including the wrap-around one) coincide with a fan boundary;
    the whole walk is then shrunk to stay strictly inside the box. The
    question's alternatives are ordered by target component.
    """
    interior_point = np.asarray(interior_point, dtype=float)
    if interior_point.shape != (2,):
        raise InvalidArgumentError("interior point must be 2-D")
    if box.center.shape != (2,):
        raise InvalidArgumentError("box must be 2-D")
    if not box.contains_interior(interior_point):
        raise ConstructionError("interior point is not strictly inside the box")
    m = fan.m
    directions = np.stack([-np.sin(fan.angles), np.cos(fan.angles)], axis=1)
    steps = _closed_loop_scales(directions)
    offsets = np.vstack([np.zeros(2), np.cumsum(steps[:, None] * directions[1:], axis=0)])
    slack = (box.half_widths - np.abs(interior_point - box.center)).min()
    reach = np.abs(offsets).max()
    if slack <= 0.0 or reach <= 0.0:
        raise ConstructionError("degenerate box for alternative recovery")
    scale = 0.5 * slack / reach
    points = interior_point + scale * offsets
    by_component = [points[fan.arc_of_component[z]] for z in range(m)]
    return Question(
        tuple(
            Alternative(id=f"c{z + 1}", features=by_component[z]) for z in range(m)
        )
    )


@dataclass(frozen=True)
class ProjectedPredictive:
    """Feasible surrogate for a target predictive distribution."""

    distribution: PredictiveDistribution
    sigma: float
    clipped: bool


def project_predictive(u_star, depth: float, epsilon: float, m: int) -> ProjectedPredictive:
    """Pull the maximal component down to the geometrically achievable cap.

    sigma = (max u - (1 - depth) + epsilon)+ is removed from the maximal
    component and spread evenly over the rest. epsilon = 0 is allowed only
    for m = 2, where the cap is attainable with equality.
    """
    u = np.array(as_distribution(u_star).weights, dtype=float)
    if m != u.shape[0]:
        raise DimensionMismatchError(f"target has {u.shape[0]} entries, expected {m}")
    if epsilon < 0 or (epsilon == 0 and m > 2):
        raise InvalidArgumentError("epsilon must be positive for m > 2")
    z_max = int(np.argmax(u))
    sigma = max(0.0, float(u[z_max]) - (1.0 - depth) + epsilon)
    if sigma == 0.0:
        return ProjectedPredictive(PredictiveDistribution(u), 0.0, False)
    u[z_max] -= sigma
    u[np.arange(m) != z_max] += sigma / (m - 1)
    clipped = bool(np.any(u < 0.0))
    if clipped:
        u = np.clip(u, 0.0, None)
        u /= u.sum()
    return ProjectedPredictive(PredictiveDistribution(u), sigma, clipped)


def _orthonormal_complement_direction(points: np.ndarray, gamma1: np.ndarray) -> np.ndarray:
    """Top principal direction of the cloud orthogonal to gamma1."""
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / max(points.shape[0] - 1, 1)
    projector = np.eye(gamma1.shape[0]) - np.outer(gamma1, gamma1)
    reduced = projector @ cov @ projector
    eigvals, eigvecs = np.linalg.eigh(reduced)
    gamma2 = eigvecs[:, -1]
    gamma2 = gamma2 - (gamma2 @ gamma1) * gamma1
    norm = np.linalg.norm(gamma2)
    if norm < 1e-12:
        # Degenerate cloud: fall back to any unit vector orthogonal to gamma1.
        basis = np.eye(gamma1.shape[0])
        overlaps = np.abs(basis @ gamma1)
        candidate = basis[int(np.argmin(overlaps))]
        gamma2 = candidate - (candidate @ gamma1) * gamma1
        norm = np.linalg.norm(gamma2)
    return gamma2 / norm


def _pairwise_direction_for_mass(points: np.ndarray, start_direction: np.ndarray,
                                 target: float, iters: int = 60) -> np.ndarray:
    """Unit w with empirical mass(theta . w >= 0) ~= target, via a great circle.

    Rotates from the depth direction (smallest mass) toward its antipode
    (largest); the mass along the path is continuous in the limit, so
    bisection on the rotation angle finds the crossing.
    """
    n = points.shape[0]
    v = start_direction / np.linalg.norm(start_direction)
    v_perp = _orthonormal_complement_direction(points, v)

    def mass_at(phi: float) -> float:
        w = np.cos(phi) * v + np.sin(phi) * v_perp
        return float(np.count_nonzero(points @ w >= 0.0) / n)

    lo, hi = 0.0, np.pi
    f_lo = mass_at(lo) - target
    if f_lo > 0.0:
        # Depth direction already above target; fall back to scanning the
        # full circle for a bracket.
        grid = np.linspace(0.0, TWO_PI, 720, endpoint=False)
        values = np.array([mass_at(phi) for phi in grid]) - target
        idx = int(np.argmin(np.abs(values)))
        lo = grid[idx]
        hi = lo + TWO_PI / 720
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (mass_at(mid) - target) * (mass_at(lo) - target) <= 0.0:
            hi = mid
        else:
            lo = mid
    phi = 0.5 * (lo + hi)
    return np.cos(phi) * v + np.sin(phi) * v_perp


def construct_question_continuum(
    belief: BeliefState,
    samples: PosteriorSampleSet,
    u_star,
    box: Box | None = None,
    depth_restarts: int = 64,
    depth_seed: int = 0,
) -> Question:
    """Fabricate a question whose predictive distribution hits the target.

    Finds the direction of (approximately) minimal halfspace mass, spans a
    plane with it and the cloud's leading orthogonal principal direction,
    solves the 2-D fan problem on the projected samples, and lifts the
    walked alternatives back to d dimensions. Pairwise targets reduce to a
    single separating direction. Raises InfeasibleTargetError when
    max(u) exceeds 1 - estimated depth (strictly required for m > 2).
    """
    u = as_distribution(u_star)
    points = samples.samples
    if points.shape[0] == 0:
        raise InvalidArgumentError("continuum construction needs samples")
    d = points.shape[1]
    if box is None:
        box = Box.unit_cube(np.zeros(d))
    if box.center.shape[0] != d:
        raise DimensionMismatchError("box dimension does not match samples")
    depth, direction = depth_direction(points, restarts=depth_restarts, seed=depth_seed)
    u_max = float(u.weights.max())

    if u.m == 2:
        if u_max > 1.0 - depth + 1e-12:
            raise InfeasibleTargetError(
                f"max target {u_max:.4f} > 1 - depth {1.0 - depth:.4f}"
            )
        w = _pairwise_direction_for_mass(points, direction, float(u.weights[0]))
        x1 = np.array(box.center, dtype=float)
        step = 0.5 * float(box.half_widths.min())
        x2 = x1 - step * w
        while not box.contains_interior(x2):
            step *= 0.5
            if step < 1e-12:
                raise ConstructionError("could not keep fabricated alternatives interior")
            x2 = x1 - step * w
        return Question((Alternative("c1", x1), Alternative("c2", x2)))

    if np.any(u.weights <= 0.0):
        raise InvalidArgumentError("continuum construction needs a strictly positive target")
    if u_max >= 1.0 - depth:
        raise InfeasibleTargetError(
            f"max target {u_max:.4f} >= 1 - depth {1.0 - depth:.4f}"
        )
    gamma1 = direction / np.linalg.norm(direction)
    gamma2 = _orthonormal_complement_direction(points, gamma1)
    gamma = np.stack([gamma1, gamma2], axis=1)  # (d, 2)
    projected = points @ gamma
    mass = empirical_arc_mass(projected)
    plane_depth = min(depth, circular_depth(projected))
    fan = construct_fan_2d(mass, u, plane_depth)
    radius = float(box.half_widths.min())
    box2 = Box(center=np.zeros(2), half_widths=np.full(2, radius))
    question_2d = recover_alternatives_2d(fan, np.zeros(2), box2)
    lifted = tuple(
        Alternative(id=a.id, features=gamma @ a.features + box.center)
        for a in question_2d.alternatives
    )
    return Question(lifted)
