"""Discrete noise channels for m-way choice responses.

A channel is an m-by-m row-stochastic matrix: row z is the distribution of
the observed signal when the model-consistent answer is z. This module
computes the per-question entropy reduction phi(u) = h(u^T P) - u^T h(P),
its derivatives, the channel capacity C(P) with a KKT certificate, the
closed-form capacity-achieving input for invertible matrices, dominated-row
detection, and quadratic envelopes on the optimality gap.

All entropies are reported in bits; natural logs are internal only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.special import xlogy

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    InvalidArgumentError,
    SingularEvaluationError,
    SingularMatrixError,
    UnsupportedChannelError,
)

LOG2E = float(np.log2(np.e))

_ROW_SUM_TOL = 1e-12
_INTERIOR_THRESHOLD = 1e-7
_RCOND_THRESHOLD = 1e-10


def _entropy_bits(p: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shannon entropy in bits with the 0*log(0) = 0 convention."""
    return -xlogy(p, p).sum(axis=axis) / np.log(2.0)


@dataclass(frozen=True)
class DiscreteNoiseChannel:
    """Row-stochastic transmission matrix of a discrete noise channel."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgumentError(f"channel matrix must be square, got shape {m.shape}")
        if m.shape[0] < 2:
            raise InvalidArgumentError("channel needs at least 2 alternatives")
        if np.any(m < -_ROW_SUM_TOL) or np.any(m > 1 + _ROW_SUM_TOL):
            raise InvalidArgumentError("channel entries must lie in [0, 1]")
        rows = m.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > _ROW_SUM_TOL):
            raise InvalidArgumentError(f"channel rows must sum to 1, got sums {rows}")
        m = np.clip(m, 0.0, 1.0)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def row_entropies_bits(self) -> np.ndarray:
        """h(P): per-row Shannon entropies in bits."""
        return _entropy_bits(self.matrix, axis=1)

    def is_symmetric(self) -> bool:
        """True when all diagonal entries agree and all off-diagonal entries agree.

        Such channels are invariant under relabeling the alternatives, so
        question scoring may treat candidate subsets as unordered.
        """
        p = self.matrix
        diag = np.diag(p)
        off = p[~np.eye(self.m, dtype=bool)]
        return bool(
            np.all(np.abs(diag - diag[0]) <= _ROW_SUM_TOL)
            and (off.size == 0 or np.all(np.abs(off - off[0]) <= _ROW_SUM_TOL))
        )


@dataclass(frozen=True)
class PredictiveDistribution:
    """Probabilities that each offered alternative is the true answer."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise InvalidArgumentError("predictive distribution must be a vector")
        if np.any(w < -_ROW_SUM_TOL):
            raise InvalidArgumentError("predictive weights must be nonnegative")
        if abs(w.sum() - 1.0) > _ROW_SUM_TOL:
            raise InvalidArgumentError(f"predictive weights must sum to 1, got {w.sum()!r}")
        w = np.clip(w, 0.0, None)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class ChannelAnalysis:
    """Capacity solve result with its optimality certificate.

    kkt_residuals[z] is KL(row z || u*^T P) - C in bits: ~0 on the support
    of u*, and <= 0 (up to tolerance) where u* is zero.
    """

    capacity_bits: float
    optimal_u: PredictiveDistribution
    admissible: bool
    kappa_min: float
    kappa_max: float
    kkt_residuals: np.ndarray
    log2_e: float = LOG2E
    iterations: int = 0


def as_channel(P) -> DiscreteNoiseChannel:
    if isinstance(P, DiscreteNoiseChannel):
        return P
    return DiscreteNoiseChannel(np.asarray(P, dtype=float))


def as_distribution(u) -> PredictiveDistribution:
    if isinstance(u, PredictiveDistribution):
        return u
    return PredictiveDistribution(np.asarray(u, dtype=float))


def make_symmetric_channel(m: int, alpha: float) -> DiscreteNoiseChannel:
    """Channel that reports the true answer with probability alpha and a
    uniform draw otherwise: alpha*I + (1-alpha)/m * ones."""
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise InvalidArgumentError(f"m must be an integer >= 2, got {m!r}")
    if not (0.0 <= alpha <= 1.0):
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha!r}")
    p = np.full((m, m), (1.0 - alpha) / m)
    p[np.diag_indices(m)] += alpha
    return DiscreteNoiseChannel(p)


def channel_equation(u, P) -> float:
    """One-step entropy reduction phi(u; P) = h(u^T P) - u^T h(P), in bits.

    This is the mutual information between the true answer (distributed as u)
    and the signal observed through P.
    """
    u = as_distribution(u)
    P = as_channel(P)
    if u.m != P.m:
        raise DimensionMismatchError(f"u has {u.m} entries but P is {P.m}x{P.m}")
    out = u.weights @ P.matrix
    val = float(_entropy_bits(out) - u.weights @ P.row_entropies_bits())
    # phi is nonnegative; tiny negative values are floating-point noise.
    return max(val, 0.0)


def channel_equation_batch(U: np.ndarray, P) -> np.ndarray:
    """phi for each row of U (n x m), vectorized. Rows must lie in the simplex."""
    P = as_channel(P)
    U = np.asarray(U, dtype=float)
    out = U @ P.matrix
    vals = _entropy_bits(out, axis=1) - U @ P.row_entropies_bits()
    return np.maximum(vals, 0.0)


def _output_distribution(u: PredictiveDistribution, P: DiscreteNoiseChannel) -> np.ndarray:
    out = u.weights @ P.matrix
    if np.any(out <= 0.0):
        raise SingularEvaluationError(
            "u^T P has a zero component; derivative formulas are undefined there"
        )
    return out


def channel_gradient(u, P) -> np.ndarray:
    """Gradient of phi at u: -P log2(P^T u) - h(P) - log2(e) * ones."""
    u = as_distribution(u)
    P = as_channel(P)
    if u.m != P.m:
        raise DimensionMismatchError(f"u has {u.m} entries but P is {P.m}x{P.m}")
    out = _output_distribution(u, P)
    return -P.matrix @ np.log2(out) - P.row_entropies_bits() - LOG2E


def channel_hessian(u, P) -> np.ndarray:
    """Hessian of phi at u: -log2(e) * P diag(u^T P)^-1 P^T (negative semidefinite)."""
    u = as_distribution(u)
    P = as_channel(P)
    if u.m != P.m:
        raise DimensionMismatchError(f"u has {u.m} entries but P is {P.m}x{P.m}")
    out = _output_distribution(u, P)
    return -LOG2E * (P.matrix / out) @ P.matrix.T


def _kl_rows_bits(P: np.ndarray, out: np.ndarray) -> np.ndarray:
    """KL(row z || out) in bits for every row z, with +inf where undefined."""
    kl = np.empty(P.shape[0])
    for z in range(P.shape[0]):
        row = P[z]
        support = row > 0.0
        if np.any(out[support] <= 0.0):
            kl[z] = np.inf
            continue
        kl[z] = float(np.sum(row[support] * np.log2(row[support] / out[support])))
    return kl


def compute_capacity(
    P,
    tol: float = 1e-9,
    max_iterations: int = 100_000,
    interior_threshold: float = _INTERIOR_THRESHOLD,
) -> ChannelAnalysis:
    """Capacity-achieving input distribution with a KKT certificate.

    Multiplicative (monotone-ascent) updates localize the optimum and its
    support; a Newton equalization on that support then drives every
    supported row's divergence to the capacity within tol (bits), while
    unsupported rows are verified not to exceed it. Entries that vanish
    below ``interior_threshold`` are snapped to the zero face and the
    channel is flagged inadmissible.
    """
    P = as_channel(P)
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    M = P.matrix
    m = P.m
    u = np.full(m, 1.0 / m)

    iterations = 0
    coarse_tol = max(tol, 1e-8)
    while iterations < max_iterations:
        iterations += 1
        out = u @ M
        kl = _kl_rows_bits(M, out)
        upper = float(kl.max())
        lower = float(u @ np.where(np.isfinite(kl), kl, 0.0))
        if upper - lower <= coarse_tol:
            break
        shifted = np.where(np.isfinite(kl), kl - upper, -np.inf)
        u = u * np.exp(shifted / LOG2E)
        s = u.sum()
        if not np.isfinite(s) or s <= 0:
            raise ConvergenceError("capacity iteration produced an invalid iterate", best=None)
        u /= s

    # Active-set Newton polish: equalize divergences on the support, then
    # verify the excluded rows. A failed equalization means the support
    # still carries a row whose optimal weight is zero; drop the smallest.
    support = np.flatnonzero(u > interior_threshold)
    for _ in range(4 * m + 4):
        refined = _newton_equalize(M, support, u, tol)
        if refined is None:
            if support.size <= 1:
                break
            weights = u[support]
            support = np.delete(support, int(np.argmin(weights)))
            kept = np.zeros_like(u)
            kept[support] = np.maximum(u[support], 1e-12)
            u = kept / kept.sum()
            continue
        u = refined
        out = u @ M
        kl = _kl_rows_bits(M, out)
        capacity = float(u @ np.where(np.isfinite(kl), kl, 0.0))
        tiny = np.flatnonzero((u > 0.0) & (u <= interior_threshold))
        if tiny.size:
            support = np.setdiff1d(support, tiny)
            continue
        violated = np.flatnonzero((u == 0.0) & (kl > capacity + tol))
        if violated.size:
            support = np.union1d(support, violated[:1])
            continue
        active = u > 0.0
        if float(np.max(np.abs(kl[active] - capacity))) <= tol:
            return _make_analysis(
                P, u, iterations, admissible=bool(support.size == m)
            )
    analysis = _make_analysis(P, u, iterations, admissible=bool(np.min(u) > interior_threshold))
    raise ConvergenceError(
        f"capacity solver could not certify tolerance {tol}", best=analysis
    )


def _newton_equalize(M: np.ndarray, support: np.ndarray, u_init: np.ndarray,
                     tol: float, max_steps: int = 60):
    """Newton solve of equal-divergence KKT equations on a fixed support.

    Unknowns are the supported weights and the common divergence level;
    returns the full-length distribution or None when the iteration leaves
    the support or fails to converge.
    """
    s = support.size
    if s == 0:
        return None
    if s == 1:
        u = np.zeros(M.shape[0])
        u[support[0]] = 1.0
        return u
    rows = M[support]
    u_s = u_init[support].astype(float)
    u_s = np.maximum(u_s, 1e-12)
    u_s /= u_s.sum()
    for _ in range(max_steps):
        out = u_s @ rows
        kl = _kl_rows_bits(rows, out)
        if not np.all(np.isfinite(kl)):
            return None
        level = float(u_s @ kl)
        resid = kl - level
        if float(np.max(np.abs(resid))) <= 0.25 * tol:
            u = np.zeros(M.shape[0])
            u[support] = u_s
            return u
        # d KL_z / d u_w = -(1/ln2) sum_y rows[z,y] rows[w,y] / out_y
        safe_out = np.where(out > 0, out, np.inf)
        jac = -(rows / safe_out) @ rows.T / np.log(2.0)
        system = np.zeros((s + 1, s + 1))
        system[:s, :s] = jac
        system[:s, s] = -1.0
        system[s, :s] = 1.0
        rhs = np.concatenate([-resid, [0.0]])
        try:
            delta = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError:
            return None
        step = delta[:s]
        scale = 1.0
        floor = -0.9 * u_s
        mask = step < floor
        if np.any(mask):
            scale = float(np.min(floor[mask] / step[mask]))
        u_s = u_s + scale * step
        u_s = np.maximum(u_s, 0.0)
        total = u_s.sum()
        if total <= 0:
            return None
        u_s /= total
        if np.any(u_s <= 0.0):
            u_s = np.maximum(u_s, 1e-15)
            u_s /= u_s.sum()
    return None


def _make_analysis(
    P: DiscreteNoiseChannel, u: np.ndarray, iterations: int, admissible: bool
) -> ChannelAnalysis:
    out = u @ P.matrix
    kl = _kl_rows_bits(P.matrix, out)
    capacity = float(u @ np.where(np.isfinite(kl), kl, 0.0))
    residuals = np.where(np.isfinite(kl), kl - capacity, np.inf)
    return ChannelAnalysis(
        capacity_bits=capacity,
        optimal_u=PredictiveDistribution(u),
        admissible=admissible,
        kappa_min=float(P.matrix.min()),
        kappa_max=float(P.matrix.max()),
        kkt_residuals=residuals,
        iterations=iterations,
    )


def shannon_closed_form(P) -> PredictiveDistribution | None:
    """Closed-form capacity-achieving input for an invertible channel.

    Solves exp(-P^{-1} h_nats(P)), normalizes it into the signal-side
    distribution v, then inverts u^T P = v^T. Returns u when it is a valid
    distribution (the channel is then admissible and u is exactly optimal);
    returns None when u has negative entries, in which case the caller
    should fall back to compute_capacity.
    """
    P = as_channel(P)
    M = P.matrix
    svals = np.linalg.svd(M, compute_uv=False)
    rcond = float(svals[-1] / svals[0]) if svals[0] > 0 else 0.0
    if rcond < _RCOND_THRESHOLD:
        raise SingularMatrixError(
            f"channel matrix is numerically singular (rcond {rcond:.2e})"
        )
    h_nats = P.row_entropies_bits() / LOG2E
    exponent = -np.linalg.solve(M, h_nats)
    exponent -= exponent.max()  # normalization-invariant shift
    v = np.exp(exponent)
    v /= v.sum()
    u = np.linalg.solve(M.T, v)
    if np.min(u) < -1e-12:
        return None
    u = np.clip(u, 0.0, None)
    return PredictiveDistribution(u / u.sum())


def dominated_row_report(P, tol: float = 1e-9) -> set[int]:
    """Rows of P that are (within tol, L1) convex combinations of the others.

    Any reported row index z (0-based) forces u*^(z) = 0 at the capacity
    optimum. Each row is checked with a small least-L1-distance linear
    program over the convex hull of the remaining rows.
    """
    P = as_channel(P)
    M = P.matrix
    m = P.m
    dominated = set()
    for z in range(m):
        others = np.delete(M, z, axis=0)  # (m-1, m)
        k = m - 1
        # Variables: lambda (k), s (m). Minimize sum(s) subject to
        # -s <= M[z] - others^T lambda <= s, sum(lambda) = 1, lambda >= 0.
        c = np.concatenate([np.zeros(k), np.ones(m)])
        a_ub = np.block(
            [
                [others.T, -np.eye(m)],
                [-others.T, -np.eye(m)],
            ]
        )
        b_ub = np.concatenate([M[z], -M[z]])
        a_eq = np.concatenate([np.ones(k), np.zeros(m)])[None, :]
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=b_ub,
            A_eq=a_eq,
            b_eq=[1.0],
            bounds=[(0, None)] * (k + m),
            method="highs",
        )
        if res.status == 0 and res.fun <= tol:
            dominated.add(z)
    return dominated


def symmetric_capacity(m: int, alpha: float) -> float:
    """Capacity of the symmetric channel: log2 m - h(alpha*e1 + (1-alpha)/m)."""
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise InvalidArgumentError(f"m must be an integer >= 2, got {m!r}")
    if not (0.0 <= alpha <= 1.0):
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha!r}")
    mixed = np.full(m, (1.0 - alpha) / m)
    mixed[0] += alpha
    return float(np.log2(m) - _entropy_bits(mixed))


def sensitivity_gap_bounds(P, analysis: ChannelAnalysis, u) -> tuple[float, float]:
    """Quadratic envelopes on the optimality gap C - phi(u).

    Returns (lower, upper) with
        log2(e)/(2*kappa_max) * ||(u-u*)^T P||^2 <= C - phi(u)
        <= log2(e)/(2*kappa_min) * ||(u-u*)^T P||^2.
    Requires an admissible channel with strictly positive entries.
    """
    P = as_channel(P)
    u = as_distribution(u)
    if not analysis.admissible:
        raise UnsupportedChannelError("gap bounds require an admissible channel")
    if analysis.kappa_min <= 0.0:
        raise UnsupportedChannelError("gap bounds require every channel entry positive")
    diff = (u.weights - analysis.optimal_u.weights) @ P.matrix
    sq = float(diff @ diff)
    lower = LOG2E / (2.0 * analysis.kappa_max) * sq
    upper = LOG2E / (2.0 * analysis.kappa_min) * sq
    return lower, upper


def channel_to_dict(P: DiscreteNoiseChannel) -> dict:
    return {"m": P.m, "matrix": P.matrix.tolist()}


def channel_from_dict(spec: dict) -> DiscreteNoiseChannel:
    """Parse a channel spec: {"matrix": [[...]]} or {"symmetric": {"m", "alpha"}}."""
    if "symmetric" in spec:
        sym = spec["symmetric"]
        return make_symmetric_channel(int(sym["m"]), float(sym["alpha"]))
    if "matrix" in spec:
        mat = np.asarray(spec["matrix"], dtype=float)
        if "m" in spec and int(spec["m"]) != mat.shape[0]:
            raise InvalidArgumentError("declared m does not match matrix size")
        return DiscreteNoiseChannel(mat)
    raise InvalidArgumentError("channel spec needs 'matrix' or 'symmetric'")
