"""Reference implementation of the hit-and-run chain kernel.

Semantics contract for both backends:

Each step draws a direction from a pre-generated normal row, intersects the
line through the current point with every answer-region boundary implied by
the response history, and samples the exact one-dimensional conditional:
a Gaussian factor (from the prior) times a piecewise-constant channel factor
(constant between boundary crossings). Segment masses and the within-segment
draw are computed from normal-CDF differences, switching to complementary /
log-space forms in the tails.

Inputs are flat arrays so the compiled twin needs no Python objects:

    start      (d,)     chain start, must have positive density
    mean       (d,)     prior mean
    precision  (d, d)   prior inverse covariance
    feats      (A, d)   stacked alternative features over all history records
    offsets    (R+1,)   record r owns feature rows offsets[r]:offsets[r+1]
    logfac     (A,)     ln P[slot, observed signal] per feature row (-inf ok)
    normals    (steps, d) pre-drawn N(0,1) direction source
    u_segment  (steps,) uniforms choosing the segment
    u_position (steps,) uniforms placing the point within the segment
    burn_in, thinning   ints; steps == burn_in + count * thinning
    out        (count, d) output buffer, filled in place
"""

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

_TINY_CDF = 1e-290


def _log_mass(s_lo: float, s_hi: float) -> float:
    """log(Phi(s_hi) - Phi(s_lo)), stable in either tail."""
    if s_hi <= s_lo:
        return -np.inf
    if s_lo >= 0.0:
        la = log_ndtr(-s_lo)
        lb = log_ndtr(-s_hi) if np.isfinite(s_hi) else -np.inf
        d = lb - la
        if d >= 0.0:
            return -np.inf
        return float(la + np.log1p(-np.exp(d)))
    if s_hi <= 0.0:
        la = log_ndtr(s_hi)
        lb = log_ndtr(s_lo) if np.isfinite(s_lo) else -np.inf
        d = lb - la
        if d >= 0.0:
            return -np.inf
        return float(la + np.log1p(-np.exp(d)))
    mass = ndtr(s_hi) - ndtr(s_lo)
    if mass <= 0.0:
        return -np.inf
    return float(np.log(mass))


def _draw_position(s_lo: float, s_hi: float, u: float) -> float:
    """Inverse-CDF draw from a standard normal truncated to [s_lo, s_hi]."""
    if s_lo >= 0.0:
        q_lo = ndtr(-s_lo)
        q_hi = ndtr(-s_hi) if np.isfinite(s_hi) else 0.0
        if q_lo > _TINY_CDF and q_lo > q_hi:
            q = q_lo + (q_hi - q_lo) * u
            return float(-ndtri(q))
        # Deep right tail: conditional density ~ exponential with rate s_lo.
        lam = max(s_lo, 1.0)
        z = 1.0 - np.exp(-lam * (s_hi - s_lo)) if np.isfinite(s_hi) else 1.0
        return float(s_lo - np.log1p(-u * z) / lam)
    if s_hi <= 0.0:
        p_lo = ndtr(s_lo) if np.isfinite(s_lo) else 0.0
        p_hi = ndtr(s_hi)
        if p_hi > _TINY_CDF and p_hi > p_lo:
            p = max(p_lo + (p_hi - p_lo) * u, 1e-300)
            return float(ndtri(p))
        lam = max(-s_hi, 1.0)
        z = 1.0 - np.exp(-lam * (s_hi - s_lo)) if np.isfinite(s_lo) else 1.0
        return float(s_hi + np.log1p(-u * z) / lam)
    p_lo = ndtr(s_lo) if np.isfinite(s_lo) else 0.0
    p_hi = ndtr(s_hi) if np.isfinite(s_hi) else 1.0
    p = min(max(p_lo + (p_hi - p_lo) * u, 1e-300), 1.0 - 1e-16)
    return float(ndtri(p))


def run_chain(
    start,
    mean,
    precision,
    feats,
    offsets,
    logfac,
    normals,
    u_segment,
    u_position,
    burn_in,
    thinning,
    out,
):
    x = np.array(start, dtype=float)
    mean = np.asarray(mean, dtype=float)
    precision = np.asarray(precision, dtype=float)
    feats = np.asarray(feats, dtype=float)
    offsets = np.asarray(offsets, dtype=np.int64)
    logfac = np.asarray(logfac, dtype=float)
    n_records = offsets.shape[0] - 1
    steps = normals.shape[0]
    count = out.shape[0]
    recorded = 0

    for step in range(steps):
        direction = normals[step]
        norm = float(np.linalg.norm(direction))
        if norm > 0.0:
            v = direction / norm
            t = _step_along(
                x, v, mean, precision, feats, offsets, logfac, n_records,
                float(u_segment[step]), float(u_position[step]),
            )
            x = x + t * v
        if step >= burn_in and (step - burn_in + 1) % thinning == 0:
            if recorded < count:
                out[recorded] = x
                recorded += 1
    return None


def _step_along(x, v, mean, precision, feats, offsets, logfac, n_records, u_seg, u_pos):
    """Length of the move along unit direction v (0.0 when degenerate)."""
    w = precision @ v
    a = float(v @ w)
    if a <= 0.0:
        return 0.0
    tbar = -float((x - mean) @ w) / a
    sigma = 1.0 / np.sqrt(a)

    line_val = feats @ x  # value of each alternative's utility at t=0
    line_slope = feats @ v

    breakpoints = []
    for r in range(n_records):
        lo, hi = offsets[r], offsets[r + 1]
        for i in range(lo, hi):
            for j in range(i + 1, hi):
                db = line_slope[i] - line_slope[j]
                if db != 0.0:
                    t_cross = (line_val[j] - line_val[i]) / db
                    if np.isfinite(t_cross):
                        breakpoints.append(t_cross)
    ts = np.sort(np.asarray(breakpoints, dtype=float))
    bounds = np.concatenate(([-np.inf], ts, [np.inf]))
    n_seg = bounds.shape[0] - 1

    mids = np.empty(n_seg)
    for k in range(n_seg):
        lo, hi = bounds[k], bounds[k + 1]
        if not np.isfinite(lo) and not np.isfinite(hi):
            mids[k] = tbar
        elif not np.isfinite(lo):
            mids[k] = hi - 1.0
        elif not np.isfinite(hi):
            mids[k] = lo + 1.0
        else:
            mids[k] = 0.5 * (lo + hi)

    log_tot = np.zeros(n_seg)
    if n_records > 0:
        vals = line_val[None, :] + np.outer(mids, line_slope)  # (n_seg, A)
        for r in range(n_records):
            lo, hi = offsets[r], offsets[r + 1]
            winners = np.argmax(vals[:, lo:hi], axis=1)
            log_tot += logfac[lo + winners]
    for k in range(n_seg):
        if np.isfinite(log_tot[k]):
            s_lo = (bounds[k] - tbar) / sigma
            s_hi = (bounds[k + 1] - tbar) / sigma
            log_tot[k] += _log_mass(s_lo, s_hi)

    top = float(np.max(log_tot))
    if not np.isfinite(top):
        return 0.0
    weights = np.exp(log_tot - top)
    total = float(weights.sum())
    target = u_seg * total
    acc = 0.0
    chosen = n_seg - 1
    for k in range(n_seg):
        acc += weights[k]
        if target <= acc:
            chosen = k
            break

    s_lo = (bounds[chosen] - tbar) / sigma
    s_hi = (bounds[chosen + 1] - tbar) / sigma
    s = _draw_position(s_lo, s_hi, u_pos)
    t = tbar + sigma * s
    if not np.isfinite(t):
        return 0.0
    return float(t)
