# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hit-and-run chain kernel.

Mirrors preflearn._core._pyref.run_chain step for step; see that module for
the semantics contract. Random numbers are consumed from pre-drawn arrays in
the same order, so the two backends agree given the same streams (up to
floating-point summation order).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, isfinite, log, log1p, sqrt
from scipy.special.cython_special cimport log_ndtr, ndtr, ndtri

cnp.import_array()

cdef double _TINY_CDF = 1e-290


cdef inline double _log_mass(double s_lo, double s_hi) noexcept:
    cdef double la, lb, d, mass
    if s_hi <= s_lo:
        return -INFINITY
    if s_lo >= 0.0:
        la = log_ndtr(-s_lo)
        lb = log_ndtr(-s_hi) if isfinite(s_hi) else -INFINITY
        d = lb - la
        if d >= 0.0:
            return -INFINITY
        return la + log1p(-exp(d))
    if s_hi <= 0.0:
        la = log_ndtr(s_hi)
        lb = log_ndtr(s_lo) if isfinite(s_lo) else -INFINITY
        d = lb - la
        if d >= 0.0:
            return -INFINITY
        return la + log1p(-exp(d))
    mass = ndtr(s_hi) - ndtr(s_lo)
    if mass <= 0.0:
        return -INFINITY
    return log(mass)


cdef inline double _draw_position(double s_lo, double s_hi, double u) noexcept:
    cdef double q_lo, q_hi, q, p_lo, p_hi, p, lam, z
    if s_lo >= 0.0:
        q_lo = ndtr(-s_lo)
        q_hi = ndtr(-s_hi) if isfinite(s_hi) else 0.0
        if q_lo > _TINY_CDF and q_lo > q_hi:
            q = q_lo + (q_hi - q_lo) * u
            return -ndtri(q)
        lam = s_lo if s_lo > 1.0 else 1.0
        z = 1.0 - exp(-lam * (s_hi - s_lo)) if isfinite(s_hi) else 1.0
        return s_lo - log1p(-u * z) / lam
    if s_hi <= 0.0:
        p_lo = ndtr(s_lo) if isfinite(s_lo) else 0.0
        p_hi = ndtr(s_hi)
        if p_hi > _TINY_CDF and p_hi > p_lo:
            p = p_lo + (p_hi - p_lo) * u
            if p < 1e-300:
                p = 1e-300
            return ndtri(p)
        lam = -s_hi if -s_hi > 1.0 else 1.0
        z = 1.0 - exp(-lam * (s_hi - s_lo)) if isfinite(s_lo) else 1.0
        return s_hi + log1p(-u * z) / lam
    p_lo = ndtr(s_lo) if isfinite(s_lo) else 0.0
    p_hi = ndtr(s_hi) if isfinite(s_hi) else 1.0
    p = p_lo + (p_hi - p_lo) * u
    if p < 1e-300:
        p = 1e-300
    if p > 1.0 - 1e-16:
        p = 1.0 - 1e-16
    return ndtri(p)


cdef inline void _insertion_sort(double* arr, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = arr[i]
        j = i - 1
        while j >= 0 and arr[j] > key:
            arr[j + 1] = arr[j]
            j -= 1
        arr[j + 1] = key


def run_chain(
    const double[::1] start,
    const double[::1] mean,
    const double[:, ::1] precision,
    const double[:, ::1] feats,
    const long long[::1] offsets,
    const double[::1] logfac,
    const double[:, ::1] normals,
    const double[::1] u_segment,
    const double[::1] u_position,
    Py_ssize_t burn_in,
    Py_ssize_t thinning,
    double[:, ::1] out,
):
    cdef Py_ssize_t d = start.shape[0]
    cdef Py_ssize_t n_records = offsets.shape[0] - 1
    cdef Py_ssize_t n_rows = feats.shape[0]
    cdef Py_ssize_t steps = normals.shape[0]
    cdef Py_ssize_t count = out.shape[0]

    # Work buffers sized to the worst case over the whole run.
    cdef Py_ssize_t max_breaks = 0, r, span
    for r in range(n_records):
        span = offsets[r + 1] - offsets[r]
        max_breaks += span * (span - 1) // 2
    cdef cnp.ndarray x_arr = np.array(start, dtype=np.float64)
    cdef cnp.ndarray v_arr = np.zeros(d, dtype=np.float64)
    cdef cnp.ndarray w_arr = np.zeros(d, dtype=np.float64)
    cdef cnp.ndarray val_arr = np.zeros(max(n_rows, 1), dtype=np.float64)
    cdef cnp.ndarray slope_arr = np.zeros(max(n_rows, 1), dtype=np.float64)
    cdef cnp.ndarray ts_arr = np.zeros(max_breaks + 2, dtype=np.float64)
    cdef cnp.ndarray bounds_arr = np.zeros(max_breaks + 3, dtype=np.float64)
    cdef cnp.ndarray logtot_arr = np.zeros(max_breaks + 2, dtype=np.float64)
    cdef double[::1] x = x_arr
    cdef double[::1] v = v_arr
    cdef double[::1] w = w_arr
    cdef double[::1] val = val_arr
    cdef double[::1] slope = slope_arr
    cdef double[::1] ts = ts_arr
    cdef double[::1] bounds = bounds_arr
    cdef double[::1] logtot = logtot_arr

    cdef Py_ssize_t step, recorded = 0, i, j, k, nb, n_seg, lo_i, hi_i, chosen, best
    cdef double norm, a, g, tbar, sigma, db, t_cross, t_mid, lo_b, hi_b
    cdef double s_lo, s_hi, top, total, target, acc, s_pos, t_move, bv, best_val

    for step in range(steps):
        norm = 0.0
        for i in range(d):
            bv = normals[step, i]
            norm += bv * bv
        norm = sqrt(norm)
        if norm > 0.0:
            for i in range(d):
                v[i] = normals[step, i] / norm

            # Gaussian conditional along x + t v.
            a = 0.0
            g = 0.0
            for i in range(d):
                bv = 0.0
                for j in range(d):
                    bv += precision[i, j] * v[j]
                w[i] = bv
            for i in range(d):
                a += v[i] * w[i]
                g += (x[i] - mean[i]) * w[i]
            if a > 0.0:
                tbar = -g / a
                sigma = 1.0 / sqrt(a)

                for i in range(n_rows):
                    bv = 0.0
                    best_val = 0.0
                    for j in range(d):
                        bv += feats[i, j] * x[j]
                        best_val += feats[i, j] * v[j]
                    val[i] = bv
                    slope[i] = best_val

                nb = 0
                for r in range(n_records):
                    lo_i = offsets[r]
                    hi_i = offsets[r + 1]
                    for i in range(lo_i, hi_i):
                        for j in range(i + 1, hi_i):
                            db = slope[i] - slope[j]
                            if db != 0.0:
                                t_cross = (val[j] - val[i]) / db
                                if isfinite(t_cross):
                                    ts[nb] = t_cross
                                    nb += 1
                _insertion_sort(&ts[0], nb)

                bounds[0] = -INFINITY
                for k in range(nb):
                    bounds[k + 1] = ts[k]
                bounds[nb + 1] = INFINITY
                n_seg = nb + 1

                for k in range(n_seg):
                    lo_b = bounds[k]
                    hi_b = bounds[k + 1]
                    if not isfinite(lo_b) and not isfinite(hi_b):
                        t_mid = tbar
                    elif not isfinite(lo_b):
                        t_mid = hi_b - 1.0
                    elif not isfinite(hi_b):
                        t_mid = lo_b + 1.0
                    else:
                        t_mid = 0.5 * (lo_b + hi_b)

                    logtot[k] = 0.0
                    for r in range(n_records):
                        lo_i = offsets[r]
                        hi_i = offsets[r + 1]
                        best = lo_i
                        best_val = val[lo_i] + t_mid * slope[lo_i]
                        for i in range(lo_i + 1, hi_i):
                            bv = val[i] + t_mid * slope[i]
                            if bv > best_val:
                                best_val = bv
                                best = i
                        logtot[k] += logfac[best]
                    if isfinite(logtot[k]):
                        s_lo = (lo_b - tbar) / sigma
                        s_hi = (hi_b - tbar) / sigma
                        logtot[k] += _log_mass(s_lo, s_hi)

                top = -INFINITY
                for k in range(n_seg):
                    if logtot[k] > top:
                        top = logtot[k]
                if isfinite(top):
                    total = 0.0
                    for k in range(n_seg):
                        logtot[k] = exp(logtot[k] - top)
                        total += logtot[k]
                    target = u_segment[step] * total
                    acc = 0.0
                    chosen = n_seg - 1
                    for k in range(n_seg):
                        acc += logtot[k]
                        if target <= acc:
                            chosen = k
                            break

                    s_lo = (bounds[chosen] - tbar) / sigma
                    s_hi = (bounds[chosen + 1] - tbar) / sigma
                    s_pos = _draw_position(s_lo, s_hi, u_position[step])
                    t_move = tbar + sigma * s_pos
                    if isfinite(t_move):
                        for i in range(d):
                            x[i] = x[i] + t_move * v[i]

        if step >= burn_in and (step - burn_in + 1) % thinning == 0:
            if recorded < count:
                for i in range(d):
                    out[recorded, i] = x[i]
                recorded += 1
    return None
