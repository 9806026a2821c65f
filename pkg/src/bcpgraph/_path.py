"""Break/no-break Gibbs sampler for contiguous partitions of a sequence.

Responses are an (n, m) matrix sharing one partition; m = 1 is the classical
scalar model.  Each sweep visits positions 1..n-1 and resamples whether a new
block starts there, given every other boundary.
"""
import math

import numpy as np
from numba import njit

from ._core import b_is_zero, clamp_wtilde, log_data_term, log_path_prior, w0_star


@njit(cache=True)
def _seg_ss(c1, c2, lo, hi, m):
    """(within SS, between SS) of rows lo..hi-1 over all dimensions (data centered)."""
    ln = hi - lo
    w = 0.0
    bt = 0.0
    for j in range(m):
        s1 = c1[hi, j] - c1[lo, j]
        s2 = c2[hi, j] - c2[lo, j]
        mu = s1 / ln
        ss = s2 - s1 * mu
        if ss < 0.0:
            ss = 0.0
        w += ss
        bt += ln * mu * mu
    return w, bt


@njit(cache=True)
def _log_post(W, B, b, n, m, tss, w0p, p0):
    wt, _ = clamp_wtilde(W, tss)
    bz = b_is_zero(B, b, tss)
    return log_path_prior(b, n, p0) + log_data_term(wt, B, b, n, m, 0.0, w0p, bz)


@njit(cache=True)
def path_chain(Yc, tss, w0p, p0, sweeps, discard, seed, brk, gl_nodes, gl_weights,
               codes, mean, m2, cp, act, stats):
    """Run ``sweeps`` sweeps; statistics accumulate over sweeps >= ``discard``.

    Yc      (n, m) responses centered per column
    brk     int8[n]; brk[i] = 1 when a block starts at i (brk[0] is ignored); updated in place
    codes   int64 buffer receiving the break bitmask of each retained sweep (len 0 to skip)
    mean/m2 (n, m) running mean and sum of squared deviations of fitted values
    cp      (n,) count of retained sweeps with a block starting at i
    act     (n,) count of retained sweeps where i sits next to a boundary
    stats   float[3]: sum of b, sum of sigma^2 estimates, number of finite sigma^2
    """
    np.random.seed(seed)
    n, m = Yc.shape
    c1 = np.zeros((n + 1, m))
    c2 = np.zeros((n + 1, m))
    for i in range(n):
        for j in range(m):
            c1[i + 1, j] = c1[i, j] + Yc[i, j]
            c2[i + 1, j] = c2[i, j] + Yc[i, j] * Yc[i, j]
    brk[0] = 1
    b = 0
    W = 0.0
    B = 0.0
    lo = 0
    for i in range(1, n + 1):
        if i == n or brk[i] == 1:
            w_, b_ = _seg_ss(c1, c2, lo, i, m)
            W += w_
            B += b_
            b += 1
            lo = i
    fitted = np.empty((n, m))
    kept = 0
    for t in range(sweeps):
        for i in range(1, n):
            lo = i - 1
            while brk[lo] == 0:
                lo -= 1
            hi = i + 1
            while hi < n and brk[hi] == 0:
                hi += 1
            wj, bj = _seg_ss(c1, c2, lo, hi, m)
            wl, bl = _seg_ss(c1, c2, lo, i, m)
            wr, br = _seg_ss(c1, c2, i, hi, m)
            bb = b - 1 - brk[i]
            W0 = W - (wl + wr if brk[i] == 1 else wj)
            B0 = B - (bl + br if brk[i] == 1 else bj)
            lp_join = _log_post(W0 + wj, B0 + bj, bb + 1, n, m, tss, w0p, p0)
            lp_split = _log_post(W0 + wl + wr, B0 + bl + br, bb + 2, n, m, tss, w0p, p0)
            if lp_split == -np.inf and lp_join == -np.inf:
                continue
            if lp_split >= lp_join:
                p_split = 1.0 / (1.0 + math.exp(lp_join - lp_split))
            else:
                e = math.exp(lp_split - lp_join)
                p_split = e / (1.0 + e)
            if np.random.random() < p_split:
                brk[i] = 1
                W = W0 + wl + wr
                B = B0 + bl + br
                b = bb + 2
            else:
                brk[i] = 0
                W = W0 + wj
                B = B0 + bj
                b = bb + 1
        if t < discard:
            continue
        # conditional means for this sweep; exact sums avoid drift in W, B
        W = 0.0
        B = 0.0
        lo = 0
        for i in range(1, n + 1):
            if i == n or brk[i] == 1:
                w_, b_ = _seg_ss(c1, c2, lo, i, m)
                W += w_
                B += b_
                lo = i
        wt, _ = clamp_wtilde(W, tss)
        bz = b_is_zero(B, b, tss)
        w0s = w0_star(wt, B, b, n, m, w0p, bz, gl_nodes, gl_weights)
        lo = 0
        for i in range(1, n + 1):
            if i == n or brk[i] == 1:
                ln = i - lo
                for j in range(m):
                    mu = (c1[i, j] - c1[lo, j]) / ln
                    for r in range(lo, i):
                        fitted[r, j] = (1.0 - w0s) * mu
                lo = i
        kept += 1
        for i in range(n):
            for j in range(m):
                dlt = fitted[i, j] - mean[i, j]
                mean[i, j] += dlt / kept
                m2[i, j] += dlt * (fitted[i, j] - mean[i, j])
            if brk[i] == 1:
                cp[i] += 1
            if (i > 0 and brk[i] == 1) or (i + 1 < n and brk[i + 1] == 1):
                act[i] += 1
        stats[0] += b
        dof = m * (n - 1) - 2
        if dof > 0:
            bq = 0.0 if bz else B
            stats[1] += (wt + w0s * bq) / dof
            stats[2] += 1
        if codes.shape[0] > 0:
            code = 0
            for i in range(1, n):
                if brk[i] == 1:
                    code |= 1 << (i - 1)
            codes[kept - 1] = code
    return kept
