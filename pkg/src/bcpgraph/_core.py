"""Compiled scalar kernels shared by the Python API and the samplers.

Everything here is written for numba's nopython mode: plain loops over
float64 arrays, no Python objects.
"""
import math

import numpy as np
from numba import njit

TINY = 1e-300
CF_EPS = 1e-16
CF_MAXIT = 1_000_000

# B below this fraction of the total sum of squares is treated as zero
B_ZERO_REL = 1e-14
# W-tilde floor, relative to the total sum of squares
WT_FLOOR_REL = 2.220446049250313e-16
# relative size of V_Sjj below which a predictor column counts as constant
SINGULAR_REL = 1e-24
JITTER_REL = 1e-6

PRIOR_GRAPH = 0
PRIOR_PATH = 1


@njit(cache=True)
def _betacf(a, b, x):
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAXIT):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < CF_EPS:
            break
    return h


@njit(cache=True)
def log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@njit(cache=True)
def _log_incbeta_parts(x, y, logx, logy, a, b):
    # x + y == 1; logx, logy supplied separately to keep precision near 0/1
    if x <= 0.0:
        return -np.inf
    lb = log_beta(a, b)
    if y <= 0.0:
        return lb
    front = a * logx + b * logy
    if x < (a + 1.0) / (a + b + 2.0):
        return front - math.log(a) + math.log(_betacf(a, b, x))
    lj = front - math.log(b) + math.log(_betacf(b, a, y))
    return lb + math.log1p(-math.exp(lj - lb))


@njit(cache=True)
def log_incbeta(x, a, b):
    """log of the unnormalized integral  int_0^x t^(a-1) (1-t)^(b-1) dt."""
    if x <= 0.0:
        return -np.inf
    if x >= 1.0:
        return log_beta(a, b)
    return _log_incbeta_parts(x, 1.0 - x, math.log(x), math.log1p(-x), a, b)


@njit(cache=True)
def log_incbeta_odds(r, a, b):
    """Same integral with upper limit x = r / (1 + r), given the odds r >= 0."""
    if r <= 0.0:
        return -np.inf
    if r == np.inf:
        return log_beta(a, b)
    l1r = math.log1p(r)
    return _log_incbeta_parts(r / (1.0 + r), 1.0 / (1.0 + r),
                              math.log(r) - l1r, -l1r, a, b)


@njit(cache=True)
def log_tau_prior(tau, n_s, k, d):
    if k == 0 or n_s < 2 * k:
        return 0.0 if tau == 0 else -np.inf
    if tau == 0:
        return math.log(d / (n_s + d))
    return math.log(n_s / (n_s + d))


@njit(cache=True)
def log_path_prior(b, n, p0):
    return log_incbeta(p0, float(b), float(n - b + 1))


@njit(cache=True)
def b_is_zero(B, b, tss):
    return b <= 1 or B <= B_ZERO_REL * tss


@njit(cache=True)
def clamp_wtilde(wt, tss):
    """Return (clamped W-tilde, clamped flag)."""
    if tss <= 0.0:
        # every response identical: W = B = 0 for every partition
        return 1.0, False
    floor = WT_FLOOR_REL * tss
    if wt < floor:
        return floor, True
    return wt, False


@njit(cache=True)
def log_data_term(wt, B, b, n, m, sumlogdet, w0p, bzero):
    """Marginal log likelihood of the responses given (rho, tau, w).

    m is the number of response dimensions sharing the partition; m = 1 is
    the scalar model.
    """
    if bzero:
        return math.log(w0p) - 0.5 * sumlogdet - 0.5 * m * (n - 1) * math.log(wt)
    a = 0.5 * (m * (b - 1) + 2)
    c = 0.5 * (m * (n - b) - 2)
    if c <= 0.0:
        return -np.inf
    return (0.5 * m * (b - 1) * math.log(w0p) - 0.5 * sumlogdet
            - a * math.log(B) - c * math.log(wt)
            + log_incbeta_odds(B * w0p / wt, a, c))


@njit(cache=True)
def log_w0_density(w0, wt, B, b, n, m):
    # unnormalized conditional density of w0 (uniform prior already absorbed)
    return 0.5 * m * (b - 1) * math.log(w0) - 0.5 * m * (n - 1) * math.log(wt + w0 * B)


@njit(cache=True)
def w0_star_quad(wt, B, b, n, m, w0p, nodes, weights):
    # Gauss-Legendre on (0, w0p) in log space; used when the closed form
    # has a nonpositive beta shape parameter
    npt = nodes.shape[0]
    lv = np.empty(npt)
    tmax = -np.inf
    for j in range(npt):
        t = 0.5 * w0p * (nodes[j] + 1.0)
        lv[j] = log_w0_density(t, wt, B, b, n, m)
        if lv[j] > tmax:
            tmax = lv[j]
    num = 0.0
    den = 0.0
    for j in range(npt):
        t = 0.5 * w0p * (nodes[j] + 1.0)
        e = weights[j] * math.exp(lv[j] - tmax)
        num += t * e
        den += e
    return num / den


@njit(cache=True)
def w0_star(wt, B, b, n, m, w0p, bzero, nodes, weights):
    if bzero:
        return 0.5 * w0p
    a = 0.5 * (m * (b - 1) + 2)
    c = 0.5 * (m * (n - b) - 2)
    if c - 1.0 <= 0.0:
        return w0_star_quad(wt, B, b, n, m, w0p, nodes, weights)
    r = B * w0p / wt
    val = (wt / B) * math.exp(log_incbeta_odds(r, a + 1.0, c - 1.0)
                              - log_incbeta_odds(r, a, c))
    if not (val > 0.0 and val < w0p):
        return w0_star_quad(wt, B, b, n, m, w0p, nodes, weights)
    return val


# ---------------------------------------------------------------------------
# block statistics: counts, means and centered cross-products (Welford form)

@njit(cache=True)
def stats_add(n, yb, yss, xb, sxx, sxy, yv, xv, k):
    """Add one observation in place; returns the new (n, yb, yss)."""
    n1 = n + 1
    dy = yv - yb
    yb1 = yb + dy / n1
    yss1 = yss + dy * (yv - yb1)
    f = n / n1
    for j in range(k):
        dxj = xv[j] - xb[j]
        for l in range(k):
            sxx[j, l] += f * dxj * (xv[l] - xb[l])
        sxy[j] += f * dxj * dy
    for j in range(k):
        xb[j] += (xv[j] - xb[j]) / n1
    return n1, yb1, yss1


@njit(cache=True)
def stats_remove(n, yb, yss, xb, sxx, sxy, yv, xv, k):
    """Remove one observation in place; returns the new (n, yb, yss)."""
    n1 = n - 1
    if n1 == 0:
        for j in range(k):
            xb[j] = 0.0
            sxy[j] = 0.0
            for l in range(k):
                sxx[j, l] = 0.0
        return 0, 0.0, 0.0
    dy = yv - yb
    yb1 = (n * yb - yv) / n1
    yss1 = yss - dy * (yv - yb1)
    if yss1 < 0.0:
        yss1 = 0.0
    f = n / n1
    for j in range(k):
        dxj = xv[j] - xb[j]
        for l in range(k):
            sxx[j, l] -= f * dxj * (xv[l] - xb[l])
        sxy[j] -= f * dxj * dy
    for j in range(k):
        xb[j] = (n * xb[j] - xv[j]) / n1
    return n1, yb1, yss1


@njit(cache=True)
def stats_merge(na, yba, yssa, xba, sxxa, sxya, nb, ybb, yssb, xbb, sxxb, sxyb,
                xb_out, sxx_out, sxy_out, k):
    """Pairwise combination of two blocks; array results written to *_out."""
    n = na + nb
    f = na * nb / n
    dy = ybb - yba
    yb = yba + dy * nb / n
    yss = yssa + yssb + f * dy * dy
    for j in range(k):
        dxj = xbb[j] - xba[j]
        xb_out[j] = xba[j] + dxj * nb / n
        sxy_out[j] = sxya[j] + sxyb[j] + f * dxj * dy
        for l in range(k):
            sxx_out[j, l] = sxxa[j, l] + sxxb[j, l] + f * dxj * (xbb[l] - xba[l])
    return n, yb, yss


@njit(cache=True)
def stats_from_rows(rows, nrows, y, x, k, xb, sxx, sxy):
    """Two-pass centered statistics over y[rows[:nrows]]; returns (n, yb, yss)."""
    yb = 0.0
    for j in range(k):
        xb[j] = 0.0
    for r in range(nrows):
        i = rows[r]
        yb += y[i]
        for j in range(k):
            xb[j] += x[i, j]
    yb /= nrows
    for j in range(k):
        xb[j] /= nrows
    yss = 0.0
    for j in range(k):
        sxy[j] = 0.0
        for l in range(k):
            sxx[j, l] = 0.0
    for r in range(nrows):
        i = rows[r]
        dy = y[i] - yb
        yss += dy * dy
        for j in range(k):
            dxj = x[i, j] - xb[j]
            sxy[j] += dxj * dy
            for l in range(k):
                sxx[j, l] += dxj * (x[i, l] - xb[l])
    return nrows, yb, yss


@njit(cache=True)
def is_singular(sxx, n_s, xrange, k):
    for j in range(k):
        s = max(1.0, xrange[j])
        if sxx[j, j] <= SINGULAR_REL * n_s * s * s:
            return True
    return False


@njit(cache=True)
def regression_terms(sxx, sxy, w, k, beta_out):
    """Ridge solve for a full-model block.

    Solves (sxx + P) beta = sxy with P_jj = V_jj w_j / (1 - w_j) and returns
    (credit, logdet, ok): credit = beta' (sxx + P) beta is the regression sum
    of squares removed from W, logdet = log|I + sxx P^-1|.  ok is False when
    the design is singular and the caller must jitter.
    """
    A = np.empty((k, k))
    logp = 0.0
    for j in range(k):
        vj = sxx[j, j]
        if vj <= 0.0:
            return 0.0, 0.0, False
        wj = w[j + 1]
        pj = vj * wj / (1.0 - wj)
        logp += math.log(pj)
        for l in range(k):
            A[j, l] = sxx[j, l]
        A[j, j] += pj
    # Cholesky, lower triangle in place
    logdet_a = 0.0
    for j in range(k):
        s = A[j, j]
        for l in range(j):
            s -= A[j, l] * A[j, l]
        if s <= 0.0:
            return 0.0, 0.0, False
        d = math.sqrt(s)
        A[j, j] = d
        logdet_a += 2.0 * math.log(d)
        for r in range(j + 1, k):
            t = A[r, j]
            for l in range(j):
                t -= A[r, l] * A[j, l]
            A[r, j] = t / d
    z = np.empty(k)
    for j in range(k):
        t = sxy[j]
        for l in range(j):
            t -= A[j, l] * z[l]
        z[j] = t / A[j, j]
    for j in range(k - 1, -1, -1):
        t = z[j]
        for l in range(j + 1, k):
            t -= A[l, j] * beta_out[l]
        beta_out[j] = t / A[j, j]
    credit = 0.0
    for j in range(k):
        credit += sxy[j] * beta_out[j]
    logdet = logdet_a - logp
    if logdet < 0.0:
        logdet = 0.0
    return credit, logdet, True


@njit(cache=True)
def jittered_stats(rows, nrows, y, x, k, xrange, xb, sxx, sxy, colbuf):
    """Stats of a block after adding uniform noise to constant predictor columns.

    Noise is drawn fresh on every call from numba's generator.
    """
    stats_from_rows(rows, nrows, y, x, k, xb, sxx, sxy)
    nj = 0
    for j in range(k):
        s = max(1.0, xrange[j])
        if sxx[j, j] <= SINGULAR_REL * nrows * s * s:
            nj += 1
    if nj == 0:
        return 0
    # copy the rows into a local design and perturb the constant columns
    for r in range(nrows):
        for j in range(k):
            colbuf[r, j] = x[rows[r], j]
    for j in range(k):
        s = max(1.0, xrange[j])
        if sxx[j, j] <= SINGULAR_REL * nrows * s * s:
            eps = JITTER_REL * s
            for r in range(nrows):
                colbuf[r, j] += np.random.uniform(-eps, eps)
    ident = np.arange(nrows)
    stats_from_rows(ident, nrows, _gather(rows, nrows, y), colbuf, k, xb, sxx, sxy)
    return nj


@njit(cache=True)
def _gather(rows, nrows, y):
    out = np.empty(nrows)
    for r in range(nrows):
        out[r] = y[rows[r]]
    return out


@njit(cache=True)
def seed_numba(seed):
    np.random.seed(seed)
