"""Reference computations written from the model definitions, sharing no package code."""
import math

import mpmath
import numpy as np
from scipy import integrate


def set_partitions(n):
    """All set partitions of range(n) as canonical membership tuples."""
    out = [[0]]
    for _ in range(1, n):
        out = [p + [lab] for p in out for lab in range(max(p) + 2)]
    return [tuple(p) for p in out]


def brute_boundary(membership, edges):
    membership = np.asarray(membership)
    total = 0
    for lab in np.unique(membership):
        inside = membership == lab
        nbrs = {b for a, b in edges if inside[a] and not inside[b]}
        nbrs |= {a for a, b in edges if inside[b] and not inside[a]}
        total += len(nbrs)
    return total


def log_data_mass(Y, membership, w0p=0.2):
    """Intercept-only marginal likelihood with w0 integrated numerically over (0, w0').

    Keeps the w0'^(m(b-1)/2) factor of the closed form and its support rule:
    partitions with m(n-b) - 2 <= 0 and b > 1 get -inf.
    """
    Y = np.asarray(Y, float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, m = Y.shape
    membership = np.asarray(membership)
    labs = np.unique(membership)
    b = len(labs)
    W = B = 0.0
    for s in labs:
        blk = Y[membership == s]
        W += ((blk - blk.mean(axis=0)) ** 2).sum()
        B += len(blk) * ((blk.mean(axis=0) - Y.mean(axis=0)) ** 2).sum()
    if b > 1 and m * (n - b) - 2 <= 0:
        return -math.inf
    A, C = m * (b - 1) / 2, m * (n - 1) / 2
    like, _ = integrate.quad(lambda w: w ** A * (W + w * B) ** (-C), 0, w0p, epsabs=0,
                             epsrel=1e-12, limit=200)
    return A * math.log(w0p) + math.log(like)


def log_path_prior(b, n, p0=0.2):
    val, _ = integrate.quad(lambda p: p ** (b - 1) * (1 - p) ** (n - b), 0, p0, epsabs=0,
                            epsrel=1e-12)
    return math.log(val)


def exact_path_posterior(Y, w0p=0.2, p0=0.2):
    """Probabilities of all contiguous partitions indexed by break bitmask (bit i-1: block starts at i)."""
    Y = np.asarray(Y, float)
    n = Y.shape[0]
    logs = np.empty(1 << (n - 1))
    for code in range(len(logs)):
        starts = [(code >> (i - 1)) & 1 for i in range(1, n)]
        memb = np.concatenate([[0], np.cumsum(starts)])
        logs[code] = log_data_mass(Y, memb, w0p) + log_path_prior(memb[-1] + 1, n, p0)
    return np.exp(logs - np.logaddexp.reduce(logs))


def exact_graph_posterior(y, edges, alpha, w0p=0.2):
    parts = set_partitions(len(y))
    logs = np.array([brute_boundary(p, edges) * math.log(alpha) + log_data_mass(y, p, w0p)
                     for p in parts])
    return dict(zip(parts, np.exp(logs - np.logaddexp.reduce(logs))))


def w0_mean_quad(B, Wt, b, n, w0p, m=1):
    """E(w0) under w^(m(b-1)/2) (W~ + w B)^(-m(n-1)/2) on (0, w0'), in extended precision."""
    mpmath.mp.dps = 30
    A, C = mpmath.mpf(m * (b - 1)) / 2, mpmath.mpf(m * (n - 1)) / 2
    B, Wt, w0p = mpmath.mpf(B), mpmath.mpf(Wt), mpmath.mpf(w0p)
    # the density can be sharply peaked near 0 when B >> W~
    pts = [0, min(w0p, Wt / B), w0p] if Wt / B < w0p else [0, w0p]
    # quad stops on an absolute tolerance, so scale the density to peak at 1
    top = min(A * Wt / (B * (C - A)), w0p)
    logf = lambda w: A * mpmath.log(w) - C * mpmath.log(Wt + w * B)
    f = lambda w: mpmath.exp(logf(w) - logf(top)) if w > 0 else mpmath.mpf(0)
    return float(mpmath.quad(lambda w: w * f(w), pts) / mpmath.quad(f, pts))
