"""Compiled MCMC passes over an array-backed partition.

State layout (``P`` tuple, all arrays owned by :class:`bcpgraph.partition.Partition`):

    member[n]        slot of each node
    cnt, label, tau  per slot; label == -1 marks a free slot
    ybar, yss        per-slot response mean and centered sum of squares
    xbar, sxx, sxy   per-slot predictor means and centered cross-products
    credit, logdet   cached regression terms of full-model (tau = 1) slots
    live, free       slot lists; sizes in ints[NLIVE], ints[NFREE]
    ints             counters, see the constants below
    stamp, near      scratch token arrays of length cap + 1

Data tuple ``D`` = (y, x, xrange, indptr, indices).  ``prm`` = [alpha, w0',
d, p0, ybar_global, total_ss, prior_kind].
"""
import math

import numpy as np
from numba import njit

from ._core import (
    PRIOR_GRAPH,
    b_is_zero,
    clamp_wtilde,
    is_singular,
    jittered_stats,
    log_data_term,
    log_path_prior,
    log_tau_prior,
    regression_terms,
    stats_add,
    stats_from_rows,
    stats_merge,
    stats_remove,
    w0_star,
)

NLIVE, NFREE, NEXT_LABEL, LTOT, JITTER, CLAMP, MOVES, TOKEN, WACC, WPROP, NEARTOK = range(11)
N_INTS = 11

P_ALPHA, P_W0, P_D, P_P0, P_GY, P_TSS, P_PRIOR = range(7)

TGT_STAY = -1
TGT_NEW = -2


# ---------------------------------------------------------------------------
# small helpers

@njit(cache=True)
def _log_rho_prior(prm, b, l, n):
    if int(prm[P_PRIOR]) == PRIOR_GRAPH:
        if l == 0:
            return 0.0
        return l * math.log(prm[P_ALPHA])
    return log_path_prior(b, n, prm[P_P0])


@njit(cache=True)
def _log_post(prm, n, W, B, C, LD, TP, b, l, ints):
    wt, clamped = clamp_wtilde(W - C, prm[P_TSS])
    if clamped:
        ints[CLAMP] += 1
    bz = b_is_zero(B, b, prm[P_TSS])
    return TP + _log_rho_prior(prm, b, l, n) + log_data_term(
        wt, B, b, n, 1, LD, prm[P_W0], bz)


@njit(cache=True)
def _distinct_c(v, rnode, rto, member, indptr, indices, stamp, ints):
    """Distinct foreign blocks among neighbors of v, with node rnode relabeled rto."""
    ints[TOKEN] += 1
    tok = ints[TOKEN]
    own = rto if v == rnode else member[v]
    c = 0
    for p in range(indptr[v], indptr[v + 1]):
        u = indices[p]
        bu = rto if u == rnode else member[u]
        if bu != own and stamp[bu] != tok:
            stamp[bu] = tok
            c += 1
    return c


@njit(cache=True)
def _local_l(i, t, member, indptr, indices, stamp, ints):
    tot = _distinct_c(i, i, t, member, indptr, indices, stamp, ints)
    for p in range(indptr[i], indptr[i + 1]):
        tot += _distinct_c(indices[p], i, t, member, indptr, indices, stamp, ints)
    return tot


@njit(cache=True)
def boundary_length_arr(member, n, indptr, indices, stamp, ints):
    tot = 0
    for v in range(n):
        tot += _distinct_c(v, -1, -1, member, indptr, indices, stamp, ints)
    return tot


@njit(cache=True)
def _collect(member, n, s1, s2, excl, incl, rows):
    nr = 0
    for v in range(n):
        if v == excl:
            continue
        m = member[v]
        if m == s1 or m == s2:
            rows[nr] = v
            nr += 1
    if incl >= 0:
        rows[nr] = incl
        nr += 1
    return nr


@njit(cache=True)
def _reg_block(nb, sxx, sxy, w, k, xrange, member, y, x, s1, s2, excl, incl,
               rows, colbuf, jxb, jsxx, jsxy, beta, ints):
    """(credit, logdet, ok) for a candidate full-model block, jittering if singular."""
    if not is_singular(sxx, nb, xrange, k):
        c, ld, ok = regression_terms(sxx, sxy, w, k, beta)
        if ok:
            return c, ld, True
    n = member.shape[0]
    nr = _collect(member, n, s1, s2, excl, incl, rows)
    jittered_stats(rows, nr, y, x, k, xrange, jxb, jsxx, jsxy, colbuf)
    ints[JITTER] += 1
    return regression_terms(jsxx, jsxy, w, k, beta)


@njit(cache=True)
def _tau_max(nb, k):
    return 1 if (k > 0 and nb >= 2 * k) else 0


@njit(cache=True)
def _globals(P, prm, k, d):
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    gy = prm[P_GY]
    W = 0.0
    B = 0.0
    C = 0.0
    LD = 0.0
    TP = 0.0
    for q in range(ints[NLIVE]):
        s = live[q]
        W += yss[s]
        dm = ybar[s] - gy
        B += cnt[s] * dm * dm
        C += credit[s]
        LD += logdet[s]
        TP += log_tau_prior(tau[s], cnt[s], k, d)
    return W, B, C, LD, TP


@njit(cache=True)
def current_log_post(P, D, prm, k):
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    n = member.shape[0]
    W, B, C, LD, TP = _globals(P, prm, k, prm[P_D])
    return _log_post(prm, n, W, B, C, LD, TP, ints[NLIVE], ints[LTOT], ints)


@njit(cache=True)
def _kill_slot(P, s):
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    label[s] = -1
    cnt[s] = 0
    tau[s] = 0
    credit[s] = 0.0
    logdet[s] = 0.0
    nl = ints[NLIVE]
    for q in range(nl):
        if live[q] == s:
            live[q] = live[nl - 1]
            break
    ints[NLIVE] = nl - 1
    free[ints[NFREE]] = s
    ints[NFREE] += 1


@njit(cache=True)
def _new_slot(P, k):
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    ints[NFREE] -= 1
    s = free[ints[NFREE]]
    label[s] = ints[NEXT_LABEL]
    ints[NEXT_LABEL] += 1
    cnt[s] = 0
    ybar[s] = 0.0
    yss[s] = 0.0
    tau[s] = 0
    credit[s] = 0.0
    logdet[s] = 0.0
    for j in range(k):
        xbar[s, j] = 0.0
        sxy[s, j] = 0.0
        for l in range(k):
            sxx[s, j, l] = 0.0
    live[ints[NLIVE]] = s
    ints[NLIVE] += 1
    return s


@njit(cache=True)
def move_node_arr(P, D, k, i, t):
    """Move node i to slot t (or a fresh slot when t == TGT_NEW); stats only.

    Returns the destination slot.  Taus and cached regression terms of the
    touched slots are left for the caller to set.
    """
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x = D[0], D[1]
    s = member[i]
    if t == s:
        return s
    if t == TGT_NEW:
        t = _new_slot(P, k)
    nn, yb, ys = stats_remove(cnt[s], ybar[s], yss[s], xbar[s], sxx[s], sxy[s], y[i], x[i], k)
    cnt[s] = nn
    ybar[s] = yb
    yss[s] = ys
    if nn == 0:
        _kill_slot(P, s)
    nn, yb, ys = stats_add(cnt[t], ybar[t], yss[t], xbar[t], sxx[t], sxy[t], y[i], x[i], k)
    cnt[t] = nn
    ybar[t] = yb
    yss[t] = ys
    member[i] = t
    ints[MOVES] += 1
    return t


@njit(cache=True)
def merge_slots_arr(P, D, k, s, t):
    """Fold slot t into slot s."""
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    xb = np.empty(k)
    mxx = np.empty((k, k))
    mxy = np.empty(k)
    nn, yb, ys = stats_merge(cnt[s], ybar[s], yss[s], xbar[s], sxx[s], sxy[s],
                             cnt[t], ybar[t], yss[t], xbar[t], sxx[t], sxy[t],
                             xb, mxx, mxy, k)
    cnt[s] = nn
    ybar[s] = yb
    yss[s] = ys
    xbar[s, :] = xb
    sxx[s, :, :] = mxx
    sxy[s, :] = mxy
    for v in range(member.shape[0]):
        if member[v] == t:
            member[v] = s
    _kill_slot(P, t)
    ints[MOVES] += cnt[s]


@njit(cache=True)
def refresh_regression(P, D, w, k):
    """Recompute cached credit/logdet for every live slot under w."""
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x, xrange = D[0], D[1], D[2]
    n = member.shape[0]
    rows = np.empty(n, dtype=np.int64)
    colbuf = np.empty((n, max(k, 1)))
    jxb = np.empty(k)
    jsxx = np.empty((k, k))
    jsxy = np.empty(k)
    beta = np.empty(k)
    ok_all = True
    for q in range(ints[NLIVE]):
        s = live[q]
        if tau[s] == 1:
            c, ld, ok = _reg_block(cnt[s], sxx[s], sxy[s], w, k, xrange, member, y, x,
                                   s, s, -1, -1, rows, colbuf, jxb, jsxx, jsxy, beta, ints)
            if not ok:
                ok_all = False
            credit[s] = c
            logdet[s] = ld
        else:
            credit[s] = 0.0
            logdet[s] = 0.0
    return ok_all


@njit(cache=True)
def recompute_stats(P, D, k):
    """Rebuild every slot's statistics from membership (drift guard)."""
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x, xrange, indptr, indices = D
    n = member.shape[0]
    rows = np.empty(n, dtype=np.int64)
    for q in range(ints[NLIVE]):
        s = live[q]
        nr = _collect(member, n, s, s, -1, -1, rows)
        nn, yb, ys = stats_from_rows(rows, nr, y, x, k, xbar[s], sxx[s], sxy[s])
        cnt[s] = nn
        ybar[s] = yb
        yss[s] = ys
    ints[LTOT] = boundary_length_arr(member, n, indptr, indices, stamp, ints)
    ints[MOVES] = 0


@njit(cache=True)
def _sample_index(lp, nc):
    mx = -np.inf
    for c in range(nc):
        if lp[c] > mx:
            mx = lp[c]
    if mx == -np.inf:
        return -1
    tot = 0.0
    for c in range(nc):
        tot += math.exp(lp[c] - mx)
    u = np.random.random() * tot
    acc = 0.0
    for c in range(nc):
        acc += math.exp(lp[c] - mx)
        if u < acc:
            return c
    # round-off: last finite candidate
    for c in range(nc - 1, -1, -1):
        if lp[c] > -np.inf:
            return c
    return -1


# ---------------------------------------------------------------------------
# pixel passes

@njit(cache=True)
def node_pass(P, D, prm, w, k, order, mode, pseudo, island_new, seed, cand_out):
    """Gibbs sweep over ``order``.

    mode 0: full pass (targets = every live block plus a new block).
    mode 1: active pass; interior nodes are skipped, targets are neighbor
    blocks, except for islands under the original rule (pseudo False),
    whose targets are blocks holding none of the node's neighbors.

    Under the path prior blocks must stay contiguous: a node with two
    neighbors in its own block is skipped and targets are neighbor blocks
    (plus a new block in the full pass). The active pass also skips islands
    there, so that every move it makes can be reversed by the same pass.

    ``cand_out[0]`` receives the largest candidate count seen and
    ``cand_out[1]`` the number of visited nodes; ``cand_out[2]`` counts
    visits where the current state was missing from the candidates.
    """
    if seed >= 0:
        np.random.seed(seed)
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x, xrange, indptr, indices = D
    n = member.shape[0]
    cap = cnt.shape[0]
    d = prm[P_D]
    gy = prm[P_GY]
    maxc = 4 * (cap + 2)
    lp = np.empty(maxc)
    c_tgt = np.empty(maxc, dtype=np.int64)
    c_ts = np.empty(maxc, dtype=np.int64)
    c_tt = np.empty(maxc, dtype=np.int64)
    c_dl = np.empty(maxc, dtype=np.int64)
    c_cs = np.empty(maxc)
    c_ls = np.empty(maxc)
    c_ct = np.empty(maxc)
    c_lt = np.empty(maxc)
    targets = np.empty(cap + 1, dtype=np.int64)
    rows = np.empty(n + 1, dtype=np.int64)
    colbuf = np.empty((n + 1, max(k, 1)))
    jxb = np.empty(k)
    jsxx = np.empty((k, k))
    jsxy = np.empty(k)
    beta = np.empty(k)
    r_xb = np.empty(k)
    r_sxx = np.empty((k, k))
    r_sxy = np.empty(k)
    a_xb = np.empty(k)
    a_sxx = np.empty((k, k))
    a_sxy = np.empty(k)
    one_x = np.empty(k)
    zero_kk = np.zeros((k, k))
    zero_k = np.zeros(k)
    NEWID = cap  # pseudo slot for boundary bookkeeping of a fresh block
    contig = int(prm[P_PRIOR]) != PRIOR_GRAPH

    for oi in range(order.shape[0]):
        i = order[oi]
        s = member[i]
        deg = indptr[i + 1] - indptr[i]
        if contig:
            nsame = 0
            for p in range(indptr[i], indptr[i + 1]):
                if member[indices[p]] == s:
                    nsame += 1
            if nsame > 1:
                continue
        island = False
        if mode == 1:
            nforeign = 0
            for p in range(indptr[i], indptr[i + 1]):
                if member[indices[p]] != s:
                    nforeign += 1
            if nforeign == 0:
                continue
            island = nforeign == deg
            if island and contig:
                # absorbing a one-node segment could not be undone by this pass
                continue
        cand_out[1] += 1

        W, B, C, LD, TP = _globals(P, prm, k, d)
        b = ints[NLIVE]
        l = ints[LTOT]
        ns = cnt[s]
        dms = ybar[s] - gy
        Bs = ns * dms * dms
        W0 = W - yss[s]
        B0 = B - Bs
        C0 = C - credit[s]
        LD0 = LD - logdet[s]
        TP0 = TP - log_tau_prior(tau[s], ns, k, d)
        nc = 0

        # stay, resampling tau of the current block
        for ts in range(_tau_max(ns, k) + 1):
            if ts == tau[s]:
                cs = credit[s]
                ls = logdet[s]
            elif ts == 1:
                cs, ls, ok = _reg_block(ns, sxx[s], sxy[s], w, k, xrange, member, y, x,
                                        s, s, -1, -1, rows, colbuf, jxb, jsxx, jsxy, beta, ints)
                if not ok:
                    continue
            else:
                cs = 0.0
                ls = 0.0
            lp[nc] = _log_post(prm, n, W0 + yss[s], B0 + Bs, C0 + cs, LD0 + ls,
                               TP0 + log_tau_prior(ts, ns, k, d), b, l, ints)
            c_tgt[nc] = TGT_STAY
            c_ts[nc] = ts
            c_tt[nc] = -1
            c_dl[nc] = 0
            c_cs[nc] = cs
            c_ls[nc] = ls
            c_ct[nc] = 0.0
            c_lt[nc] = 0.0
            nc += 1

        # target list
        nt = 0
        if mode == 0 and not contig:
            for q in range(b):
                t = live[q]
                if t != s:
                    targets[nt] = t
                    nt += 1
            if ns > 1:
                targets[nt] = TGT_NEW
                nt += 1
        elif island and not pseudo and not contig:
            ints[TOKEN] += 1
            tok = ints[TOKEN]
            for p in range(indptr[i], indptr[i + 1]):
                stamp[member[indices[p]]] = tok
            for q in range(b):
                t = live[q]
                if t != s and stamp[t] != tok:
                    targets[nt] = t
                    nt += 1
            if island_new and ns > 1:
                targets[nt] = TGT_NEW
                nt += 1
        else:
            ints[TOKEN] += 1
            tok = ints[TOKEN]
            for p in range(indptr[i], indptr[i + 1]):
                t = member[indices[p]]
                if t != s and stamp[t] != tok:
                    stamp[t] = tok
                    targets[nt] = t
                    nt += 1
            if mode == 0 and ns > 1:
                targets[nt] = TGT_NEW
                nt += 1
        if nt == 0:
            continue

        # remainder of the source block
        n_r = ns - 1
        r_yb = 0.0
        r_yss = 0.0
        B_r = 0.0
        r_tmax = -1
        r_c1 = 0.0
        r_l1 = 0.0
        if n_r > 0:
            r_xb[:] = xbar[s]
            r_sxx[:, :] = sxx[s]
            r_sxy[:] = sxy[s]
            _, r_yb, r_yss = stats_remove(ns, ybar[s], yss[s], r_xb, r_sxx, r_sxy, y[i], x[i], k)
            dmr = r_yb - gy
            B_r = n_r * dmr * dmr
            r_tmax = _tau_max(n_r, k)
            if r_tmax == 1:
                r_c1, r_l1, ok = _reg_block(n_r, r_sxx, r_sxy, w, k, xrange, member, y, x,
                                            s, s, i, -1, rows, colbuf, jxb, jsxx, jsxy, beta, ints)
                if not ok:
                    r_tmax = 0

        # boundary bookkeeping
        l_before = _local_l(i, s, member, indptr, indices, stamp, ints)
        dl_new = _local_l(i, NEWID, member, indptr, indices, stamp, ints) - l_before
        ints[NEARTOK] += 1
        ntok = ints[NEARTOK]
        for p in range(indptr[i], indptr[i + 1]):
            u = indices[p]
            near[member[u]] = ntok
            for p2 in range(indptr[u], indptr[u + 1]):
                near[member[indices[p2]]] = ntok

        b_after_src = b - (1 if n_r == 0 else 0)
        for q in range(nt):
            t = targets[q]
            if t == TGT_NEW:
                a_n = 1
                a_yb = y[i]
                a_yss = 0.0
                for j in range(k):
                    a_xb[j] = x[i, j]
                a_sxx[:, :] = 0.0
                a_sxy[:] = 0.0
                W_t = 0.0
                B_t = 0.0
                C_t = 0.0
                LD_t = 0.0
                TP_t = 0.0
                b1 = b_after_src + 1
                dl = dl_new
                t_self = -1
            else:
                a_xb[:] = xbar[t]
                a_sxx[:, :] = sxx[t]
                a_sxy[:] = sxy[t]
                a_n, a_yb, a_yss = stats_add(cnt[t], ybar[t], yss[t], a_xb, a_sxx, a_sxy,
                                             y[i], x[i], k)
                dmt = ybar[t] - gy
                W_t = yss[t]
                B_t = cnt[t] * dmt * dmt
                C_t = credit[t]
                LD_t = logdet[t]
                TP_t = log_tau_prior(tau[t], cnt[t], k, d)
                b1 = b_after_src
                if near[t] == ntok:
                    dl = _local_l(i, t, member, indptr, indices, stamp, ints) - l_before
                else:
                    dl = dl_new
                t_self = t
            dma = a_yb - gy
            B_a = a_n * dma * dma
            Wb = W0 - W_t + r_yss + a_yss
            Bb = B0 - B_t + B_r + B_a
            Cb = C0 - C_t
            LDb = LD0 - LD_t
            TPb = TP0 - TP_t
            a_tmax = _tau_max(a_n, k)
            for tt in range(a_tmax + 1):
                if tt == 1:
                    ct, lt, ok = _reg_block(a_n, a_sxx, a_sxy, w, k, xrange, member, y, x,
                                            t_self, t_self, -1, i, rows, colbuf, jxb, jsxx,
                                            jsxy, beta, ints)
                    if not ok:
                        continue
                else:
                    ct = 0.0
                    lt = 0.0
                tp_t = log_tau_prior(tt, a_n, k, d)
                if n_r == 0:
                    lp[nc] = _log_post(prm, n, Wb, Bb, Cb + ct, LDb + lt, TPb + tp_t,
                                       b1, l + dl, ints)
                    c_tgt[nc] = t
                    c_ts[nc] = -1
                    c_tt[nc] = tt
                    c_dl[nc] = dl
                    c_cs[nc] = 0.0
                    c_ls[nc] = 0.0
                    c_ct[nc] = ct
                    c_lt[nc] = lt
                    nc += 1
                else:
                    for tr in range(r_tmax + 1):
                        cr = r_c1 if tr == 1 else 0.0
                        lr = r_l1 if tr == 1 else 0.0
                        lp[nc] = _log_post(prm, n, Wb, Bb, Cb + ct + cr, LDb + lt + lr,
                                           TPb + tp_t + log_tau_prior(tr, n_r, k, d),
                                           b1, l + dl, ints)
                        c_tgt[nc] = t
                        c_ts[nc] = tr
                        c_tt[nc] = tt
                        c_dl[nc] = dl
                        c_cs[nc] = cr
                        c_ls[nc] = lr
                        c_ct[nc] = ct
                        c_lt[nc] = lt
                        nc += 1

        if nc > cand_out[0]:
            cand_out[0] = nc
        pick = _sample_index(lp, nc)
        if pick < 0:
            # current state has no mass either; keep it
            cand_out[2] += 1
            continue
        tgt = c_tgt[pick]
        if tgt == TGT_STAY:
            tau[s] = c_ts[pick]
            credit[s] = c_cs[pick]
            logdet[s] = c_ls[pick]
            continue
        t = move_node_arr(P, D, k, i, tgt)
        if cnt[s] > 0:
            tau[s] = c_ts[pick]
            credit[s] = c_cs[pick]
            logdet[s] = c_ls[pick]
        tau[t] = c_tt[pick]
        credit[t] = c_ct[pick]
        logdet[t] = c_lt[pick]
        ints[LTOT] += c_dl[pick]
    return 0


@njit(cache=True)
def active_nodes_arr(member, indptr, indices):
    """(active, island) boolean arrays."""
    n = member.shape[0]
    active = np.zeros(n, dtype=np.bool_)
    island = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        nf = 0
        for p in range(indptr[i], indptr[i + 1]):
            if member[indices[p]] != member[i]:
                nf += 1
        deg = indptr[i + 1] - indptr[i]
        active[i] = nf > 0
        island[i] = nf > 0 and nf == deg
    return active, island


# ---------------------------------------------------------------------------
# block merge pass

@njit(cache=True)
def merge_pass(P, D, prm, w, k, seed):
    if seed >= 0:
        np.random.seed(seed)
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x, xrange, indptr, indices = D
    n = member.shape[0]
    cap = cnt.shape[0]
    d = prm[P_D]
    gy = prm[P_GY]
    nl0 = ints[NLIVE]
    snap_slot = live[:nl0].copy()
    snap_lab = np.empty(nl0, dtype=np.int64)
    for q in range(nl0):
        snap_lab[q] = label[snap_slot[q]]
    ordr = np.argsort(snap_lab)
    co = np.zeros(cap, dtype=np.int64)
    setbuf = np.empty(64 + n, dtype=np.int64)
    lp = np.empty(cap + 1)
    c_t = np.empty(cap + 1, dtype=np.int64)
    c_dl = np.empty(cap + 1, dtype=np.int64)
    c_cr = np.empty(cap + 1)
    c_ld = np.empty(cap + 1)
    rows = np.empty(n + 1, dtype=np.int64)
    colbuf = np.empty((n + 1, max(k, 1)))
    jxb = np.empty(k)
    jsxx = np.empty((k, k))
    jsxy = np.empty(k)
    beta = np.empty(k)
    m_xb = np.empty(k)
    m_sxx = np.empty((k, k))
    m_sxy = np.empty(k)
    merges = 0
    contig = int(prm[P_PRIOR]) != PRIOR_GRAPH  # path prior: only touching blocks merge
    for oq in range(nl0):
        s = snap_slot[ordr[oq]]
        if label[s] != snap_lab[ordr[oq]]:
            continue
        b = ints[NLIVE]
        if b <= 1:
            break
        # co-adjacency counts: nodes whose closed neighborhood touches s and t
        for q in range(b):
            co[live[q]] = 0
        for v in range(n):
            ints[TOKEN] += 1
            tok = ints[TOKEN]
            ns_ = 0
            hits = False
            mv = member[v]
            stamp[mv] = tok
            setbuf[ns_] = mv
            ns_ += 1
            if mv == s:
                hits = True
            for p in range(indptr[v], indptr[v + 1]):
                bu = member[indices[p]]
                if stamp[bu] != tok:
                    stamp[bu] = tok
                    setbuf[ns_] = bu
                    ns_ += 1
                    if bu == s:
                        hits = True
            if hits:
                for q in range(ns_):
                    if setbuf[q] != s:
                        co[setbuf[q]] += 1
        W, B, C, LD, TP = _globals(P, prm, k, d)
        l = ints[LTOT]
        nc = 0
        lp[nc] = _log_post(prm, n, W, B, C, LD, TP, b, l, ints)
        c_t[nc] = -1
        c_dl[nc] = 0
        c_cr[nc] = credit[s]
        c_ld[nc] = logdet[s]
        nc += 1
        dms = ybar[s] - gy
        Bs = cnt[s] * dms * dms
        for q in range(b):
            t = live[q]
            if t == s or tau[t] != tau[s] or (contig and co[t] == 0):
                continue
            mn, myb, myss = stats_merge(cnt[s], ybar[s], yss[s], xbar[s], sxx[s], sxy[s],
                                        cnt[t], ybar[t], yss[t], xbar[t], sxx[t], sxy[t],
                                        m_xb, m_sxx, m_sxy, k)
            dmt = ybar[t] - gy
            dmm = myb - gy
            Wm = W - yss[s] - yss[t] + myss
            Bm = B - Bs - cnt[t] * dmt * dmt + mn * dmm * dmm
            if tau[s] == 1:
                cm, lm, ok = _reg_block(mn, m_sxx, m_sxy, w, k, xrange, member, y, x,
                                        s, t, -1, -1, rows, colbuf, jxb, jsxx, jsxy, beta, ints)
                if not ok:
                    continue
            else:
                cm = 0.0
                lm = 0.0
            Cm = C - credit[s] - credit[t] + cm
            LDm = LD - logdet[s] - logdet[t] + lm
            TPm = (TP - log_tau_prior(tau[s], cnt[s], k, d) - log_tau_prior(tau[t], cnt[t], k, d)
                   + log_tau_prior(tau[s], mn, k, d))
            lp[nc] = _log_post(prm, n, Wm, Bm, Cm, LDm, TPm, b - 1, l - co[t], ints)
            c_t[nc] = t
            c_dl[nc] = -co[t]
            c_cr[nc] = cm
            c_ld[nc] = lm
            nc += 1
        if nc == 1:
            continue
        pick = _sample_index(lp, nc)
        if pick <= 0:
            continue
        t = c_t[pick]
        merge_slots_arr(P, D, k, s, t)
        credit[s] = c_cr[pick]
        logdet[s] = c_ld[pick]
        ints[LTOT] += c_dl[pick]
        merges += 1
    return merges


# ---------------------------------------------------------------------------
# w-pass

@njit(cache=True)
def log_w_data(P, D, prm, w, k, credit_out, logdet_out):
    """Data term at w with fresh regression terms written to *_out."""
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x, xrange = D[0], D[1], D[2]
    n = member.shape[0]
    gy = prm[P_GY]
    rows = np.empty(n, dtype=np.int64)
    colbuf = np.empty((n, max(k, 1)))
    jxb = np.empty(k)
    jsxx = np.empty((k, k))
    jsxy = np.empty(k)
    beta = np.empty(k)
    W = 0.0
    B = 0.0
    C = 0.0
    LD = 0.0
    for q in range(ints[NLIVE]):
        s = live[q]
        W += yss[s]
        dm = ybar[s] - gy
        B += cnt[s] * dm * dm
        if tau[s] == 1:
            c, ld, ok = _reg_block(cnt[s], sxx[s], sxy[s], w, k, xrange, member, y, x,
                                   s, s, -1, -1, rows, colbuf, jxb, jsxx, jsxy, beta, ints)
            if not ok:
                return -np.inf
            credit_out[s] = c
            logdet_out[s] = ld
            C += c
            LD += ld
        else:
            credit_out[s] = 0.0
            logdet_out[s] = 0.0
    b = ints[NLIVE]
    wt, clamped = clamp_wtilde(W - C, prm[P_TSS])
    if clamped:
        ints[CLAMP] += 1
    return log_data_term(wt, B, b, n, 1, LD, prm[P_W0], b_is_zero(B, b, prm[P_TSS]))


@njit(cache=True)
def w_pass(P, D, prm, w, wlim, k, seed):
    """Metropolis-within-Gibbs update of w_1..w_k with uniform prior proposals."""
    if seed >= 0:
        np.random.seed(seed)
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    cap = cnt.shape[0]
    cc = np.empty(cap)
    cl = np.empty(cap)
    pc = np.empty(cap)
    pl = np.empty(cap)
    cur = log_w_data(P, D, prm, w, k, cc, cl)
    wp = w.copy()
    for j in range(1, k + 1):
        wp[j] = np.random.uniform(0.0, wlim[j])
        while wp[j] <= 0.0:
            wp[j] = np.random.uniform(0.0, wlim[j])
        new = log_w_data(P, D, prm, wp, k, pc, pl)
        ints[WPROP] += 1
        if new >= cur or np.random.random() < math.exp(new - cur):
            w[j] = wp[j]
            cur = new
            cc[:] = pc
            cl[:] = pl
            ints[WACC] += 1
        else:
            wp[j] = w[j]
    for q in range(ints[NLIVE]):
        s = live[q]
        credit[s] = cc[s]
        logdet[s] = cl[s]
    return cur


# ---------------------------------------------------------------------------
# conditional expectations for one retained step

@njit(cache=True)
def step_fitted(P, D, prm, w, k, gl_nodes, gl_weights, fitted):
    """Fill ``fitted`` with per-node conditional means; return (sigma2, w0*, W~, B)."""
    (member, cnt, label, tau, ybar, yss, xbar, sxx, sxy, credit, logdet,
     live, free, ints, stamp, near) = P
    y, x, xrange = D[0], D[1], D[2]
    n = member.shape[0]
    cap = cnt.shape[0]
    gy = prm[P_GY]
    rows = np.empty(n, dtype=np.int64)
    colbuf = np.empty((n, max(k, 1)))
    jxb = np.empty(k)
    jsxx = np.empty((k, k))
    jsxy = np.empty(k)
    betas = np.zeros((cap, k))
    W = 0.0
    B = 0.0
    C = 0.0
    for q in range(ints[NLIVE]):
        s = live[q]
        W += yss[s]
        dm = ybar[s] - gy
        B += cnt[s] * dm * dm
        if tau[s] == 1:
            c, ld, ok = _reg_block(cnt[s], sxx[s], sxy[s], w, k, xrange, member, y, x,
                                   s, s, -1, -1, rows, colbuf, jxb, jsxx, jsxy, betas[s], ints)
            if not ok:
                betas[s, :] = 0.0
                c = 0.0
            C += c
    b = ints[NLIVE]
    wt, _ = clamp_wtilde(W - C, prm[P_TSS])
    bz = b_is_zero(B, b, prm[P_TSS])
    w0s = w0_star(wt, B, b, n, 1, prm[P_W0], bz, gl_nodes, gl_weights)
    for i in range(n):
        s = member[i]
        v = (1.0 - w0s) * ybar[s] + w0s * gy
        if tau[s] == 1:
            for j in range(k):
                v += (x[i, j] - xbar[s, j]) * betas[s, j]
        fitted[i] = v
    if bz:
        B = 0.0
    sig2 = (wt + w0s * B) / (n - 3) if n > 3 else np.nan
    return sig2, w0s, wt, B
