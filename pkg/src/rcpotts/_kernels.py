"""Numba kernels for the random-cluster edge dynamics.

Graphs are passed as flat arrays: ``offsets`` (CSR over vertices), and per
half-edge ``he_edge`` (edge id, -1 if unmatched) and ``he_nbr`` (vertex at the
other end).  Connectivity queries use interleaved bidirectional BFS with
stamp-marked visit arrays, so no per-query clearing is needed.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def connected_without(u, v, skip, offsets, he_edge, he_nbr, member, mark, qa, qb, stamp):
    """True iff u and v are joined in (V, F minus edge ``skip``).

    ``stamp`` must exceed every previous stamp; marks written are 2*stamp and
    2*stamp+1.
    """
    if u == v:
        return True
    ma = 2 * stamp
    mb = ma + 1
    qa[0] = u
    qb[0] = v
    mark[u] = ma
    mark[v] = mb
    ha, ta, hb, tb = 0, 1, 0, 1
    while ha < ta and hb < tb:
        if ta - ha <= tb - hb:
            x = qa[ha]
            ha += 1
            for h in range(offsets[x], offsets[x + 1]):
                ed = he_edge[h]
                if ed < 0 or ed == skip or not member[ed]:
                    continue
                y = he_nbr[h]
                my = mark[y]
                if my == mb:
                    return True
                if my != ma:
                    mark[y] = ma
                    qa[ta] = y
                    ta += 1
        else:
            x = qb[hb]
            hb += 1
            for h in range(offsets[x], offsets[x + 1]):
                ed = he_edge[h]
                if ed < 0 or ed == skip or not member[ed]:
                    continue
                y = he_nbr[h]
                my = mark[y]
                if my == ma:
                    return True
                if my != mb:
                    mark[y] = mb
                    qb[tb] = y
                    tb += 1
    return False


@njit(cache=True)
def run_steps(offsets, he_edge, he_nbr, edge_u, edge_v, member, pool, choices, us,
              p, phat, lo, hi, work, mark, qa, qb, hist, hist_from, acc, since, acc_on):
    """Apply ``len(choices)`` single-edge updates in place.

    work[0] = |F|, work[1] = global step counter, work[2] = stamp,
    work[3] = bitmask state (tiny graphs), work[4] += toggles,
    work[5] += updates ignored by the edge-count window [lo, hi].
    The histogram over bitmask states is filled for steps > hist_from when
    ``hist`` is non-empty.  With ``acc_on`` the per-edge time-in accumulators
    ``acc``/``since`` are maintained lazily.
    """
    size = work[0]
    t = work[1]
    stamp = work[2]
    state = work[3]
    use_hist = hist.shape[0] > 0
    for k in range(choices.shape[0]):
        t += 1
        e = pool[choices[k]]
        U = us[k]
        cur = member[e]
        if U < phat:
            want = True
        elif U >= p:
            want = False
        else:
            stamp += 1
            cut = not connected_without(edge_u[e], edge_v[e], e, offsets, he_edge, he_nbr,
                                        member, mark, qa, qb, stamp)
            want = not cut
        if want != cur:
            new_size = size + 1 if want else size - 1
            if new_size < lo or new_size > hi:
                work[5] += 1
            else:
                member[e] = want
                size = new_size
                state ^= (1 << e) if use_hist else 0
                work[4] += 1
                if acc_on:
                    if want:
                        since[e] = t
                    else:
                        acc[e] += t - since[e]
        if use_hist and t > hist_from:
            hist[state] += 1
    work[0] = size
    work[1] = t
    work[2] = stamp
    work[3] = state


@njit(cache=True)
def run_coupled(offsets, he_edge, he_nbr, edge_u, edge_v, states, sizes, pool, choices, us,
                p, phat, lo, hi, work, mark, qa, qb, pairs, stop_when_equal):
    """Grand-coupled updates: every state sees the same edge and uniform.

    ``pairs`` lists (a, b) with states[a] a subset of states[b]; an ordering
    violation at the updated edge increments work[3].  work[0] = steps
    taken, work[1] = stamp, work[2] = number of edges on which states 0 and 1
    differ.  With ``stop_when_equal`` the loop stops as soon as work[2] hits 0.
    """
    k_states = states.shape[0]
    stamp = work[1]
    for k in range(choices.shape[0]):
        e = pool[choices[k]]
        U = us[k]
        before_diff = k_states >= 2 and states[0, e] != states[1, e]
        for s in range(k_states):
            row = states[s]
            cur = row[e]
            if U < phat:
                want = True
            elif U >= p:
                want = False
            else:
                stamp += 1
                want = connected_without(edge_u[e], edge_v[e], e, offsets, he_edge, he_nbr,
                                         row, mark, qa, qb, stamp)
            if want != cur:
                new_size = sizes[s] + 1 if want else sizes[s] - 1
                if new_size >= lo and new_size <= hi:
                    row[e] = want
                    sizes[s] = new_size
        for j in range(pairs.shape[0]):
            if states[pairs[j, 0], e] and not states[pairs[j, 1], e]:
                work[3] += 1
        if k_states >= 2:
            after_diff = states[0, e] != states[1, e]
            if before_diff and not after_diff:
                work[2] -= 1
            elif after_diff and not before_diff:
                work[2] += 1
        work[0] += 1
        if stop_when_equal and work[2] == 0:
            break
    work[1] = stamp


@njit(cache=True)
def count_components_masks(n, edge_u, edge_v, masks):
    """c(F) for every edge subset given as a bitmask (self-loops never merge)."""
    out = np.empty(masks.shape[0], dtype=np.int64)
    parent = np.empty(n, dtype=np.int64)
    m = edge_u.shape[0]
    for i in range(masks.shape[0]):
        for x in range(n):
            parent[x] = x
        c = n
        mk = masks[i]
        for e in range(m):
            if (mk >> e) & 1:
                a = edge_u[e]
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                b = edge_v[e]
                while parent[b] != b:
                    parent[b] = parent[parent[b]]
                    b = parent[b]
                if a != b:
                    parent[a] = b
                    c -= 1
        out[i] = c
    return out
