"""Compiled inner loops for dyad-level samplers and change statistics.

Each layer is mirrored by a small set of arrays:

* sign layer: ``z`` (int8, {-1, 0, +1}), fixed support ``x`` (uint8),
  positive degrees ``pos_deg``, and two-path count matrices ``p2`` / ``n2``
  (``p2[u, v]`` = active common neighbours joined to both ``u`` and ``v``
  by positive ties, ``n2`` the both-negative count);
* binary layer: adjacency ``a`` (uint8), degrees ``deg``, and the common
  neighbour count matrix ``cn``.

The aggregates are updated in O(n) per toggle, so a single proposal costs
O(n) including its change statistics. Weight lookups come from per-term
tables: ``wtab[q, c]`` is the geometric weight of count ``c`` and
``vtab[q, c]`` its forward difference, both precomputed in Python.

Terms are encoded as integer codes plus a per-term dyadic weight matrix
``wmats[q]`` (used only by code 0). ``kind_slots``/``kind_cnt`` list the
term slots attached to each shared-partner kind so one scan over common
neighbours can feed several terms.
"""

import numpy as np
from numba import njit

# sign-layer term codes
SIGN_DYADIC = 0   # sum of wmats[q, i, j] over positive dyads
SIGN_GWDEG = 1    # geometrically weighted positive-degree distribution
SIGN_GWESF_P = 2  # positive tie, both legs of the two-path positive
SIGN_GWESE_P = 3  # positive tie, both legs negative
SIGN_GWESE_N = 4  # negative tie, both legs negative
SIGN_GWESF_N = 5  # negative tie, both legs positive

# shared-partner kinds for the sign layer, indexed (anchor, legs)
KIND_ESF_P = 0
KIND_ESE_P = 1
KIND_ESE_N = 2
KIND_ESF_N = 3

# binary-layer term codes
BIN_DYADIC = 0
BIN_GWDEG = 1
BIN_GWESP = 2   # tie present, shared partner count weighting
BIN_GWNSP = 3   # tie absent, shared partner count weighting

BIN_KIND_ESP = 0
BIN_KIND_NSP = 1


@njit(cache=True, nogil=True)
def sign_set(i, j, new_sign, z, pos_deg, p2, n2):
    """Flip z[i, j] between -1 and +1, updating the maintained aggregates."""
    n = z.shape[0]
    old = z[i, j]
    if old == new_sign:
        return
    z[i, j] = new_sign
    z[j, i] = new_sign
    step = 1 if new_sign == 1 else -1
    pos_deg[i] += step
    pos_deg[j] += step
    for v in range(n):
        if v == i or v == j:
            continue
        svj = z[v, j]
        if svj == 1:
            p2[i, v] += step
            p2[v, i] += step
        elif svj == -1:
            n2[i, v] -= step
            n2[v, i] -= step
        svi = z[v, i]
        if svi == 1:
            p2[j, v] += step
            p2[v, j] += step
        elif svi == -1:
            n2[j, v] -= step
            n2[v, j] -= step


@njit(cache=True, nogil=True)
def sign_delta(i, j, z, x, pos_deg, p2, n2, codes, wmats, wtab, vtab,
               kind_slots, kind_cnt, out):
    """Per-term change s(z with z_ij=+1) - s(z with z_ij=-1).

    Precondition: z[i, j] == -1 and the aggregates describe that state.
    """
    nq = codes.shape[0]
    n = z.shape[0]
    for q in range(nq):
        c = codes[q]
        if c == SIGN_DYADIC:
            out[q] = wmats[q, i, j]
        elif c == SIGN_GWDEG:
            out[q] = vtab[q, pos_deg[i]] + vtab[q, pos_deg[j]]
        elif c == SIGN_GWESF_P:
            out[q] = wtab[q, p2[i, j]]
        elif c == SIGN_GWESE_P:
            out[q] = wtab[q, n2[i, j]]
        elif c == SIGN_GWESE_N:
            out[q] = -wtab[q, n2[i, j]]
        else:  # SIGN_GWESF_N
            out[q] = -wtab[q, p2[i, j]]
    # two-path legs through each active common neighbour
    for k in range(n):
        if k == i or k == j:
            continue
        if x[i, k] == 0 or x[j, k] == 0:
            continue
        # anchor (i, k): partner j arrives on the positive side or leaves
        # the negative side depending on the fixed co-leg z[j, k]
        s = z[j, k]
        a = z[i, k]
        if s == 1:
            kind = KIND_ESF_P if a == 1 else KIND_ESF_N
            cbase = p2[i, k]
            for t in range(kind_cnt[kind]):
                q = kind_slots[kind, t]
                out[q] += vtab[q, cbase]
        else:
            kind = KIND_ESE_P if a == 1 else KIND_ESE_N
            cbase = n2[i, k] - 1
            for t in range(kind_cnt[kind]):
                q = kind_slots[kind, t]
                out[q] -= vtab[q, cbase]
        # anchor (j, k): partner i, fixed co-leg z[i, k]
        s = z[i, k]
        a = z[j, k]
        if s == 1:
            kind = KIND_ESF_P if a == 1 else KIND_ESF_N
            cbase = p2[j, k]
            for t in range(kind_cnt[kind]):
                q = kind_slots[kind, t]
                out[q] += vtab[q, cbase]
        else:
            kind = KIND_ESE_P if a == 1 else KIND_ESE_N
            cbase = n2[j, k] - 1
            for t in range(kind_cnt[kind]):
                q = kind_slots[kind, t]
                out[q] -= vtab[q, cbase]


@njit(cache=True, nogil=True)
def sign_stats(z, pos_deg, p2, n2, codes, wmats, wtab, out):
    """Sufficient statistics of the sign layer from its maintained state."""
    nq = codes.shape[0]
    n = z.shape[0]
    for q in range(nq):
        c = codes[q]
        acc = 0.0
        if c == SIGN_DYADIC:
            for i in range(n):
                for j in range(i + 1, n):
                    if z[i, j] == 1:
                        acc += wmats[q, i, j]
        elif c == SIGN_GWDEG:
            for i in range(n):
                acc += wtab[q, pos_deg[i]]
        elif c == SIGN_GWESF_P:
            for i in range(n):
                for j in range(i + 1, n):
                    if z[i, j] == 1:
                        acc += wtab[q, p2[i, j]]
        elif c == SIGN_GWESE_P:
            for i in range(n):
                for j in range(i + 1, n):
                    if z[i, j] == 1:
                        acc += wtab[q, n2[i, j]]
        elif c == SIGN_GWESE_N:
            for i in range(n):
                for j in range(i + 1, n):
                    if z[i, j] == -1:
                        acc += wtab[q, n2[i, j]]
        else:  # SIGN_GWESF_N
            for i in range(n):
                for j in range(i + 1, n):
                    if z[i, j] == -1:
                        acc += wtab[q, p2[i, j]]
        out[q] = acc


@njit(cache=True, nogil=True)
def sign_run(z, x, pos_deg, p2, n2, codes, wmats, wtab, vtab,
             kind_slots, kind_cnt, zeta, free_i, free_j,
             pick, unif, use_metropolis, burn, record_every, out_states):
    """Run dyad updates over the free sign dyads; returns records written.

    ``pick[u]`` indexes the free dyad proposed at update ``u`` and
    ``unif[u]`` is its uniform draw. With ``use_metropolis`` false the
    update is a two-state conditional draw, else a sign-flip proposal
    accepted by the Metropolis rule. When ``record_every > 0`` the free
    dyads' signs are packed into a bitmask after every ``record_every``-th
    post-burn update.
    """
    nq = codes.shape[0]
    delta = np.empty(nq, dtype=np.float64)
    r = 0
    for u in range(pick.shape[0]):
        d = pick[u]
        i = free_i[d]
        j = free_j[d]
        cur = z[i, j]
        if cur == 1:
            sign_set(i, j, -1, z, pos_deg, p2, n2)
        sign_delta(i, j, z, x, pos_deg, p2, n2, codes, wmats, wtab, vtab,
                   kind_slots, kind_cnt, delta)
        lo = 0.0
        for q in range(nq):
            lo += zeta[q] * delta[q]
        if use_metropolis:
            if cur == 1:
                # proposing -1 from +1: accept with min(1, exp(-lo))
                acc = -lo
                if acc > 0.0:
                    acc = 0.0
                if not (unif[u] < np.exp(acc)):
                    sign_set(i, j, 1, z, pos_deg, p2, n2)
            else:
                acc = lo
                if acc > 0.0:
                    acc = 0.0
                if unif[u] < np.exp(acc):
                    sign_set(i, j, 1, z, pos_deg, p2, n2)
        else:
            p_plus = 1.0 / (1.0 + np.exp(-lo))
            if unif[u] < p_plus:
                sign_set(i, j, 1, z, pos_deg, p2, n2)
        if record_every > 0 and u >= burn:
            if (u - burn + 1) % record_every == 0:
                mask = np.uint64(0)
                for d2 in range(free_i.shape[0]):
                    if z[free_i[d2], free_j[d2]] == 1:
                        mask |= np.uint64(1) << np.uint64(d2)
                out_states[r] = mask
                r += 1
    return r


@njit(cache=True, nogil=True)
def bin_set(i, j, present, a, deg, cn):
    """Toggle a[i, j], updating degrees and common neighbour counts."""
    n = a.shape[0]
    old = a[i, j]
    new = 1 if present else 0
    if old == new:
        return
    a[i, j] = new
    a[j, i] = new
    step = 1 if present else -1
    deg[i] += step
    deg[j] += step
    for v in range(n):
        if v == i or v == j:
            continue
        if a[j, v] == 1:
            cn[i, v] += step
            cn[v, i] += step
        if a[i, v] == 1:
            cn[j, v] += step
            cn[v, j] += step


@njit(cache=True, nogil=True)
def bin_delta(i, j, a, deg, cn, codes, wmats, wtab, vtab,
              kind_slots, kind_cnt, out):
    """Per-term change s(a with tie ij) - s(a without).

    Precondition: a[i, j] == 0 and the aggregates describe that state.
    """
    nq = codes.shape[0]
    n = a.shape[0]
    for q in range(nq):
        c = codes[q]
        if c == BIN_DYADIC:
            out[q] = wmats[q, i, j]
        elif c == BIN_GWDEG:
            out[q] = vtab[q, deg[i]] + vtab[q, deg[j]]
        elif c == BIN_GWESP:
            out[q] = wtab[q, cn[i, j]]
        else:  # BIN_GWNSP: the pair itself stops being a non-tie
            out[q] = -wtab[q, cn[i, j]]
    for k in range(n):
        if k == i or k == j:
            continue
        aik = a[i, k]
        ajk = a[j, k]
        if aik == 1 and ajk == 1:
            # ties (i,k) and (j,k) each gain a shared partner
            for t in range(kind_cnt[BIN_KIND_ESP]):
                q = kind_slots[BIN_KIND_ESP, t]
                out[q] += vtab[q, cn[i, k]] + vtab[q, cn[j, k]]
        elif aik == 1:
            # non-tie (j,k) gains a shared partner through i
            for t in range(kind_cnt[BIN_KIND_NSP]):
                q = kind_slots[BIN_KIND_NSP, t]
                out[q] += vtab[q, cn[j, k]]
        elif ajk == 1:
            for t in range(kind_cnt[BIN_KIND_NSP]):
                q = kind_slots[BIN_KIND_NSP, t]
                out[q] += vtab[q, cn[i, k]]


@njit(cache=True, nogil=True)
def bin_stats(a, deg, cn, codes, wmats, wtab, out):
    """Sufficient statistics of the binary layer from its maintained state."""
    nq = codes.shape[0]
    n = a.shape[0]
    for q in range(nq):
        c = codes[q]
        acc = 0.0
        if c == BIN_DYADIC:
            for i in range(n):
                for j in range(i + 1, n):
                    if a[i, j] == 1:
                        acc += wmats[q, i, j]
        elif c == BIN_GWDEG:
            for i in range(n):
                acc += wtab[q, deg[i]]
        elif c == BIN_GWESP:
            for i in range(n):
                for j in range(i + 1, n):
                    if a[i, j] == 1:
                        acc += wtab[q, cn[i, j]]
        else:  # BIN_GWNSP
            for i in range(n):
                for j in range(i + 1, n):
                    if a[i, j] == 0:
                        acc += wtab[q, cn[i, j]]
        out[q] = acc


@njit(cache=True, nogil=True)
def bin_run(a, deg, cn, codes, wmats, wtab, vtab, kind_slots, kind_cnt,
            xi, free_i, free_j, pick, unif, use_metropolis, burn,
            record_every, out_states):
    """Run single-tie toggles over the free binary dyads.

    A proposed toggle of a present tie temporarily removes it so that the
    change statistics are always evaluated from the tie-absent state; a
    rejected removal reinstates it.
    """
    nq = codes.shape[0]
    delta = np.empty(nq, dtype=np.float64)
    r = 0
    for u in range(pick.shape[0]):
        d = pick[u]
        i = free_i[d]
        j = free_j[d]
        cur = a[i, j]
        if cur == 1:
            bin_set(i, j, False, a, deg, cn)
        bin_delta(i, j, a, deg, cn, codes, wmats, wtab, vtab,
                  kind_slots, kind_cnt, delta)
        lo = 0.0
        for q in range(nq):
            lo += xi[q] * delta[q]
        if use_metropolis:
            if cur == 1:
                acc = -lo
                if acc > 0.0:
                    acc = 0.0
                if not (unif[u] < np.exp(acc)):
                    bin_set(i, j, True, a, deg, cn)
            else:
                acc = lo
                if acc > 0.0:
                    acc = 0.0
                if unif[u] < np.exp(acc):
                    bin_set(i, j, True, a, deg, cn)
        else:
            p_on = 1.0 / (1.0 + np.exp(-lo))
            if unif[u] < p_on:
                bin_set(i, j, True, a, deg, cn)
        if record_every > 0 and u >= burn:
            if (u - burn + 1) % record_every == 0:
                mask = np.uint64(0)
                for d2 in range(free_i.shape[0]):
                    if a[free_i[d2], free_j[d2]] == 1:
                        mask |= np.uint64(1) << np.uint64(d2)
                out_states[r] = mask
                r += 1
    return r
