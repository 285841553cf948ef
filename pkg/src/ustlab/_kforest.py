"""numba kernels for Wilson's algorithm: dense full-box sampling, and lazy
exploration of the past of the origin on boxes too large to span.

Lazy exploration is exact: by the cycle-popping representation, the sampled
tree is a deterministic function of independent per-site arrow stacks, so the
law of any observable is unchanged when vertices are processed adaptively
(here: the origin's future first, then only sites whose membership in the
past is still undecided, discovered through lattice adjacency of the past).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._kwalk import (COORD_LIMIT, _GAMMA, chebyshev, pack, sm64_next, step,
                     unpack0, unpack1, unpack2, unpack3)


# ---------------------------------------------------------------------------
# dense Wilson on a wired box
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_wilson_dense(seed, radius, order, max_steps):
    """Sample the wired-box UST; returns parent directions (0..7 per site).

    A site's parent is site + DIRECTIONS[d]; steps leaving the box point at
    the sink.  `order` lists dense site indices; walks use the last-exit
    ("next arrow") representation so loop erasure is implicit.
    """
    L = 2 * radius + 1
    N = L ** 4
    s0 = L * L * L
    s1 = L * L
    s2 = L
    parent = np.full(N, -1, dtype=np.int8)
    in_tree = np.zeros(N, dtype=np.uint8)
    nxt = np.zeros(N, dtype=np.int8)
    s = seed
    steps = 0
    for oi in range(order.shape[0]):
        v = order[oi]
        if in_tree[v]:
            continue
        # random walk from v until the tree (or the sink) is hit
        idx = v
        i0 = idx // s0
        i1 = (idx // s1) % L
        i2 = (idx // s2) % L
        i3 = idx % L
        while True:
            s, z = sm64_next(s)
            d = z >> 61
            nxt[idx] = d
            if d == 0:
                i0 += 1
            elif d == 1:
                i0 -= 1
            elif d == 2:
                i1 += 1
            elif d == 3:
                i1 -= 1
            elif d == 4:
                i2 += 1
            elif d == 5:
                i2 -= 1
            elif d == 6:
                i3 += 1
            else:
                i3 -= 1
            steps += 1
            if steps > max_steps:
                raise RuntimeError("Wilson walk budget exceeded")
            if i0 < 0 or i0 >= L or i1 < 0 or i1 >= L or i2 < 0 or i2 >= L or i3 < 0 or i3 >= L:
                break  # sink reached
            idx = ((i0 * L + i1) * L + i2) * L + i3
            if in_tree[idx]:
                break
        # retrace the loop-erased path and attach it
        idx = v
        i0 = idx // s0
        i1 = (idx // s1) % L
        i2 = (idx // s2) % L
        i3 = idx % L
        while in_tree[idx] == 0:
            d = nxt[idx]
            in_tree[idx] = 1
            parent[idx] = d
            if d == 0:
                i0 += 1
            elif d == 1:
                i0 -= 1
            elif d == 2:
                i1 += 1
            elif d == 3:
                i1 -= 1
            elif d == 4:
                i2 += 1
            elif d == 5:
                i2 -= 1
            elif d == 6:
                i3 += 1
            else:
                i3 -= 1
            if i0 < 0 or i0 >= L or i1 < 0 or i1 >= L or i2 < 0 or i2 >= L or i3 < 0 or i3 >= L:
                break
            idx = ((i0 * L + i1) * L + i2) * L + i3
    return parent


@njit(cache=True, nogil=True)
def k_wilson_dense_vwired(seed, radius, v_idx, order, max_steps):
    """Dense Wilson with an extra root vertex (v wired to the sink)."""
    L = 2 * radius + 1
    N = L ** 4
    parent = np.full(N, -1, dtype=np.int8)
    in_tree = np.zeros(N, dtype=np.uint8)
    in_tree[v_idx] = 1  # v is part of the root
    nxt = np.zeros(N, dtype=np.int8)
    s0 = L * L * L
    s1 = L * L
    s2 = L
    s = seed
    steps = 0
    for oi in range(order.shape[0]):
        v = order[oi]
        if in_tree[v]:
            continue
        idx = v
        i0 = idx // s0
        i1 = (idx // s1) % L
        i2 = (idx // s2) % L
        i3 = idx % L
        while True:
            s, z = sm64_next(s)
            d = z >> 61
            nxt[idx] = d
            if d == 0:
                i0 += 1
            elif d == 1:
                i0 -= 1
            elif d == 2:
                i1 += 1
            elif d == 3:
                i1 -= 1
            elif d == 4:
                i2 += 1
            elif d == 5:
                i2 -= 1
            elif d == 6:
                i3 += 1
            else:
                i3 -= 1
            steps += 1
            if steps > max_steps:
                raise RuntimeError("Wilson walk budget exceeded")
            if i0 < 0 or i0 >= L or i1 < 0 or i1 >= L or i2 < 0 or i2 >= L or i3 < 0 or i3 >= L:
                break
            idx = ((i0 * L + i1) * L + i2) * L + i3
            if in_tree[idx]:
                break
        idx = v
        i0 = idx // s0
        i1 = (idx // s1) % L
        i2 = (idx // s2) % L
        i3 = idx % L
        while in_tree[idx] == 0:
            d = nxt[idx]
            in_tree[idx] = 1
            parent[idx] = d
            if d == 0:
                i0 += 1
            elif d == 1:
                i0 -= 1
            elif d == 2:
                i1 += 1
            elif d == 3:
                i1 -= 1
            elif d == 4:
                i2 += 1
            elif d == 5:
                i2 -= 1
            elif d == 6:
                i3 += 1
            else:
                i3 -= 1
            if i0 < 0 or i0 >= L or i1 < 0 or i1 >= L or i2 < 0 or i2 >= L or i3 < 0 or i3 >= L:
                break
            idx = ((i0 * L + i1) * L + i2) * L + i3
    return parent


# ---------------------------------------------------------------------------
# hash-map helpers with epoch stamping (O(1) reset between samples)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _probe(keys, stamps, epoch, shift, p):
    """Slot of key p, or of the first empty slot; second value: found flag."""
    mask = keys.shape[0] - 1
    j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
    while True:
        if stamps[j] != epoch:
            return j, False
        if keys[j] == p:
            return j, True
        j = (j + 1) & mask


# ---------------------------------------------------------------------------
# lazy past-of-origin sampler
# ---------------------------------------------------------------------------

FLAG_OK = 0
FLAG_TABLE_FULL = 1
FLAG_STEPS = 2

_NO_DEPTH = -1


@njit(cache=True, nogil=True)
def k_past_batch(seed, radius, zero_wired, n_samples, shells_max, cap_pow,
                 max_steps):
    """Sample pasts of the origin in the wired-box UST (or the component of
    the origin in the 0-wired variant) without building the full forest.

    Returns (stats, shells): stats[i] = (volume, intrinsic radius, extrinsic
    radius, flag); shells[i, n] = |{x in past : tree distance n}| for
    n <= shells_max.  Nonzero flags mark aborted samples (table overflow or
    step budget); callers must discard or retry those.
    """
    cap = 1 << cap_pow
    shift = 64 - cap_pow
    max_nodes = cap // 2
    fkeys = np.zeros(cap, dtype=np.int64)
    fvals = np.zeros(cap, dtype=np.int32)
    fstamp = np.full(cap, -1, dtype=np.int32)
    wkeys = np.zeros(cap, dtype=np.int64)
    wdirs = np.zeros(cap, dtype=np.int8)
    wstamp = np.full(cap, -1, dtype=np.int32)
    npast = np.zeros(max_nodes, dtype=np.uint8)
    ndepth = np.zeros(max_nodes, dtype=np.int64)
    queue = np.zeros(max_nodes, dtype=np.int64)
    stats = np.zeros((n_samples, 4), dtype=np.int64)
    shells = np.zeros((n_samples, shells_max + 1), dtype=np.int64)
    s = seed
    wepoch = -1

    for rep in range(n_samples):
        fepoch = rep
        n_nodes = 0
        steps = 0
        flag = FLAG_OK
        vol = 0
        rad_int = 0
        rad_ext = 0
        qh = 0
        qt = 0

        # seed the forest: origin node (+ its future spine in the UST case)
        origin = pack(0, 0, 0, 0)
        if zero_wired:
            j, found = _probe(fkeys, fstamp, fepoch, shift, origin)
            fkeys[j] = origin
            fstamp[j] = fepoch
            fvals[j] = 0
            npast[0] = 1
            ndepth[0] = 0
            n_nodes = 1
            queue[qt] = origin
            qt += 1
            vol = 1
            shells[rep, 0] = 1
        else:
            # walk from the origin until it leaves the box; its erasure is
            # the origin's future, with only the origin itself in the past
            wepoch += 1
            x0 = x1 = x2 = x3 = 0
            while True:
                s, z = sm64_next(s)
                d = z >> 61
                j, _found = _probe(wkeys, wstamp, wepoch, shift, pack(x0, x1, x2, x3))
                wkeys[j] = pack(x0, x1, x2, x3)
                wstamp[j] = wepoch
                wdirs[j] = d
                x0, x1, x2, x3 = step(x0, x1, x2, x3, d)
                steps += 1
                if steps > max_steps:
                    flag = FLAG_STEPS
                    break
                if chebyshev(x0, x1, x2, x3) > radius:
                    break
            if flag == FLAG_OK:
                # retrace the spine
                x0 = x1 = x2 = x3 = 0
                first = True
                while True:
                    p = pack(x0, x1, x2, x3)
                    j, found = _probe(fkeys, fstamp, fepoch, shift, p)
                    if found:
                        break
                    if n_nodes >= max_nodes:
                        flag = FLAG_TABLE_FULL
                        break
                    fkeys[j] = p
                    fstamp[j] = fepoch
                    fvals[j] = n_nodes
                    npast[n_nodes] = 1 if first else 0
                    ndepth[n_nodes] = 0
                    n_nodes += 1
                    if first:
                        queue[qt] = p
                        qt += 1
                        vol = 1
                        shells[rep, 0] = 1
                        first = False
                    jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
                    if not foundw:
                        break  # should not happen; defensive
                    x0, x1, x2, x3 = step(x0, x1, x2, x3, wdirs[jw])
                    if chebyshev(x0, x1, x2, x3) > radius:
                        break

        # frontier exploration
        while flag == FLAG_OK and qh < qt:
            xq = queue[qh]
            qh += 1
            bx0 = unpack0(xq)
            bx1 = unpack1(xq)
            bx2 = unpack2(xq)
            bx3 = unpack3(xq)
            for dd in range(8):
                y0, y1, y2, y3 = step(bx0, bx1, bx2, bx3, dd)
                if chebyshev(y0, y1, y2, y3) > radius:
                    continue
                py = pack(y0, y1, y2, y3)
                jy, foundy = _probe(fkeys, fstamp, fepoch, shift, py)
                if foundy:
                    continue
                # Wilson walk from y until forest or sink
                wepoch += 1
                x0, x1, x2, x3 = y0, y1, y2, y3
                hit_forest = False
                hit_node = -1
                while True:
                    p = pack(x0, x1, x2, x3)
                    jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
                    if foundf:
                        hit_forest = True
                        hit_node = fvals[jf]
                        break
                    s, z = sm64_next(s)
                    d = z >> 61
                    jw, _fw = _probe(wkeys, wstamp, wepoch, shift, p)
                    wkeys[jw] = p
                    wstamp[jw] = wepoch
                    wdirs[jw] = d
                    x0, x1, x2, x3 = step(x0, x1, x2, x3, d)
                    steps += 1
                    if steps > max_steps:
                        flag = FLAG_STEPS
                        break
                    if chebyshev(x0, x1, x2, x3) > radius:
                        break  # sink
                if flag != FLAG_OK:
                    break
                st = npast[hit_node] if hit_forest else np.uint8(0)
                base_depth = ndepth[hit_node] if hit_forest else 0
                # first pass: length of the erased path y -> hit
                k = 0
                x0, x1, x2, x3 = y0, y1, y2, y3
                while True:
                    p = pack(x0, x1, x2, x3)
                    jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
                    if foundf:
                        break
                    k += 1
                    jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
                    x0, x1, x2, x3 = step(x0, x1, x2, x3, wdirs[jw])
                    if chebyshev(x0, x1, x2, x3) > radius:
                        break
                # second pass: create nodes with depths counted from the hit
                x0, x1, x2, x3 = y0, y1, y2, y3
                i = 0
                while i < k:
                    p = pack(x0, x1, x2, x3)
                    if n_nodes >= max_nodes or qt >= max_nodes:
                        flag = FLAG_TABLE_FULL
                        break
                    jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
                    fkeys[jf] = p
                    fstamp[jf] = fepoch
                    fvals[jf] = n_nodes
                    npast[n_nodes] = st
                    dep = base_depth + (k - i)
                    ndepth[n_nodes] = dep if st else 0
                    n_nodes += 1
                    if st:
                        vol += 1
                        if dep <= shells_max:
                            shells[rep, dep] += 1
                        if dep > rad_int:
                            rad_int = dep
                        ce = chebyshev(x0, x1, x2, x3)
                        if ce > rad_ext:
                            rad_ext = ce
                        queue[qt] = p
                        qt += 1
                    i += 1
                    jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
                    x0, x1, x2, x3 = step(x0, x1, x2, x3, wdirs[jw])
                if flag != FLAG_OK:
                    break
            if flag != FLAG_OK:
                break

        stats[rep, 0] = vol
        stats[rep, 1] = rad_int
        stats[rep, 2] = rad_ext
        stats[rep, 3] = flag
    return stats, shells


@njit(cache=True, nogil=True)
def k_past_tree(seed, radius, zero_wired, cap_pow, max_steps):
    """One lazy past sample that also returns the past's tree structure.

    Returns (past_sites, parent_index, depth, flag) where parent_index[i]
    indexes into past_sites (the origin has parent -1).
    """
    cap = 1 << cap_pow
    shift = 64 - cap_pow
    max_nodes = cap // 2
    fkeys = np.zeros(cap, dtype=np.int64)
    fvals = np.zeros(cap, dtype=np.int32)
    fstamp = np.full(cap, -1, dtype=np.int32)
    wkeys = np.zeros(cap, dtype=np.int64)
    wdirs = np.zeros(cap, dtype=np.int8)
    wstamp = np.full(cap, -1, dtype=np.int32)
    npast = np.zeros(max_nodes, dtype=np.uint8)
    ndepth = np.zeros(max_nodes, dtype=np.int64)
    nsite = np.zeros(max_nodes, dtype=np.int64)
    nparent = np.full(max_nodes, -2, dtype=np.int64)  # node index of parent
    queue = np.zeros(max_nodes, dtype=np.int64)
    s = seed
    wepoch = -1
    fepoch = 0
    n_nodes = 0
    steps = 0
    flag = FLAG_OK
    qh = 0
    qt = 0

    origin = pack(0, 0, 0, 0)
    if zero_wired:
        j, _f = _probe(fkeys, fstamp, fepoch, shift, origin)
        fkeys[j] = origin
        fstamp[j] = fepoch
        fvals[j] = 0
        npast[0] = 1
        ndepth[0] = 0
        nsite[0] = origin
        nparent[0] = -1
        n_nodes = 1
        queue[qt] = origin
        qt += 1
    else:
        wepoch += 1
        x0 = x1 = x2 = x3 = 0
        while True:
            s, z = sm64_next(s)
            d = z >> 61
            p = pack(x0, x1, x2, x3)
            j, _f = _probe(wkeys, wstamp, wepoch, shift, p)
            wkeys[j] = p
            wstamp[j] = wepoch
            wdirs[j] = d
            x0, x1, x2, x3 = step(x0, x1, x2, x3, d)
            steps += 1
            if steps > max_steps:
                flag = FLAG_STEPS
                break
            if chebyshev(x0, x1, x2, x3) > radius:
                break
        if flag == FLAG_OK:
            x0 = x1 = x2 = x3 = 0
            first = True
            while True:
                p = pack(x0, x1, x2, x3)
                j, found = _probe(fkeys, fstamp, fepoch, shift, p)
                if found:
                    break
                if n_nodes >= max_nodes:
                    flag = FLAG_TABLE_FULL
                    break
                fkeys[j] = p
                fstamp[j] = fepoch
                fvals[j] = n_nodes
                npast[n_nodes] = 1 if first else 0
                ndepth[n_nodes] = 0
                nsite[n_nodes] = p
                nparent[n_nodes] = -1
                n_nodes += 1
                if first:
                    queue[qt] = p
                    qt += 1
                    first = False
                jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
                if not foundw:
                    break
                x0, x1, x2, x3 = step(x0, x1, x2, x3, wdirs[jw])
                if chebyshev(x0, x1, x2, x3) > radius:
                    break

    while flag == FLAG_OK and qh < qt:
        xq = queue[qh]
        qh += 1
        bx0 = unpack0(xq)
        bx1 = unpack1(xq)
        bx2 = unpack2(xq)
        bx3 = unpack3(xq)
        jq, _fq = _probe(fkeys, fstamp, fepoch, shift, xq)
        for dd in range(8):
            y0, y1, y2, y3 = step(bx0, bx1, bx2, bx3, dd)
            if chebyshev(y0, y1, y2, y3) > radius:
                continue
            py = pack(y0, y1, y2, y3)
            jy, foundy = _probe(fkeys, fstamp, fepoch, shift, py)
            if foundy:
                continue
            wepoch += 1
            x0, x1, x2, x3 = y0, y1, y2, y3
            hit_forest = False
            hit_node = -1
            while True:
                p = pack(x0, x1, x2, x3)
                jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
                if foundf:
                    hit_forest = True
                    hit_node = fvals[jf]
                    break
                s, z = sm64_next(s)
                d = z >> 61
                jw, _fw = _probe(wkeys, wstamp, wepoch, shift, p)
                wkeys[jw] = p
                wstamp[jw] = wepoch
                wdirs[jw] = d
                x0, x1, x2, x3 = step(x0, x1, x2, x3, d)
                steps += 1
                if steps > max_steps:
                    flag = FLAG_STEPS
                    break
                if chebyshev(x0, x1, x2, x3) > radius:
                    break
            if flag != FLAG_OK:
                break
            st = npast[hit_node] if hit_forest else np.uint8(0)
            base_depth = ndepth[hit_node] if hit_forest else 0
            k = 0
            x0, x1, x2, x3 = y0, y1, y2, y3
            while True:
                p = pack(x0, x1, x2, x3)
                jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
                if foundf:
                    break
                k += 1
                jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
                x0, x1, x2, x3 = step(x0, x1, x2, x3, wdirs[jw])
                if chebyshev(x0, x1, x2, x3) > radius:
                    break
            # create nodes; parents chain toward the hit node
            node_ids = np.empty(k, dtype=np.int64)
            x0, x1, x2, x3 = y0, y1, y2, y3
            i = 0
            while i < k:
                p = pack(x0, x1, x2, x3)
                if n_nodes >= max_nodes or qt >= max_nodes:
                    flag = FLAG_TABLE_FULL
                    break
                jf, _ff = _probe(fkeys, fstamp, fepoch, shift, p)
                fkeys[jf] = p
                fstamp[jf] = fepoch
                fvals[jf] = n_nodes
                npast[n_nodes] = st
                ndepth[n_nodes] = (base_depth + (k - i)) if st else 0
                nsite[n_nodes] = p
                node_ids[i] = n_nodes
                n_nodes += 1
                if st:
                    queue[qt] = p
                    qt += 1
                i += 1
                jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
                x0, x1, x2, x3 = step(x0, x1, x2, x3, wdirs[jw])
            if flag != FLAG_OK:
                break
            for i in range(k):
                if i == k - 1:
                    nparent[node_ids[i]] = hit_node if hit_forest else -1
                else:
                    nparent[node_ids[i]] = node_ids[i + 1]
        if flag != FLAG_OK:
            break

    # extract the past subtree, reindexed
    past_count = 0
    remap = np.full(n_nodes, -1, dtype=np.int64)
    for i in range(n_nodes):
        if npast[i] == 1:
            remap[i] = past_count
            past_count += 1
    sites = np.empty(past_count, dtype=np.int64)
    parents = np.empty(past_count, dtype=np.int64)
    depths = np.empty(past_count, dtype=np.int64)
    for i in range(n_nodes):
        ri = remap[i]
        if ri < 0:
            continue
        sites[ri] = nsite[i]
        depths[ri] = ndepth[i]
        par = nparent[i]
        parents[ri] = remap[par] if par >= 0 else -1
    return sites, parents, depths, flag


# ---------------------------------------------------------------------------
# lazy Wilson parent-edge marginals for a requested site list
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_wilson_parents(seed, radius, targets, cap_pow, max_steps):
    """Parent directions of the target sites in the wired-box UST, sampled
    lazily (only the targets' futures are generated).

    Returns (dirs, flag): dirs[i] in 0..7 is the direction of the tree edge
    out of targets[i].
    """
    cap = 1 << cap_pow
    shift = 64 - cap_pow
    max_nodes = cap // 2
    fkeys = np.zeros(cap, dtype=np.int64)
    fdirs = np.zeros(cap, dtype=np.int8)
    fstamp = np.full(cap, -1, dtype=np.int32)
    wkeys = np.zeros(cap, dtype=np.int64)
    wdirs = np.zeros(cap, dtype=np.int8)
    wstamp = np.full(cap, -1, dtype=np.int32)
    s = seed
    fepoch = 0
    wepoch = -1
    steps = 0
    flag = FLAG_OK
    n_nodes = 0
    out = np.full(targets.shape[0], -1, dtype=np.int8)

    for ti in range(targets.shape[0]):
        pt = targets[ti]
        jf, foundf = _probe(fkeys, fstamp, fepoch, shift, pt)
        if foundf:
            out[ti] = fdirs[jf]
            continue
        y0 = unpack0(pt)
        y1 = unpack1(pt)
        y2 = unpack2(pt)
        y3 = unpack3(pt)
        wepoch += 1
        x0, x1, x2, x3 = y0, y1, y2, y3
        while True:
            p = pack(x0, x1, x2, x3)
            jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
            if foundf:
                break
            s, z = sm64_next(s)
            d = z >> 61
            jw, _fw = _probe(wkeys, wstamp, wepoch, shift, p)
            wkeys[jw] = p
            wstamp[jw] = wepoch
            wdirs[jw] = d
            x0, x1, x2, x3 = step(x0, x1, x2, x3, d)
            steps += 1
            if steps > max_steps:
                flag = FLAG_STEPS
                break
            if chebyshev(x0, x1, x2, x3) > radius:
                break
        if flag != FLAG_OK:
            break
        x0, x1, x2, x3 = y0, y1, y2, y3
        while True:
            p = pack(x0, x1, x2, x3)
            jf, foundf = _probe(fkeys, fstamp, fepoch, shift, p)
            if foundf:
                break
            if n_nodes >= max_nodes:
                flag = FLAG_TABLE_FULL
                break
            jw, foundw = _probe(wkeys, wstamp, wepoch, shift, p)
            d = wdirs[jw]
            fkeys[jf] = p
            fstamp[jf] = fepoch
            fdirs[jf] = d
            n_nodes += 1
            x0, x1, x2, x3 = step(x0, x1, x2, x3, d)
            if chebyshev(x0, x1, x2, x3) > radius:
                break
        if flag != FLAG_OK:
            break
        jf, foundf = _probe(fkeys, fstamp, fepoch, shift, pt)
        out[ti] = fdirs[jf]
    return out, flag


# ---------------------------------------------------------------------------
# tree-path containment in a box: is Gamma(0, x) inside Lambda_r?
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_gamma_in_box(seed, r, big_radius, xs, max_steps):
    """For each packed start x, sample the UST path Gamma(0, x) lazily and
    report whether it stays inside Lambda_r.

    The origin's future is sampled once per x (fresh tree per sample).  Walks
    truncate at Lambda_big_radius; truncation effects are a documented bias
    of order (r / big_radius)^2.  Returns an int8 indicator array, with -1
    for samples whose walk budget was exhausted.
    """
    out = np.full(xs.shape[0], -1, dtype=np.int8)
    s = seed
    nmax = 32 * (2 * big_radius + 1) * (2 * big_radius + 1)
    for i in range(xs.shape[0]):
        s, sub = sm64_next(s)
        # future of 0, truncated at the big box
        sp = sub
        x0 = x1 = x2 = x3 = 0
        est_len = nmax
        walk0 = np.empty((est_len + 1), dtype=np.int64)
        walk0[0] = pack(x0, x1, x2, x3)
        t = 0
        ok = True
        while chebyshev(x0, x1, x2, x3) <= big_radius:
            sp, z = sm64_next(sp)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            t += 1
            if t >= est_len:
                ok = False
                break
            walk0[t] = pack(x0, x1, x2, x3)
        if not ok:
            continue
        from ._kwalk import k_loop_erase  # local import keeps numba happy
        ell = k_loop_erase(walk0[: t + 1])
        spine = walk0[ell]
        # map: spine site -> index
        cap = 16
        while cap < 4 * spine.shape[0]:
            cap *= 2
        shift = 64
        c = cap
        while c > 1:
            c >>= 1
            shift -= 1
        keys = np.full(cap, -1, dtype=np.int64)
        vals = np.zeros(cap, dtype=np.int64)
        mask = cap - 1
        for q in range(spine.shape[0]):
            p = spine[q]
            j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
            while keys[j] != -1 and keys[j] != p:
                j = (j + 1) & mask
            if keys[j] == -1:
                keys[j] = p
                vals[j] = q
        # prefix max-norm of the spine
        pref = np.empty(spine.shape[0], dtype=np.int64)
        mx = 0
        for q in range(spine.shape[0]):
            p = spine[q]
            ce = chebyshev(unpack0(p), unpack1(p), unpack2(p), unpack3(p))
            if ce > mx:
                mx = ce
            pref[q] = mx
        # walk from x until the spine is hit (or truncation)
        px = xs[i]
        x0 = unpack0(px)
        x1 = unpack1(px)
        x2 = unpack2(px)
        x3 = unpack3(px)
        walk1 = np.empty(est_len + 1, dtype=np.int64)
        walk1[0] = pack(x0, x1, x2, x3)
        t = 0
        hit_idx = -1
        while True:
            p = pack(x0, x1, x2, x3)
            j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
            while keys[j] != -1 and keys[j] != p:
                j = (j + 1) & mask
            if keys[j] == p:
                hit_idx = vals[j]
                break
            sp, z = sm64_next(sp)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            t += 1
            if t >= est_len or chebyshev(x0, x1, x2, x3) > big_radius:
                break
            walk1[t] = pack(x0, x1, x2, x3)
        if hit_idx < 0:
            out[i] = 0  # path leaves the big box: certainly not inside Lambda_r
            continue
        # the branch from x to the spine, loop-erased
        ell1 = k_loop_erase(walk1[: t + 1])
        inside = pref[hit_idx] <= r
        if inside:
            for q in range(ell1.shape[0]):
                p = walk1[ell1[q]]
                if chebyshev(unpack0(p), unpack1(p), unpack2(p), unpack3(p)) > r:
                    inside = False
                    break
        out[i] = 1 if inside else 0
    return out
