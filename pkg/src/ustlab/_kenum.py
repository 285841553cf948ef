"""Exhaustive 8^L walk enumeration for the exact LERW identity oracles.

Counts are exact integers: every length-n walk has probability 8^-n, so
comparing integer counts at equal n compares probabilities with rational
weights and no float drift.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._kwalk import pack, step

# avoid-set modes
AVOID_NONE = 0
AVOID_POSITIVE = 1   # tau_A^+ > n: no visit at times 1..n
AVOID_WEAK = 2       # tau_A >= n: no visit at times 0..n-1

# loop-erasure condition modes
LE_NONE = 0
LE_EXACT = 1         # LE(walk) equals eta exactly
LE_PREFIX = 2        # LE(walk)[0, |eta|] equals eta


@njit(cache=True, nogil=True, inline="always")
def _in_set(arr, n, p):
    for i in range(n):
        if arr[i] == p:
            return True
    return False


@njit(cache=True, nogil=True)
def k_le_length_at_hit(sx0, sx1, sx2, sx3, max_len):
    """Exact conditional erased-path-length distribution at the origin hit.

    Enumerates all walks from x that hit 0 within max_len steps (pruning at
    the first hit) and accumulates, per hitting length n, the count of walks
    and the summed erased length |LE(X^tau0)| weighted 8^-n at evaluation
    time.  Returns (hit_counts[n], le_sums[n]) as exact integers.
    """
    hit_counts = np.zeros(max_len + 1, dtype=np.int64)
    le_sums = np.zeros(max_len + 1, dtype=np.int64)
    posx = np.zeros((max_len + 1, 4), dtype=np.int64)
    choice = np.zeros(max_len + 1, dtype=np.int64)
    stacks = np.zeros((max_len + 1, max_len + 1), dtype=np.int64)
    tops = np.zeros(max_len + 1, dtype=np.int64)
    posx[0, 0] = sx0
    posx[0, 1] = sx1
    posx[0, 2] = sx2
    posx[0, 3] = sx3
    stacks[0, 0] = pack(sx0, sx1, sx2, sx3)
    tops[0] = 0
    origin = pack(0, 0, 0, 0)
    depth = 0
    while True:
        if depth == max_len or choice[depth] == 8:
            if depth == 0:
                break
            depth -= 1
            continue
        d = choice[depth]
        choice[depth] += 1
        x0, x1, x2, x3 = step(posx[depth, 0], posx[depth, 1],
                              posx[depth, 2], posx[depth, 3], d)
        nd = depth + 1
        p = pack(x0, x1, x2, x3)
        t = tops[depth]
        if p == origin:
            # walk stops here; erased length = stack length after the hit
            found = -1
            for i in range(t + 1):
                if stacks[depth, i] == p:
                    found = i
                    break
            le_len = found if found >= 0 else t + 1
            hit_counts[nd] += 1
            le_sums[nd] += le_len
            continue  # hitting walks are not extended
        posx[nd, 0] = x0
        posx[nd, 1] = x1
        posx[nd, 2] = x2
        posx[nd, 3] = x3
        for i in range(t + 1):
            stacks[nd, i] = stacks[depth, i]
        found = -1
        for i in range(t + 1):
            if stacks[nd, i] == p:
                found = i
                break
        if found >= 0:
            tops[nd] = found
        else:
            tops[nd] = t + 1
            stacks[nd, t + 1] = p
        choice[nd] = 0
        depth = nd
    return hit_counts, le_sums


@njit(cache=True, nogil=True)
def k_enumerate(sx0, sx1, sx2, sx3, max_len, avoid, avoid_mode, eta, le_mode):
    """Count walks of every length n <= max_len satisfying the conditions.

    avoid: packed site array (the set A); eta: packed self-avoiding path.
    Returns int64 counts[n] for n = 0..max_len.  DFS over the 8^max_len tree
    with per-depth loop-erasure snapshots; subtrees that can no longer
    satisfy the avoid condition are pruned.
    """
    counts = np.zeros(max_len + 1, dtype=np.int64)
    n_eta = eta.shape[0]
    n_avoid = avoid.shape[0]

    # per-depth state
    posx = np.zeros((max_len + 1, 4), dtype=np.int64)
    choice = np.zeros(max_len + 1, dtype=np.int64)
    stacks = np.zeros((max_len + 1, max_len + 1), dtype=np.int64)
    tops = np.zeros(max_len + 1, dtype=np.int64)

    posx[0, 0] = sx0
    posx[0, 1] = sx1
    posx[0, 2] = sx2
    posx[0, 3] = sx3
    p0 = pack(sx0, sx1, sx2, sx3)
    stacks[0, 0] = p0
    tops[0] = 0

    # evaluate the node at depth 0
    ok0 = True
    if avoid_mode == AVOID_WEAK:
        pass  # times 0..-1: vacuous
    if le_mode == LE_EXACT:
        ok0 = n_eta == 1 and eta[0] == p0
    elif le_mode == LE_PREFIX:
        # the length-0 walk has a 0-step erasure: prefix needs n_eta <= 1
        ok0 = n_eta <= 1 and (n_eta == 0 or eta[0] == p0)
    if ok0:
        counts[0] += 1

    # prune flag per depth: whether deeper nodes can still satisfy avoidance
    dead = np.zeros(max_len + 1, dtype=np.uint8)
    if avoid_mode == AVOID_WEAK and _in_set(avoid, n_avoid, p0):
        dead[0] = 1  # visiting A at time 0 kills all lengths >= 1

    depth = 0
    while True:
        if depth == max_len or dead[depth] == 1 or choice[depth] == 8:
            if depth == 0:
                break
            depth -= 1
            continue
        d = choice[depth]
        choice[depth] += 1
        x0, x1, x2, x3 = step(posx[depth, 0], posx[depth, 1],
                              posx[depth, 2], posx[depth, 3], d)
        nd = depth + 1
        posx[nd, 0] = x0
        posx[nd, 1] = x1
        posx[nd, 2] = x2
        posx[nd, 3] = x3
        p = pack(x0, x1, x2, x3)

        in_a = n_avoid > 0 and _in_set(avoid, n_avoid, p)
        node_ok = True
        child_dead = False
        if avoid_mode == AVOID_POSITIVE and in_a:
            # visit at positive time: this node and all deeper fail
            continue
        if avoid_mode == AVOID_WEAK and in_a:
            child_dead = True  # visit at time nd allowed for length nd only

        # update the loop-erasure stack
        t = tops[depth]
        for i in range(t + 1):
            stacks[nd, i] = stacks[depth, i]
        found = -1
        for i in range(t + 1):
            if stacks[nd, i] == p:
                found = i
                break
        if found >= 0:
            tops[nd] = found
        else:
            tops[nd] = t + 1
            stacks[nd, t + 1] = p

        if le_mode == LE_EXACT:
            node_ok = tops[nd] == n_eta - 1
            if node_ok:
                for i in range(n_eta):
                    if stacks[nd, i] != eta[i]:
                        node_ok = False
                        break
        elif le_mode == LE_PREFIX:
            node_ok = tops[nd] >= n_eta - 1
            if node_ok:
                for i in range(n_eta):
                    if stacks[nd, i] != eta[i]:
                        node_ok = False
                        break

        if node_ok:
            counts[nd] += 1
        dead[nd] = 1 if child_dead else 0
        choice[nd] = 0
        depth = nd

    return counts
