"""numba kernels for sandpile stabilization and the burning bijection on
wired 4d cuboids (threshold 2d = 8; grains crossing the boundary are lost).

Regions are dense row-major arrays over dims (l0, l1, l2, l3); the direction
order (+e0, -e0, +e1, -e1, +e2, -e2, +e3, -e3) matches lattice.DIRECTIONS.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _coords(idx, l1, l2, l3):
    i3 = idx % l3
    idx //= l3
    i2 = idx % l2
    idx //= l2
    i1 = idx % l1
    i0 = idx // l1
    return i0, i1, i2, i3


@njit(cache=True, nogil=True, inline="always")
def _move(i0, i1, i2, i3, d):
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
    return i0, i1, i2, i3


@njit(cache=True, nogil=True)
def k_stabilize(heights, l0, l1, l2, l3):
    """Topple until stable; batched (height // 8 at a time), FIFO order.

    Mutates heights in place and returns the odometer (per-site toppling
    counts)."""
    N = heights.shape[0]
    odo = np.zeros(N, dtype=np.int64)
    qcap = N + 1
    queue = np.empty(qcap, dtype=np.int64)
    in_queue = np.zeros(N, dtype=np.uint8)
    qh = 0
    qt = 0
    for i in range(N):
        if heights[i] >= 8:
            queue[qt] = i
            qt = (qt + 1) % qcap
            in_queue[i] = 1
    while qh != qt:
        idx = queue[qh]
        qh = (qh + 1) % qcap
        in_queue[idx] = 0
        h = heights[idx]
        if h < 8:
            continue
        t = h >> 3
        heights[idx] = h - 8 * t
        odo[idx] += t
        i0, i1, i2, i3 = _coords(idx, l1, l2, l3)
        for d in range(8):
            j0, j1, j2, j3 = _move(i0, i1, i2, i3, d)
            if (j0 < 0 or j0 >= l0 or j1 < 0 or j1 >= l1
                    or j2 < 0 or j2 >= l2 or j3 < 0 or j3 >= l3):
                continue  # grain lost to the sink
            nb = ((j0 * l1 + j1) * l2 + j2) * l3 + j3
            heights[nb] += t
            if heights[nb] >= 8 and in_queue[nb] == 0:
                queue[qt] = nb
                qt = (qt + 1) % qcap
                in_queue[nb] = 1
    return odo


@njit(cache=True, nogil=True)
def k_tree_depths(parent_dir, l0, l1, l2, l3):
    """Tree distance to the sink for every site of a spanning forest."""
    N = parent_dir.shape[0]
    depth = np.full(N, -1, dtype=np.int64)
    chain = np.empty(N + 1, dtype=np.int64)
    for start in range(N):
        if depth[start] >= 0:
            continue
        idx = start
        m = 0
        d_found = 0
        while True:
            chain[m] = idx
            m += 1
            dd = parent_dir[idx]
            i0, i1, i2, i3 = _coords(idx, l1, l2, l3)
            i0, i1, i2, i3 = _move(i0, i1, i2, i3, dd)
            if (i0 < 0 or i0 >= l0 or i1 < 0 or i1 >= l1
                    or i2 < 0 or i2 >= l2 or i3 < 0 or i3 >= l3):
                d_found = 0  # parent is the sink (depth 0)
                break
            idx = ((i0 * l1 + i1) * l2 + i2) * l3 + i3
            if depth[idx] >= 0:
                d_found = depth[idx]
                break
            if m > N:
                raise RuntimeError("cycle in parent structure")
        for q in range(m - 1, -1, -1):
            d_found += 1
            depth[chain[q]] = d_found
    return depth


@njit(cache=True, nogil=True)
def k_tree_to_config(parent_dir, l0, l1, l2, l3):
    """Burning bijection, tree side: heights from parent edges.

    With b(x) the tree depth (sink = 0), a site burning in round b(x) sees
    U = #edges to {b >= b(x)} unburnt; its height is U plus the position of
    its parent edge among the edges to round-(b(x)-1) vertices, in the fixed
    direction order."""
    N = parent_dir.shape[0]
    depth = k_tree_depths(parent_dir, l0, l1, l2, l3)
    heights = np.empty(N, dtype=np.int64)
    for idx in range(N):
        b = depth[idx]
        i0, i1, i2, i3 = _coords(idx, l1, l2, l3)
        u = 0
        offset = 0
        pd = parent_dir[idx]
        for d in range(8):
            j0, j1, j2, j3 = _move(i0, i1, i2, i3, d)
            outside = (j0 < 0 or j0 >= l0 or j1 < 0 or j1 >= l1
                       or j2 < 0 or j2 >= l2 or j3 < 0 or j3 >= l3)
            nb_depth = 0 if outside else depth[((j0 * l1 + j1) * l2 + j2) * l3 + j3]
            if nb_depth >= b:
                u += 1
            if nb_depth == b - 1 and d < pd:
                offset += 1
        heights[idx] = u + offset
    return heights


@njit(cache=True, nogil=True)
def k_config_to_tree(heights, l0, l1, l2, l3):
    """Burning bijection, sandpile side: parent edges from heights.

    Round-synchronous burning from the sink: x burns in round k iff
    h(x) >= #edges to vertices unburnt after round k-1.  Returns
    (parent_dir, recurrent flag); parent_dir is only meaningful when the
    configuration is recurrent (everything burns)."""
    N = heights.shape[0]
    u = np.empty(N, dtype=np.int64)
    burnt_round = np.full(N, -1, dtype=np.int64)
    parent = np.full(N, -1, dtype=np.int8)
    cur = np.empty(N, dtype=np.int64)
    nxt = np.empty(N, dtype=np.int64)
    pending = np.zeros(N, dtype=np.uint8)

    n_cur = 0
    for idx in range(N):
        i0, i1, i2, i3 = _coords(idx, l1, l2, l3)
        deg_in = 0
        for d in range(8):
            j0, j1, j2, j3 = _move(i0, i1, i2, i3, d)
            if not (j0 < 0 or j0 >= l0 or j1 < 0 or j1 >= l1
                    or j2 < 0 or j2 >= l2 or j3 < 0 or j3 >= l3):
                deg_in += 1
        u[idx] = deg_in
        if heights[idx] >= deg_in:
            cur[n_cur] = idx
            n_cur += 1
            pending[idx] = 1
    n_burnt = 0
    k = 1
    while n_cur > 0:
        for q in range(n_cur):
            burnt_round[cur[q]] = k
        n_nxt = 0
        for q in range(n_cur):
            idx = cur[q]
            n_burnt += 1
            i0, i1, i2, i3 = _coords(idx, l1, l2, l3)
            # parent edge: offset h - U among edges to round-(k-1) vertices
            offset = heights[idx] - u[idx]
            for d in range(8):
                j0, j1, j2, j3 = _move(i0, i1, i2, i3, d)
                outside = (j0 < 0 or j0 >= l0 or j1 < 0 or j1 >= l1
                           or j2 < 0 or j2 >= l2 or j3 < 0 or j3 >= l3)
                if outside:
                    prev_round = k == 1
                else:
                    nb = ((j0 * l1 + j1) * l2 + j2) * l3 + j3
                    prev_round = burnt_round[nb] == k - 1
                    if k == 1:
                        prev_round = False  # round 0 is the sink only
                if prev_round:
                    if offset == 0:
                        parent[idx] = d
                        break
                    offset -= 1
            # update unburnt-degrees of in-box neighbours
            for d in range(8):
                j0, j1, j2, j3 = _move(i0, i1, i2, i3, d)
                if (j0 < 0 or j0 >= l0 or j1 < 0 or j1 >= l1
                        or j2 < 0 or j2 >= l2 or j3 < 0 or j3 >= l3):
                    continue
                nb = ((j0 * l1 + j1) * l2 + j2) * l3 + j3
                if burnt_round[nb] < 0:
                    u[nb] -= 1
                    if pending[nb] == 0 and heights[nb] >= u[nb]:
                        nxt[n_nxt] = nb
                        n_nxt += 1
                        pending[nb] = 1
        for q in range(n_nxt):
            cur[q] = nxt[q]
        n_cur = n_nxt
        k += 1
    return parent, n_burnt == N
