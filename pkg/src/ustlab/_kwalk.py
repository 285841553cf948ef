"""numba kernels for Z^4 walk generation, loop erasure, and hit testing.

Sites are packed into int64 as four 16-bit fields (offset 32768); all kernels
guard the |coordinate| <= COORD_LIMIT range and raise on overflow.  Hash maps
are open-addressing with linear probing over power-of-two tables; erasure
stacks use lazy deletion (an entry is live only if it still points at a live
stack slot), which keeps the inner loop at one or two cache misses per step.

Kernel RNG is a counter-based splitmix64 sequence; seeds come from
RngStream.kernel_seed so that every (stream, salt) pair is reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

COORD_LIMIT = 32000
_OFF = 32768
_MASK16 = 0xFFFF
_GAMMA = 0x9E3779B97F4A7C15

# fixed direction order: +e0, -e0, +e1, -e1, +e2, -e2, +e3, -e3
DIRECTIONS = np.array(
    [[1, 0, 0, 0], [-1, 0, 0, 0],
     [0, 1, 0, 0], [0, -1, 0, 0],
     [0, 0, 1, 0], [0, 0, -1, 0],
     [0, 0, 0, 1], [0, 0, 0, -1]], dtype=np.int64)

# stop tags shared with walk.StopOutcome
TAG_HIT = 0
TAG_ESCAPED = 1
TAG_HORIZON = 2
TAG_KILLED = 3


@njit(cache=True, nogil=True, inline="always")
def sm64_next(s):
    """Advance splitmix64 state; return (state, output)."""
    s = (s + _GAMMA) & 0xFFFFFFFFFFFFFFFF
    z = s
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return s, z ^ (z >> 31)


@njit(cache=True, nogil=True, inline="always")
def sm64_uniform(s):
    s, z = sm64_next(s)
    return s, (z >> 11) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True, inline="always")
def pack(x0, x1, x2, x3):
    return ((x0 + _OFF) << 48) | ((x1 + _OFF) << 32) | ((x2 + _OFF) << 16) | (x3 + _OFF)


@njit(cache=True, nogil=True, inline="always")
def unpack0(p):
    return ((p >> 48) & _MASK16) - _OFF


@njit(cache=True, nogil=True, inline="always")
def unpack1(p):
    return ((p >> 32) & _MASK16) - _OFF


@njit(cache=True, nogil=True, inline="always")
def unpack2(p):
    return ((p >> 16) & _MASK16) - _OFF


@njit(cache=True, nogil=True, inline="always")
def unpack3(p):
    return (p & _MASK16) - _OFF


@njit(cache=True, nogil=True, inline="always")
def chebyshev(x0, x1, x2, x3):
    m = abs(x0)
    if abs(x1) > m:
        m = abs(x1)
    if abs(x2) > m:
        m = abs(x2)
    if abs(x3) > m:
        m = abs(x3)
    return m


@njit(cache=True, nogil=True, inline="always")
def step(x0, x1, x2, x3, d):
    if d == 0:
        x0 += 1
    elif d == 1:
        x0 -= 1
    elif d == 2:
        x1 += 1
    elif d == 3:
        x1 -= 1
    elif d == 4:
        x2 += 1
    elif d == 5:
        x2 -= 1
    elif d == 6:
        x3 += 1
    else:
        x3 -= 1
    return x0, x1, x2, x3


@njit(cache=True, nogil=True)
def pack_array(sites):
    n = sites.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        if chebyshev(sites[i, 0], sites[i, 1], sites[i, 2], sites[i, 3]) > COORD_LIMIT:
            raise ValueError("coordinate outside packable range")
        out[i] = pack(sites[i, 0], sites[i, 1], sites[i, 2], sites[i, 3])
    return out


@njit(cache=True, nogil=True)
def unpack_array(packed):
    n = packed.shape[0]
    out = np.empty((n, 4), dtype=np.int64)
    for i in range(n):
        p = packed[i]
        out[i, 0] = unpack0(p)
        out[i, 1] = unpack1(p)
        out[i, 2] = unpack2(p)
        out[i, 3] = unpack3(p)
    return out


# ---------------------------------------------------------------------------
# hash set over packed sites (build once, probe many)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def hashset_build(packed):
    cap = 16
    while cap < 4 * max(1, packed.shape[0]):
        cap *= 2
    shift = 64
    c = cap
    while c > 1:
        c >>= 1
        shift -= 1
    keys = np.full(cap, -1, dtype=np.int64)
    mask = cap - 1
    for i in range(packed.shape[0]):
        p = packed[i]
        j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
        while keys[j] != -1 and keys[j] != p:
            j = (j + 1) & mask
        keys[j] = p
    return keys, np.int64(shift)


@njit(cache=True, nogil=True, inline="always")
def hashset_contains(keys, shift, p):
    mask = keys.shape[0] - 1
    j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
    while True:
        k = keys[j]
        if k == p:
            return True
        if k == -1:
            return False
        j = (j + 1) & mask


# ---------------------------------------------------------------------------
# walk generation
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_srw(seed, sx0, sx1, sx2, sx3, steps):
    """Plain walk of exactly `steps` steps; returns (steps+1, 4) site array."""
    out = np.empty((steps + 1, 4), dtype=np.int64)
    x0, x1, x2, x3 = sx0, sx1, sx2, sx3
    out[0, 0] = x0
    out[0, 1] = x1
    out[0, 2] = x2
    out[0, 3] = x3
    s = seed
    for t in range(1, steps + 1):
        s, z = sm64_next(s)
        x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
        if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
            raise ValueError("walk left the packable coordinate range")
        out[t, 0] = x0
        out[t, 1] = x1
        out[t, 2] = x2
        out[t, 3] = x3
    return out


@njit(cache=True, nogil=True)
def k_srw_until(seed, sx0, sx1, sx2, sx3, target_keys, target_shift, has_target,
                escape_radius, horizon):
    """Walk stopped at target entry, box exit, or horizon, whichever first.

    Returns (sites, tag, stop_index).  Stopping is checked in the order
    hit / escape / horizon at each site, time 0 included for the target.
    The site buffer starts near the typical exit time and grows on demand.
    """
    cap = min(horizon + 1, 8 * (escape_radius + 1) * (escape_radius + 1) + 64)
    out = np.empty((cap, 4), dtype=np.int64)
    x0, x1, x2, x3 = sx0, sx1, sx2, sx3
    s = seed
    t = 0
    out[0, 0] = x0
    out[0, 1] = x1
    out[0, 2] = x2
    out[0, 3] = x3
    while True:
        if has_target and hashset_contains(target_keys, target_shift, pack(x0, x1, x2, x3)):
            return out[: t + 1], TAG_HIT, t
        if chebyshev(x0, x1, x2, x3) > escape_radius:
            return out[: t + 1], TAG_ESCAPED, t
        if t >= horizon:
            return out[: t + 1], TAG_HORIZON, t
        s, z = sm64_next(s)
        x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
        t += 1
        if t >= cap:
            grown = np.empty((cap * 4, 4), dtype=np.int64)
            grown[:cap] = out
            out = grown
            cap *= 4
        out[t, 0] = x0
        out[t, 1] = x1
        out[t, 2] = x2
        out[t, 3] = x3


@njit(cache=True, nogil=True)
def k_srw_geometric(seed, sx0, sx1, sx2, sx3, kill_prob, horizon):
    """Kill with probability kill_prob before each step; returns (sites, tag, T)."""
    out = np.empty((horizon + 1, 4), dtype=np.int64)
    x0, x1, x2, x3 = sx0, sx1, sx2, sx3
    out[0, 0] = x0
    out[0, 1] = x1
    out[0, 2] = x2
    out[0, 3] = x3
    s = seed
    t = 0
    while t < horizon:
        s, u = sm64_uniform(s)
        if u < kill_prob:
            return out[: t + 1], TAG_KILLED, t
        s, z = sm64_next(s)
        x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
        if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
            raise ValueError("walk left the packable coordinate range")
        t += 1
        out[t, 0] = x0
        out[t, 1] = x1
        out[t, 2] = x2
        out[t, 3] = x3
    return out, TAG_HORIZON, horizon


@njit(cache=True, nogil=True)
def k_srw_no_return(seed, sx0, sx1, sx2, sx3, steps, escape_radius, max_attempts):
    """Rejection-sample a walk that never revisits its start.

    The walk runs until min(steps, first exit from the escape box); any
    revisit to the start restarts the attempt.  Returns (sites, tag, n_attempts).
    """
    start = pack(sx0, sx1, sx2, sx3)
    out = np.empty((steps + 1, 4), dtype=np.int64)
    s = seed
    for attempt in range(1, max_attempts + 1):
        x0, x1, x2, x3 = sx0, sx1, sx2, sx3
        out[0, 0] = x0
        out[0, 1] = x1
        out[0, 2] = x2
        out[0, 3] = x3
        t = 0
        ok = True
        tag = TAG_HORIZON
        while t < steps:
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            t += 1
            if pack(x0, x1, x2, x3) == start:
                ok = False
                break
            out[t, 0] = x0
            out[t, 1] = x1
            out[t, 2] = x2
            out[t, 3] = x3
            if chebyshev(x0, x1, x2, x3) > escape_radius:
                tag = TAG_ESCAPED
                break
        if ok:
            return out[: t + 1], tag, attempt
    raise ValueError("rejection budget exceeded in no-return sampling")


# ---------------------------------------------------------------------------
# chronological loop erasure
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_loop_erase(packed):
    """Loop-erase a packed path; returns the surviving times ell.

    ell[i] is the last time the walk sits at the i-th point of the erasure,
    plus one, per the chronological recursion; the erased path itself is
    sites[ell].  O(n) via an open-addressing last-position map with lazy
    deletion against the stack.
    """
    n = packed.shape[0]
    cap = 16
    while cap < 2 * n:
        cap *= 2
    shift = 64
    c = cap
    while c > 1:
        c >>= 1
        shift -= 1
    mask = cap - 1
    tab = np.full(2 * cap, -1, dtype=np.int64)  # interleaved key, stack index
    stack = np.empty(n, dtype=np.int64)
    ltime = np.empty(n, dtype=np.int64)

    p = packed[0]
    top = 0
    stack[0] = p
    ltime[0] = 0
    j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
    tab[2 * j] = p
    tab[2 * j + 1] = 0

    for t in range(1, n):
        p = packed[t]
        j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
        while True:
            k = tab[2 * j]
            if k == p:
                v = tab[2 * j + 1]
                if v <= top and stack[v] == p:
                    top = v  # pop the loop
                else:
                    top += 1  # stale slot from an erased segment
                    stack[top] = p
                    tab[2 * j + 1] = top
                ltime[top] = t
                break
            if k == -1:
                tab[2 * j] = p
                top += 1
                stack[top] = p
                tab[2 * j + 1] = top
                ltime[top] = t
                break
            j = (j + 1) & mask

    ell = np.empty(top + 1, dtype=np.int64)
    ell[0] = 0
    for i in range(1, top + 1):
        ell[i] = ltime[i - 1] + 1
    return ell


@njit(cache=True, nogil=True)
def k_gen_and_erase(seed, n_steps):
    """Generate an n-step walk from 0 and return (packed LE sites, ell).

    Fused path for scaling experiments: the raw path is never materialised.
    """
    cap = 16
    while cap < 2 * (n_steps + 1):
        cap *= 2
    shift = 64
    c = cap
    while c > 1:
        c >>= 1
        shift -= 1
    mask = cap - 1
    tab = np.full(2 * cap, -1, dtype=np.int64)
    stack = np.empty(n_steps + 1, dtype=np.int64)
    ltime = np.empty(n_steps + 1, dtype=np.int64)

    x0 = x1 = x2 = x3 = 0
    p = pack(x0, x1, x2, x3)
    top = 0
    stack[0] = p
    ltime[0] = 0
    j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
    tab[2 * j] = p
    tab[2 * j + 1] = 0
    s = seed
    for t in range(1, n_steps + 1):
        s, z = sm64_next(s)
        x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
        if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
            raise ValueError("walk left the packable coordinate range")
        p = pack(x0, x1, x2, x3)
        j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
        while True:
            k = tab[2 * j]
            if k == p:
                v = tab[2 * j + 1]
                if v <= top and stack[v] == p:
                    top = v
                else:
                    top += 1
                    stack[top] = p
                    tab[2 * j + 1] = top
                ltime[top] = t
                break
            if k == -1:
                tab[2 * j] = p
                top += 1
                stack[top] = p
                tab[2 * j + 1] = top
                ltime[top] = t
                break
            j = (j + 1) & mask

    ell = np.empty(top + 1, dtype=np.int64)
    ell[0] = 0
    for i in range(1, top + 1):
        ell[i] = ltime[i - 1] + 1
    return stack[: top + 1].copy(), ell


@njit(cache=True, nogil=True)
def k_rho_batch(seed, n, horizon, n_samples):
    """rho_n for n_samples independent walks run to `horizon` >= n steps.

    rho_n = max{ i : ell_i <= n } computed from the erasure at the horizon.
    """
    out = np.empty(n_samples, dtype=np.int64)
    s = seed
    for rep in range(n_samples):
        s, sub = sm64_next(s)
        _stack, ell = k_gen_and_erase(sub, horizon)
        # binary search: last index with ell[i] <= n
        lo = 0
        hi = ell.shape[0] - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if ell[mid] <= n:
                lo = mid
            else:
                hi = mid - 1
        out[rep] = lo
    return out


# ---------------------------------------------------------------------------
# escape / hitting walks for capacity estimation
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_escape_counts(seed, set_keys, set_shift, starts, radius1, radius2, horizon):
    """First-return-to-A test walks with two truncation radii.

    For each packed start x (a site of A), run a fresh walk; record whether it
    reaches ||.||_inf > radius1 (and > radius2) before re-entering A at a
    positive time.  Returns (escaped_r1, escaped_r2) counts.
    """
    esc1 = 0
    esc2 = 0
    s = seed
    for i in range(starts.shape[0]):
        p = starts[i]
        x0 = unpack0(p)
        x1 = unpack1(p)
        x2 = unpack2(p)
        x3 = unpack3(p)
        passed1 = False
        for t in range(1, horizon + 1):
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            r = chebyshev(x0, x1, x2, x3)
            if not passed1 and r > radius1:
                passed1 = True
                esc1 += 1
            if r > radius2:
                esc2 += 1
                break
            if hashset_contains(set_keys, set_shift, pack(x0, x1, x2, x3)):
                break
    return esc1, esc2


@njit(cache=True, nogil=True)
def k_hit_indicator(seed, set_keys, set_shift, sx0, sx1, sx2, sx3,
                    max_steps, start_time_one):
    """Does a walk hit the set within max_steps?  Returns (hit, hit_time).

    start_time_one skips the time-0 membership test (tau^+ convention).
    """
    x0, x1, x2, x3 = sx0, sx1, sx2, sx3
    if not start_time_one:
        if hashset_contains(set_keys, set_shift, pack(x0, x1, x2, x3)):
            return True, 0
    s = seed
    for t in range(1, max_steps + 1):
        s, z = sm64_next(s)
        x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
        if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
            return False, t
        if hashset_contains(set_keys, set_shift, pack(x0, x1, x2, x3)):
            return True, t
    return False, max_steps


@njit(cache=True, nogil=True)
def k_green_visits(seed, target_keys, target_shift, orbit_size, horizon, n_samples):
    """Visit counts to a symmetry orbit by walks from 0 over a fixed horizon.

    Returns (sum of per-walk visit counts, sum of squares); dividing by
    orbit_size turns orbit visits into an estimate of G at one representative.
    """
    total = 0.0
    total_sq = 0.0
    s = seed
    for rep in range(n_samples):
        x0 = x1 = x2 = x3 = 0
        visits = 0
        if hashset_contains(target_keys, target_shift, pack(x0, x1, x2, x3)):
            visits += 1
        for t in range(horizon):
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
                break
            if hashset_contains(target_keys, target_shift, pack(x0, x1, x2, x3)):
                visits += 1
        v = visits / orbit_size
        total += v
        total_sq += v * v
    return total, total_sq


# ---------------------------------------------------------------------------
# non-intersection of a fresh walk with a loop erasure
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_nonintersection_batch(seed, n, m, p_walks, n_samples):
    """Estimate E[ P(S(0,m] avoids LE(Y^n) | Y)^p ] by indicator products.

    For each of n_samples erasures LE(Y^n), run p_walks independent fresh
    walks from 0 and multiply the avoidance indicators (time 0 excluded).
    Returns the sum of products.
    """
    hits = 0.0
    s = seed
    for rep in range(n_samples):
        s, sub = sm64_next(s)
        stack, _ell = k_gen_and_erase(sub, n)
        keys, shift = hashset_build(stack)
        prod = 1.0
        for w in range(p_walks):
            x0 = x1 = x2 = x3 = 0
            avoided = 1.0
            for t in range(m):
                s, z = sm64_next(s)
                x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
                if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
                    break
                if hashset_contains(keys, shift, pack(x0, x1, x2, x3)):
                    avoided = 0.0
                    break
            prod *= avoided
            if prod == 0.0:
                break
        hits += prod
    return hits


# ---------------------------------------------------------------------------
# escape profile walks (first hitting time of a path prefix)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def k_walk_avoid_set(seed, sx0, sx1, sx2, sx3, set_keys, set_shift,
                     escape_radius, horizon, max_attempts):
    """Rejection-sample a walk from x avoiding the set at times >= 1, run
    until it leaves the escape box.  Returns (sites, attempts)."""
    cap = 8 * (escape_radius + 1) * (escape_radius + 1) + 64
    out = np.empty((cap, 4), dtype=np.int64)
    s = seed
    for attempt in range(1, max_attempts + 1):
        x0, x1, x2, x3 = sx0, sx1, sx2, sx3
        out[0, 0] = x0
        out[0, 1] = x1
        out[0, 2] = x2
        out[0, 3] = x3
        t = 0
        ok = True
        while True:
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            t += 1
            if hashset_contains(set_keys, set_shift, pack(x0, x1, x2, x3)):
                ok = False
                break
            if t >= cap:
                grown = np.empty((cap * 4, 4), dtype=np.int64)
                grown[:cap] = out
                out = grown
                cap *= 4
            out[t, 0] = x0
            out[t, 1] = x1
            out[t, 2] = x2
            out[t, 3] = x3
            if chebyshev(x0, x1, x2, x3) > escape_radius:
                break
            if t >= horizon:
                break
        if ok:
            return out[: t + 1], attempt
    raise ValueError("rejection budget exceeded for the avoiding walk")


@njit(cache=True, nogil=True)
def k_box_intersection(seed, r, exit_radius, n_samples):
    """Intersections of two walks inside Lambda_r.

    X starts uniform in Lambda_r, Y at the origin; both walks run until they
    leave Lambda_exit_radius.  Per sample, counts
    I_r = #{(i, j): X_i = Y_j in Lambda_r} through a visit-count hash of Y's
    Lambda_r trace.  Returns an int64 array of I_r values.
    """
    out = np.empty(n_samples, dtype=np.int64)
    cap = 1
    expected = 12 * (r + 1) * (r + 1)  # Lambda_r visits of one walk, roughly
    while cap < 4 * expected:
        cap *= 2
    shift = 64
    c = cap
    while c > 1:
        c >>= 1
        shift -= 1
    mask = cap - 1
    keys = np.zeros(cap, dtype=np.int64)
    counts = np.zeros(cap, dtype=np.int64)
    stamps = np.full(cap, -1, dtype=np.int64)
    s = seed
    for rep in range(n_samples):
        # Y walk from 0: record Lambda_r visit counts
        x0 = x1 = x2 = x3 = 0
        overflow = False
        while True:
            if chebyshev(x0, x1, x2, x3) <= r:
                p = pack(x0, x1, x2, x3)
                j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
                probes = 0
                while stamps[j] == rep and keys[j] != p:
                    j = (j + 1) & mask
                    probes += 1
                    if probes > cap:
                        overflow = True
                        break
                if overflow:
                    break
                if stamps[j] != rep:
                    stamps[j] = rep
                    keys[j] = p
                    counts[j] = 1
                else:
                    counts[j] += 1
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            if chebyshev(x0, x1, x2, x3) > exit_radius:
                break
        if overflow:
            out[rep] = -1
            continue
        # X walk from a uniform point of Lambda_r
        s, z = sm64_next(s)
        x0 = (z % (2 * r + 1)) - r
        s, z = sm64_next(s)
        x1 = (z % (2 * r + 1)) - r
        s, z = sm64_next(s)
        x2 = (z % (2 * r + 1)) - r
        s, z = sm64_next(s)
        x3 = (z % (2 * r + 1)) - r
        total = 0
        while True:
            if chebyshev(x0, x1, x2, x3) <= r:
                p = pack(x0, x1, x2, x3)
                j = ((p * _GAMMA) & 0xFFFFFFFFFFFFFFFF) >> shift
                while stamps[j] == rep and keys[j] != p:
                    j = (j + 1) & mask
                if stamps[j] == rep:
                    total += counts[j]
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            if chebyshev(x0, x1, x2, x3) > exit_radius:
                break
        out[rep] = total
    return out


@njit(cache=True, nogil=True)
def k_hit_and_le_stats(seed, sx0, sx1, sx2, sx3, horizon, escape_radius,
                       n_samples):
    """Walks from x run until they hit the origin, leave the escape box, or
    reach the horizon.

    Returns (hit flags, hitting times, erased-path lengths |LE(X^tau0)|),
    with -1 entries for walks that never hit.  Escape truncation bounds the
    per-walk cost; the neglected return-after-escape mass is of order
    G(escape_radius)/G(0).
    """
    hits = np.zeros(n_samples, dtype=np.int64)
    taus = np.full(n_samples, -1, dtype=np.int64)
    lelen = np.full(n_samples, -1, dtype=np.int64)
    walk = np.empty(horizon + 1, dtype=np.int64)
    s = seed
    for rep in range(n_samples):
        s, sub = sm64_next(s)
        sp = sub
        x0, x1, x2, x3 = sx0, sx1, sx2, sx3
        walk[0] = pack(x0, x1, x2, x3)
        t_hit = -1
        for t in range(1, horizon + 1):
            sp, z = sm64_next(sp)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            walk[t] = pack(x0, x1, x2, x3)
            if x0 == 0 and x1 == 0 and x2 == 0 and x3 == 0:
                t_hit = t
                break
            if chebyshev(x0, x1, x2, x3) > escape_radius:
                break
        if t_hit > 0:
            hits[rep] = 1
            taus[rep] = t_hit
            ell = k_loop_erase(walk[: t_hit + 1])
            lelen[rep] = ell.shape[0] - 1
    return hits, taus, lelen


@njit(cache=True, nogil=True)
def k_esc_hit_times(seed, blocked_keys, blocked_shift, sx0, sx1, sx2, sx3,
                    kmax, n_walks):
    """First time each of n_walks fresh walks enters the blocked set.

    Returns hit times in [1, kmax]; kmax + 1 encodes survival past kmax.
    Esc_k is then the empirical fraction of times > k, for every k at once.
    """
    out = np.empty(n_walks, dtype=np.int64)
    s = seed
    for w in range(n_walks):
        x0, x1, x2, x3 = sx0, sx1, sx2, sx3
        t_hit = kmax + 1
        for t in range(1, kmax + 1):
            s, z = sm64_next(s)
            x0, x1, x2, x3 = step(x0, x1, x2, x3, z >> 61)
            if chebyshev(x0, x1, x2, x3) > COORD_LIMIT:
                break
            if hashset_contains(blocked_keys, blocked_shift, pack(x0, x1, x2, x3)):
                t_hit = t
                break
        out[w] = t_hit
    return out
