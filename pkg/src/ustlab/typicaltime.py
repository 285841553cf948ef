"""Escape probabilities along self-avoiding paths, the computable
typical-time functional, good/bad path classification, and the time radius
of a past.

For a path eta of length n, Esc_k(eta^i) is the probability that a fresh
k-step walk from eta_i avoids the earlier sites eta_0..eta_{i-1}.  The
typical-time surrogate is
    T~(eta) = sum_{i<n} A_i,   A_i = sum_{k=1}^n (1/k) Esc_k(eta^i)^2,
estimated on a dyadic k-grid and a strided i-grid with piecewise-constant
quadrature (full grids are quadratically expensive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kwalk
from .lattice import Estimate, Point, as_point
from .rng import RngStream
from .walk import LatticePath


@dataclass
class EscProfile:
    """Esc_k(eta^i) estimates on an (i, k) grid for one self-avoiding path."""

    eta_length: int
    i_grid: np.ndarray           # strictly increasing, within 0..eta_length-1
    k_grid: np.ndarray           # dyadic, within 1..eta_length (or kmax)
    esc: np.ndarray              # shape (len(i_grid), len(k_grid)), in [0, 1]
    n_walks: int

    def a_values(self, n: Optional[int] = None) -> np.ndarray:
        """A_i for each grid i: sum_{k=1}^n (1/k) Esc_k^2, k-piecewise-constant.

        n defaults to the path length; the harmonic weight of the dyadic cell
        [k_j, min(k_{j+1}, n+1)) multiplies Esc_{k_j}^2.
        """
        if n is None:
            n = self.eta_length
        weights = np.zeros(len(self.k_grid))
        for j, k in enumerate(self.k_grid):
            hi = self.k_grid[j + 1] if j + 1 < len(self.k_grid) else n + 1
            hi = min(hi, n + 1)
            if hi > k:
                ks = np.arange(k, hi, dtype=np.float64)
                weights[j] = (1.0 / ks).sum()
        return (self.esc ** 2 @ weights)


def esc_probability(eta: LatticePath, i: int, k: int, samples: int,
                    rng: RngStream) -> Estimate:
    """MC estimate of Esc_k(eta^i): a fresh k-step walk from eta_i avoids
    eta_0..eta_{i-1}."""
    if not (0 <= i <= len(eta)):
        raise ValueError("prefix index out of range")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not eta.is_self_avoiding():
        raise ValueError("eta must be self-avoiding")
    if i == 0:
        return Estimate(1.0, 0.0, {"trivial": True})
    blocked = eta.sites[:i]
    keys, shift = _kwalk.hashset_build(_kwalk.pack_array(blocked))
    times = _kwalk.k_esc_hit_times(rng.kernel_seed(0), keys, shift,
                                   *eta[i], k, samples)
    p = float((times > k).mean())
    return Estimate(p, math.sqrt(max(p * (1 - p), 1e-12) / samples),
                    {"i": i, "k": k, "samples": samples})


def esc_profile(eta: LatticePath, rng: RngStream, n_walks: int = 64,
                i_stride: Optional[int] = None,
                kmax: Optional[int] = None) -> EscProfile:
    """Esc estimates over the dyadic-k / strided-i grid.

    One batch of walks per grid i records first hitting times, giving Esc_k
    for every k at once.
    """
    n = len(eta)
    if n < 1:
        raise ValueError("eta must have at least one step")
    if not eta.is_self_avoiding():
        raise ValueError("eta must be self-avoiding")
    if i_stride is None:
        i_stride = max(1, n // 256)
    if kmax is None:
        kmax = n
    i_grid = np.arange(0, n, i_stride, dtype=np.int64)
    k_grid = [1]
    while k_grid[-1] * 2 <= kmax:
        k_grid.append(k_grid[-1] * 2)
    k_grid = np.asarray(k_grid, dtype=np.int64)
    esc = np.ones((len(i_grid), len(k_grid)))
    packed = eta.packed()
    for ii, i in enumerate(i_grid):
        if i == 0:
            continue  # nothing to avoid
        keys, shift = _kwalk.hashset_build(packed[:i])
        times = _kwalk.k_esc_hit_times(rng.substream(int(ii)).kernel_seed(0),
                                       keys, shift, *eta[int(i)], int(kmax),
                                       n_walks)
        esc[ii] = (times[None, :] > k_grid[:, None]).mean(axis=1)
    return EscProfile(n, i_grid, k_grid, esc, n_walks)


def t_tilde(eta: LatticePath, profile: EscProfile) -> float:
    """The typical-time surrogate: sum of A_i over i < |eta|, i-grid
    piecewise-constant."""
    if profile.eta_length != len(eta):
        raise ValueError("profile does not match the path length")
    n = len(eta)
    a = profile.a_values()
    total = 0.0
    for ii, i in enumerate(profile.i_grid):
        hi = profile.i_grid[ii + 1] if ii + 1 < len(profile.i_grid) else n
        total += a[ii] * (int(hi) - int(i))
    return float(total)


def classify_delta_good(eta: LatticePath, profile: EscProfile,
                        delta: float) -> bool:
    """True iff the large-A contribution is small:
    sum_i A_i 1(A_i >= (log n)^(1/3+delta)) <= delta n (natural log)."""
    n = len(eta)
    if n < 2:
        return True
    threshold = math.log(n) ** (1.0 / 3.0 + delta)
    a = profile.a_values()
    total = 0.0
    for ii, i in enumerate(profile.i_grid):
        hi = profile.i_grid[ii + 1] if ii + 1 < len(profile.i_grid) else n
        if a[ii] >= threshold:
            total += a[ii] * (int(hi) - int(i))
    return total <= delta * n


@dataclass
class TimeRadiusResult:
    value: float
    leaf_count: int
    intrinsic_radius: int
    volume: int


def time_radius(past_sites: np.ndarray, past_parents: np.ndarray,
                past_depths: np.ndarray, rng: RngStream,
                n_walks: int = 48) -> TimeRadiusResult:
    """max_x T~(path from the origin to x) over the past's leaves.

    The past tree comes from forest.sample_past_tree (packed sites, parent
    indices, depths).  Paths are oriented root -> leaf so Esc samples along
    shared prefixes are drawn once per tree vertex and reused by every leaf
    below it; per-vertex A values then depend only on the leaf depth through
    the harmonic cutoff.
    """
    m = past_sites.shape[0]
    if m <= 1:
        return TimeRadiusResult(0.0, 0, 0, max(m, 1))
    order = np.argsort(past_depths, kind="stable")
    children: dict[int, list[int]] = {}
    has_child = np.zeros(m, dtype=bool)
    for i in range(m):
        p = past_parents[i]
        if p >= 0:
            children.setdefault(int(p), []).append(i)
            has_child[p] = True
    rad = int(past_depths.max())
    kmax = max(1, rad)
    coords = _kwalk.unpack_array(past_sites)

    # per-vertex survival counts of fresh walks avoiding the root path
    k_grid = [1]
    while k_grid[-1] * 2 <= kmax:
        k_grid.append(k_grid[-1] * 2)
    k_arr = np.asarray(k_grid, dtype=np.int64)
    surv: dict[int, np.ndarray] = {}
    root = int(np.flatnonzero(past_parents == -1)[0])

    prefix: list[int] = []
    # iterative DFS keeping the packed prefix in sync
    order_stack = [(root, False)]
    while order_stack:
        node, done = order_stack.pop()
        if done:
            prefix.pop()
            continue
        # entering `node`: the blocked set is the path strictly before it
        if prefix:
            blocked = np.asarray(prefix, dtype=np.int64)
            keys, shift = _kwalk.hashset_build(blocked)
            times = _kwalk.k_esc_hit_times(
                rng.substream(node).kernel_seed(0), keys, shift,
                int(coords[node, 0]), int(coords[node, 1]),
                int(coords[node, 2]), int(coords[node, 3]), kmax, n_walks)
            surv[node] = (times[None, :] > k_arr[:, None]).sum(axis=1)
        else:
            surv[node] = np.full(len(k_grid), n_walks, dtype=np.int64)
        prefix.append(int(past_sites[node]))
        order_stack.append((node, True))
        for c in children.get(node, ()):  # leaves first is fine either way
            order_stack.append((c, False))

    # evaluate T~ per leaf: sum over ancestors of A_i(n = leaf depth)
    parents = past_parents
    best = 0.0
    leaves = [i for i in range(m) if not has_child[i]]
    for leaf in leaves:
        n = int(past_depths[leaf])
        if n < 1:
            continue
        weights = np.zeros(len(k_grid))
        for j, k in enumerate(k_grid):
            hi = min(k_grid[j + 1] if j + 1 < len(k_grid) else n + 1, n + 1)
            if hi > k:
                ks = np.arange(k, hi, dtype=np.float64)
                weights[j] = (1.0 / ks).sum()
        total = 0.0
        node = leaf
        while node != root:
            node = int(parents[node])
            esc = surv[node] / n_walks
            total += float(esc ** 2 @ weights)
        # the leaf itself contributes A at i = n-1... indices 0..n-1 are the
        # ancestors including the root, excluding the leaf
        best = max(best, total)
    return TimeRadiusResult(best, len(leaves), rad, m)
