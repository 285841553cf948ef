"""Windowed random-interlacement sampling on a finite set K, the
interlacement Aldous-Broder reconstruction, and the structural
past-evolution identity.

Trajectories hitting K arrive as a Poisson process of rate cap(K) per unit
time.  Each trajectory is stored in its K-entry parameterisation: the entry
point (harmonic measure from infinity), the forward walk, and the backward
walk conditioned never to re-enter K.  Both walk halves are truncated at a
declared radius; the induced bias is of order cap(K) / R_traj^2.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .capacity import CapacityEstimate, ExactEscapeField
from .lattice import Point, as_point, norm_inf
from .rng import RngStream
from .walk import LatticePath, StopTag, srw_until


@dataclass
class Trajectory:
    arrival_time: float
    entry: Point
    forward: LatticePath    # from the entry point, unconditioned
    backward: LatticePath   # from the entry point, avoiding K after step 0
    _entry_parents: Optional[dict] = field(default=None, repr=False)

    def k_entry_parents(self, k_set: frozenset) -> dict[Point, Point]:
        """For each K-site this trajectory visits, the site it came from at
        its first entry.

        The trajectory is traversed backward-part-reversed then forward; the
        backward half avoids K after its first step, so K entries happen at
        the entry point (preceded by the backward walk's first step) or at
        first forward visits."""
        if self._entry_parents is None:
            out: dict[Point, Point] = {}
            if len(self.backward) >= 1:
                out[self.entry] = self.backward[1]
            sites = self.forward.sites
            packed = self.forward.packed()
            from . import _kwalk
            k_packed = np.sort(_kwalk.pack_array(
                np.asarray(list(k_set), dtype=np.int64).reshape(-1, 4)))
            pos = np.searchsorted(k_packed, packed)
            pos[pos >= k_packed.shape[0]] = k_packed.shape[0] - 1
            matches = np.flatnonzero(k_packed[pos] == packed)
            for j in matches:
                if j == 0:
                    continue
                p = tuple(int(c) for c in sites[j])
                if p not in out:
                    out[p] = tuple(int(c) for c in sites[j - 1])
            self._entry_parents = out
        return self._entry_parents

    def visited_k_sites(self, k_set: frozenset) -> set[Point]:
        return set(self.k_entry_parents(k_set)) | {self.entry}


@dataclass
class WindowInterlacement:
    K: list[Point]
    t0: float
    t1: float
    cap_value: float
    truncation_radius: int
    trajectories: list[Trajectory] = field(default_factory=list)

    @property
    def k_set(self) -> frozenset:
        return frozenset(self.K)

    def arrivals(self) -> list[float]:
        return [tr.arrival_time for tr in self.trajectories]

    def hit_sites(self, s: float, t: float) -> set[Point]:
        """K-sites visited by trajectories with arrival in [s, t)."""
        out: set[Point] = set()
        kf = self.k_set
        for tr in self.trajectories:
            if s <= tr.arrival_time < t:
                out |= tr.visited_k_sites(kf)
        return out


def sample_interlacement(K: Iterable[Point], t0: float, t1: float,
                         cap_est: CapacityEstimate, rng: RngStream,
                         truncation_radius: Optional[int] = None,
                         entry_weights: Optional[np.ndarray] = None,
                         max_rejections: int = 10 ** 6) -> WindowInterlacement:
    """Sample the trajectories of the interlacement process hitting K during
    [t0, t1).

    Count ~ Poisson((t1-t0) cap(K)); entry points follow harmonic measure
    from infinity (per-site escape probability normalised); the backward walk
    is rejection-sampled to avoid re-entering K.
    """
    K = [as_point(p) for p in K]
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if truncation_radius is None:
        diam = max(norm_inf(tuple(a - b for a, b in zip(p, q)))
                   for p in K for q in K) if len(K) > 1 else 0
        truncation_radius = 8 * diam + 64
    gen = rng.generator
    n = int(gen.poisson((t1 - t0) * cap_est.value)) if t1 > t0 else 0
    window = WindowInterlacement(K, t0, t1, cap_est.value, truncation_radius)
    if n == 0:
        return window
    if entry_weights is None:
        fld = ExactEscapeField(K)
        entry_weights = np.array([fld.escape(p) for p in K])
    w = entry_weights / entry_weights.sum()
    arrivals = np.sort(gen.uniform(t0, t1, size=n))
    entries = gen.choice(len(K), size=n, p=w)
    horizon = 100 * truncation_radius ** 2
    from . import _kwalk
    from .lattice import pack_points
    kkeys, kshift = _kwalk.hashset_build(pack_points(K))
    for i in range(n):
        entry = K[int(entries[i])]
        sub = rng.substream(i)
        fwd, _ = srw_until(entry, (), truncation_radius, horizon, sub.substream(0))
        try:
            sites, _attempts = _kwalk.k_walk_avoid_set(
                sub.substream(1).kernel_seed(0), *entry, kkeys, kshift,
                truncation_radius, horizon, max_rejections)
        except ValueError as e:
            raise RuntimeError(f"backward-walk rejection budget exceeded: {e}")
        bwd = LatticePath(sites)
        window.trajectories.append(Trajectory(float(arrivals[i]), entry, fwd, bwd))
    return window


def aldous_broder_window(sample: WindowInterlacement, t: float
                         ) -> tuple[dict[Point, Point], list[Point]]:
    """Reversed first-entry edges after time t, for every site of K.

    Returns (parent map on K, uncovered sites).  parent[x] is the site the
    first post-t trajectory entering x came from (may lie outside K); the
    oriented forest edge is x -> parent[x].  Uncovered sites need the caller
    to extend the window and resample the suffix.
    """
    if not (sample.t0 <= t <= sample.t1):
        raise ValueError("t must lie inside the sampled window")
    kf = sample.k_set
    parent: dict[Point, Point] = {}
    uncovered = set(sample.K)
    idx = bisect.bisect_right([tr.arrival_time for tr in sample.trajectories], t)
    for tr in sample.trajectories[idx:]:
        if not uncovered:
            break
        for x, prev in tr.k_entry_parents(kf).items():
            if x in uncovered:
                parent[x] = prev
                uncovered.discard(x)
    return parent, sorted(uncovered)


def _past_in_k(parent: dict[Point, Point], v: Point, K: list[Point]) -> set[Point]:
    """Sites of K whose K-internal parent chain reaches v."""
    children: dict[Point, list[Point]] = {}
    kset = set(K)
    for x, p in parent.items():
        if p in kset:
            children.setdefault(p, []).append(x)
    out = {v}
    stack = [v]
    while stack:
        y = stack.pop()
        for c in children.get(y, ()):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def past_dynamics_check(sample: WindowInterlacement, s: float, t: float,
                        v: Point) -> bool:
    """Exact structural check of the backward evolution of the past.

    With v unhit during [s, t), the past of v at time s must equal the
    component of v in the past at time t after removing every site hit
    during [s, t).  Raises if the precondition (v unhit) fails.
    """
    v = as_point(v)
    if not (sample.t0 <= s < t <= sample.t1):
        raise ValueError("need t0 <= s < t <= t1")
    hit = sample.hit_sites(s, t)
    if v in hit:
        raise ValueError("precondition violated: v was hit during [s, t)")
    parent_s, unc_s = aldous_broder_window(sample, s)
    parent_t, unc_t = aldous_broder_window(sample, t)
    if unc_s or unc_t:
        raise RuntimeError(f"uncovered sites (extend the window): {unc_s or unc_t}")
    past_s = _past_in_k(parent_s, v, sample.K)
    past_t = _past_in_k(parent_t, v, sample.K)
    # component of v in past_t minus the hit sites, chains through past_t only
    component = {v}
    children: dict[Point, list[Point]] = {}
    for x in past_t:
        if x == v:
            continue
        p = parent_t[x]
        children.setdefault(p, []).append(x)
    stack = [v]
    while stack:
        y = stack.pop()
        for c in children.get(y, ()):
            if c not in hit and c not in component:
                component.add(c)
                stack.append(c)
    return past_s == component
