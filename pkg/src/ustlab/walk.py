"""Simple random walk generation in every stopping regime the experiments use:
fixed horizon, hitting times with escape truncation, geometric killing, and
conditioned-no-return via rejection."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import _kwalk
from .lattice import Point, as_point, norm_inf, pack_points
from .rng import RngStream


class StopTag(enum.Enum):
    HIT_TARGET = "hit_target"
    ESCAPED = "escaped"
    HORIZON_REACHED = "horizon_reached"
    GEOMETRIC_KILL = "geometric_kill"


_TAG_BY_CODE = {
    _kwalk.TAG_HIT: StopTag.HIT_TARGET,
    _kwalk.TAG_ESCAPED: StopTag.ESCAPED,
    _kwalk.TAG_HORIZON: StopTag.HORIZON_REACHED,
    _kwalk.TAG_KILLED: StopTag.GEOMETRIC_KILL,
}


@dataclass(frozen=True)
class StopOutcome:
    tag: StopTag
    stop_index: int
    hit_point: Optional[Point] = None


class LatticePath:
    """A finite walk trace: n steps means n+1 sites.

    Slicing follows the inclusive convention: ``path.slice(a, b)`` is the
    restriction to times a..b.  Consecutive sites are lattice neighbours
    (checked on construction when validate=True).
    """

    __slots__ = ("sites",)

    def __init__(self, sites: np.ndarray, validate: bool = False):
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim != 2 or sites.shape[1] != 4 or sites.shape[0] == 0:
            raise ValueError("a path is a nonempty (n+1, 4) array of sites")
        if validate:
            d = np.abs(np.diff(sites, axis=0)).sum(axis=1)
            if sites.shape[0] > 1 and not np.all(d == 1):
                raise ValueError("consecutive path sites must be lattice neighbours")
        self.sites = sites

    @classmethod
    def from_points(cls, points: Iterable[Point], validate: bool = True) -> "LatticePath":
        return cls(np.asarray([as_point(p) for p in points], dtype=np.int64), validate)

    @classmethod
    def single(cls, p: Point) -> "LatticePath":
        return cls(np.asarray([as_point(p)], dtype=np.int64))

    def __len__(self) -> int:
        """Number of steps (= number of sites - 1)."""
        return self.sites.shape[0] - 1

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    def __getitem__(self, t: int) -> Point:
        return tuple(int(c) for c in self.sites[t])

    def __iter__(self):
        for row in self.sites:
            yield tuple(int(c) for c in row)

    def slice(self, a: int, b: int) -> "LatticePath":
        """Restriction to times a..b inclusive."""
        if not (0 <= a <= b <= len(self)):
            raise IndexError(f"bad slice [{a}, {b}] of a {len(self)}-step path")
        return LatticePath(self.sites[a:b + 1])

    def reversed(self) -> "LatticePath":
        return LatticePath(self.sites[::-1].copy())

    @property
    def start(self) -> Point:
        return self[0]

    @property
    def end(self) -> Point:
        return self[len(self)]

    def packed(self) -> np.ndarray:
        return _kwalk.pack_array(self.sites)

    def site_set(self) -> set[Point]:
        return set(self)

    def is_self_avoiding(self) -> bool:
        return len(set(map(tuple, self.sites.tolist()))) == self.sites.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticePath) and np.array_equal(self.sites, other.sites)

    def __repr__(self) -> str:
        return f"LatticePath({len(self)} steps, {self.start} -> {self.end})"


def srw(start: Point, steps: int, rng: RngStream) -> LatticePath:
    """Walk of exactly `steps` i.i.d. uniform neighbour steps."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    start = as_point(start)
    sites = _kwalk.k_srw(rng.kernel_seed(0), *start, steps)
    return LatticePath(sites)


def srw_until(start: Point, target: Iterable[Point], escape_radius: int,
              horizon: int, rng: RngStream) -> tuple[LatticePath, StopOutcome]:
    """Walk stopped at first target entry (time 0 counts), first exit from
    Lambda_escape_radius, or the horizon, whichever comes first."""
    start = as_point(start)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if escape_radius <= norm_inf(start):
        raise ValueError("escape radius must exceed the start's sup-norm")
    target = [as_point(p) for p in target]
    if target:
        keys, shift = _kwalk.hashset_build(pack_points(target))
        has_target = True
    else:
        keys, shift = _kwalk.hashset_build(np.empty(0, dtype=np.int64))
        has_target = False
    sites, tag, idx = _kwalk.k_srw_until(
        rng.kernel_seed(0), *start, keys, shift, has_target, escape_radius, horizon)
    path = LatticePath(sites)
    hit = path.end if tag == _kwalk.TAG_HIT else None
    return path, StopOutcome(_TAG_BY_CODE[tag], int(idx), hit)


def srw_geometric(start: Point, mean_t: float, rng: RngStream,
                  horizon: Optional[int] = None) -> tuple[LatticePath, StopOutcome]:
    """Walk killed before each step with probability 1/(mean_t + 1).

    The length T is geometric with mean mean_t.  The safety horizon defaults
    to 64 * mean_t (tail probability < e^-64).
    """
    if mean_t <= 0:
        raise ValueError("mean_t must be > 0")
    start = as_point(start)
    if horizon is None:
        horizon = max(1, int(64 * mean_t))
    kill = 1.0 / (mean_t + 1.0)
    sites, tag, idx = _kwalk.k_srw_geometric(rng.kernel_seed(0), *start, kill, horizon)
    return LatticePath(sites), StopOutcome(_TAG_BY_CODE[tag], int(idx))


def srw_no_return(start: Point, steps: int, escape_radius: int, rng: RngStream,
                  max_attempts: int = 10 ** 6,
                  return_attempts: bool = False):
    """Walk conditioned not to revisit its start, by rejection sampling.

    The walk runs until min(steps, first exit from Lambda_escape_radius);
    attempts that revisit the start are discarded.  Raises RuntimeError once
    the rejection budget is exhausted.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    start = as_point(start)
    try:
        sites, tag, attempts = _kwalk.k_srw_no_return(
            rng.kernel_seed(0), *start, steps, escape_radius, max_attempts)
    except ValueError as e:
        raise RuntimeError(f"no-return rejection budget exceeded: {e}") from e
    path = LatticePath(sites)
    if return_attempts:
        return path, int(attempts)
    return path


def cut_times(path: LatticePath) -> np.ndarray:
    """All times t with path[0, t] disjoint from path(t, end].

    Finite-horizon surrogate of the infinite-future definition: a site
    visited at times spanning t removes t from the cut set, so t is a cut
    time iff no site has first visit <= t < last visit.
    """
    n = len(path)
    if n == 0:
        return np.array([0], dtype=np.int64)
    packed = path.packed()
    # first and last visit time per distinct site
    order = np.argsort(packed, kind="stable")
    sorted_p = packed[order]
    boundaries = np.flatnonzero(np.diff(sorted_p)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [packed.shape[0]]))
    cover = np.zeros(n + 2, dtype=np.int64)
    for a, b in zip(starts, ends):
        first = order[a:b].min()
        last = order[a:b].max()
        if last > first:
            cover[first] += 1  # bad interval [first, last)
            cover[last] -= 1
    coverage = np.cumsum(cover[: n + 1])
    return np.flatnonzero(coverage == 0).astype(np.int64)
