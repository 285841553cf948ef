"""Abelian sandpile on wired boxes: stabilization with odometers, Dhar's
burning test, the burning bijection against spanning trees, and avalanche
sampling at stationarity.

Heights live on a dense 4d region; every site has exactly 8 edges, those
leaving the region lead to the sink (grains crossing them are lost).  A
configuration is stable iff all heights are <= 7.  Most operations run on
centred boxes Lambda_r; tiny rectangular patches are supported for the
exhaustive enumeration checks.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from itertools import product
from typing import Optional, Union

import numpy as np

from . import _ksand
from .forest import OrientedForest, wilson_wired
from .lattice import Box, Point, as_point
from .rng import RngStream

THRESHOLD = 8  # 2d


@dataclass(frozen=True)
class Patch:
    """A rectangular 4d region with 0-based coordinates (for tiny tests)."""

    dims: tuple[int, int, int, int]

    @property
    def n_sites(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    def sites(self):
        return product(*(range(d) for d in self.dims))

    def index_of(self, p) -> int:
        i0, i1, i2, i3 = p
        l0, l1, l2, l3 = self.dims
        return ((i0 * l1 + i1) * l2 + i2) * l3 + i3


Region = Union[Box, Patch]


def _dims(region: Region) -> tuple[int, int, int, int]:
    if isinstance(region, Box):
        L = region.side
        return (L, L, L, L)
    return region.dims


@dataclass
class SandpileConfig:
    region: Region
    heights: np.ndarray  # flat, dense row-major site order

    def __post_init__(self):
        self.heights = np.ascontiguousarray(self.heights, dtype=np.int64)
        if self.heights.shape != (self.region.n_sites,):
            raise ValueError("heights must be flat over the region sites")
        if np.any(self.heights < 0):
            raise ValueError("heights must be nonnegative")

    @classmethod
    def zeros(cls, region: Region) -> "SandpileConfig":
        return cls(region, np.zeros(region.n_sites, dtype=np.int64))

    @classmethod
    def constant(cls, region: Region, h: int) -> "SandpileConfig":
        return cls(region, np.full(region.n_sites, h, dtype=np.int64))

    def copy(self) -> "SandpileConfig":
        return SandpileConfig(self.region, self.heights.copy())

    def height(self, p: Point) -> int:
        return int(self.heights[self.region.index_of(as_point(p))])

    def add_grain(self, p: Point, amount: int = 1) -> "SandpileConfig":
        out = self.copy()
        out.heights[self.region.index_of(as_point(p))] += amount
        return out

    @property
    def is_stable(self) -> bool:
        return bool(np.all(self.heights < THRESHOLD))

    def dumps(self) -> str:
        """Text dump: header "radius <r>" or "dims l0 l1 l2 l3", then the
        heights row-major on one line."""
        buf = io.StringIO()
        if isinstance(self.region, Box):
            buf.write(f"radius {self.region.radius}\n")
        else:
            buf.write("dims " + " ".join(str(d) for d in self.region.dims) + "\n")
        buf.write(" ".join(str(int(h)) for h in self.heights))
        buf.write("\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "SandpileConfig":
        lines = text.strip().split("\n")
        head = lines[0].split()
        region: Region
        if head[0] == "radius":
            region = Box(int(head[1]))
        elif head[0] == "dims":
            region = Patch(tuple(int(c) for c in head[1:5]))  # type: ignore[arg-type]
        else:
            raise ValueError("bad sandpile dump header")
        heights = np.array(lines[1].split(), dtype=np.int64)
        return cls(region, heights)


@dataclass
class AvalancheRecord:
    odometer: np.ndarray          # per-site toppling counts (flat)
    cluster_size: int             # sites toppling at least once
    total_topplings: int
    ext_radius: int               # max sup-norm over the cluster, -1 if empty

    @property
    def is_empty(self) -> bool:
        return self.cluster_size == 0


def stabilize(config: SandpileConfig) -> tuple[SandpileConfig, np.ndarray]:
    """Topple unstable sites until stable; returns (stable config, odometer).

    The result does not depend on the toppling schedule (abelian property);
    the engine uses a FIFO queue with batched topplings."""
    out = config.copy()
    odo = _ksand.k_stabilize(out.heights, *_dims(config.region))
    return out, odo


def _avalanche_record(box: Box, odo: np.ndarray) -> AvalancheRecord:
    cluster = np.flatnonzero(odo)
    if cluster.size == 0:
        return AvalancheRecord(odo, 0, 0, -1)
    L = box.side
    coords = np.stack(np.unravel_index(cluster, (L, L, L, L)), axis=1) - box.radius
    return AvalancheRecord(odo, int(cluster.size), int(odo.sum()),
                           int(np.abs(coords).max()))


def is_recurrent(config: SandpileConfig) -> bool:
    """Dhar's burning test: fire from the sink; burn a site once its height
    reaches its number of unburnt neighbour edges; recurrent iff everything
    burns."""
    if not config.is_stable:
        raise ValueError("burning test expects a stable configuration")
    _parent, ok = _ksand.k_config_to_tree(config.heights, *_dims(config.region))
    return bool(ok)


def parents_from_heights(config: SandpileConfig) -> np.ndarray:
    """Burning bijection, sandpile side; raises on non-recurrent input."""
    if not config.is_stable:
        raise ValueError("burning bijection expects a stable configuration")
    parent, ok = _ksand.k_config_to_tree(config.heights, *_dims(config.region))
    if not ok:
        raise ValueError("configuration is not recurrent")
    return parent


def heights_from_parents(parent_dir: np.ndarray, region: Region) -> SandpileConfig:
    """Burning bijection, tree side: heights from parent directions."""
    parent_dir = np.ascontiguousarray(parent_dir, dtype=np.int8)
    if np.any(parent_dir < 0):
        raise ValueError("parent structure does not span the region")
    heights = _ksand.k_tree_to_config(parent_dir, *_dims(region))
    return SandpileConfig(region, heights)


def recurrent_to_tree(config: SandpileConfig) -> OrientedForest:
    """Recurrent configuration -> spanning tree of the wired box.

    The parent edge of a site burning in round k is selected among its edges
    to round-(k-1) vertices by the height offset, in the fixed neighbour
    order (Majumdar-Dhar convention)."""
    if not isinstance(config.region, Box):
        raise ValueError("OrientedForest output needs a centred box")
    return OrientedForest(config.region, parents_from_heights(config))


def tree_to_recurrent(forest: OrientedForest) -> SandpileConfig:
    """Spanning tree of the wired box -> recurrent heights."""
    if forest.wired_vertex is not None:
        raise ValueError("the bijection needs a plain wired spanning tree")
    return heights_from_parents(forest.parent_dir, forest.box)


def uniform_recurrent(box: Box, rng: RngStream) -> SandpileConfig:
    """A uniform recurrent configuration, via Wilson + burning bijection."""
    return tree_to_recurrent(wilson_wired(box, rng))


def sample_avalanche(box: Box, rng: RngStream,
                     config: Optional[SandpileConfig] = None
                     ) -> tuple[AvalancheRecord, SandpileConfig]:
    """Drop one grain at the origin on a uniform recurrent configuration and
    stabilize; returns the avalanche record and the resulting configuration."""
    if config is None:
        config = uniform_recurrent(box, rng)
    bumped = config.add_grain((0, 0, 0, 0))
    stable, odo = stabilize(bumped)
    return _avalanche_record(box, odo), stable


def enumerate_recurrent(region: Region) -> list[SandpileConfig]:
    """All recurrent configurations of a tiny region, by exhaustive burning."""
    n = region.n_sites
    if n > 8:
        raise ValueError("exhaustive enumeration capped at 8 sites")
    out = []
    for code in range(THRESHOLD ** n):
        h = np.empty(n, dtype=np.int64)
        c = code
        for i in range(n):
            h[i] = c % THRESHOLD
            c //= THRESHOLD
        cfg = SandpileConfig(region, h)
        if is_recurrent(cfg):
            out.append(cfg)
    return out


def enumerate_patch_trees(region: Region) -> list[np.ndarray]:
    """All spanning trees of a tiny wired region, as parent-direction arrays
    (brute force over direction assignments with an acyclicity check)."""
    n = region.n_sites
    if n > 6:
        raise ValueError("tree enumeration capped at 6 sites")
    dims = _dims(region)
    l0, l1, l2, l3 = dims
    sites = list(product(range(l0), range(l1), range(l2), range(l3)))
    moves = [(1, 0, 0, 0), (-1, 0, 0, 0), (0, 1, 0, 0), (0, -1, 0, 0),
             (0, 0, 1, 0), (0, 0, -1, 0), (0, 0, 0, 1), (0, 0, 0, -1)]
    out = []
    for assign in product(range(8), repeat=n):
        parent_idx = []
        for i, p in enumerate(sites):
            q = tuple(a + b for a, b in zip(p, moves[assign[i]]))
            inside = all(0 <= q[k] < dims[k] for k in range(4))
            parent_idx.append(((q[0] * l1 + q[1]) * l2 + q[2]) * l3 + q[3]
                              if inside else -1)
        ok = True
        for i in range(n):
            seen = set()
            j = i
            while j != -1 and j not in seen:
                seen.add(j)
                j = parent_idx[j]
            if j != -1:
                ok = False
                break
        if ok:
            out.append(np.array(assign, dtype=np.int8))
    return out
