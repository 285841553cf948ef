"""Wilson's algorithm on wired boxes (plain and v-wired), the oriented-forest
structure with future/past/tree-path queries, spanning-tree counting for tiny
wired graphs, and the lazy past-of-origin sampler used by the scaling
experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kforest, _kwalk
from .lattice import (DIRECTIONS, Box, Point, as_point, neighbors, norm_inf,
                      pack_points)
from .rng import RngStream
from .walk import LatticePath

#: parent marker for root vertices (their edge leaves the box or they are v)
SINK = "sink"

MAX_DENSE_SITES = 25_000_000
DEFAULT_WALK_BUDGET = 10 ** 9


def spiral_order(box: Box) -> np.ndarray:
    """Dense indices sorted by sup-norm then lexicographically.

    The origin's future is laid first; the UST law does not depend on this
    (order-invariance of Wilson's algorithm).
    """
    L = box.side
    r = box.radius
    axes = [np.arange(L) - r] * 4
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    keys = np.abs(grid).max(axis=1)
    return np.argsort(keys, kind="stable").astype(np.int64)


@dataclass
class OrientedForest:
    """Parent-pointer forest over a wired box.

    parent_dir[i] in 0..7 gives the direction of the tree edge out of dense
    site i; edges leaving the box point at the sink.  In the v-wired variant
    the vertex v is identified with the sink and has no outgoing edge
    (parent_dir = -1).
    """

    box: Box
    parent_dir: np.ndarray
    wired_vertex: Optional[Point] = None

    def parent(self, p: Point):
        """Parent site of p, or SINK when the edge leaves the box / p = v."""
        p = as_point(p)
        d = int(self.parent_dir[self.box.index_of(p)])
        if d < 0:
            return SINK
        q = tuple(a + b for a, b in zip(p, DIRECTIONS[d]))
        return q if self.box.contains(q) else SINK

    def future(self, x: Point) -> LatticePath:
        """The unique oriented path from x to a root (last site in the box)."""
        x = as_point(x)
        sites = [x]
        seen = {x}
        while True:
            q = self.parent(sites[-1])
            if q is SINK:
                return LatticePath.from_points(sites, validate=False)
            if q in seen:
                raise RuntimeError("cycle in oriented forest")
            seen.add(q)
            sites.append(q)

    def tree_path(self, x: Point, y: Point) -> LatticePath:
        """The path connecting x and y through their lowest common ancestor.

        Requires x and y to be in the same component (always true in the
        plain wired tree)."""
        fx = list(self.future(x))
        fy = list(self.future(y))
        pos = {p: i for i, p in enumerate(fx)}
        for j, p in enumerate(fy):
            if p in pos:
                i = pos[p]
                return LatticePath.from_points(fx[: i + 1] + fy[:j][::-1],
                                               validate=False)
        raise ValueError("x and y are in different components")

    def children_index(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR arrays (offsets, children) of the reversed parent relation."""
        L = self.box.side
        N = self.box.n_sites
        idx = np.arange(N)
        d = self.parent_dir
        coords = np.stack(np.unravel_index(idx, (L, L, L, L)), axis=1)
        moves = _kwalk.DIRECTIONS[np.clip(d, 0, 7)]
        tgt = coords + moves
        inside = ((tgt >= 0) & (tgt < L)).all(axis=1) & (d >= 0)
        parent_idx = np.full(N, -1, dtype=np.int64)
        t = tgt[inside]
        parent_idx[inside] = ((t[:, 0] * L + t[:, 1]) * L + t[:, 2]) * L + t[:, 3]
        order = np.argsort(parent_idx, kind="stable")
        sorted_parents = parent_idx[order]
        offsets = np.searchsorted(sorted_parents, np.arange(N + 1))
        return offsets, order

    def past_sites(self, x: Point) -> list[Point]:
        """All sites whose future passes through x (x included)."""
        offsets, children = self.children_index()
        L = self.box.side
        start = self.box.index_of(as_point(x))
        out = []
        stack = [start]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(children[offsets[i]:offsets[i + 1]].tolist())
        return [self.box.site_of(i) for i in out]

    def dump(self) -> str:
        """Text dump: one line per site, "x0 x1 x2 x3 -> p0 p1 p2 p3 | SINK"."""
        lines = []
        for p in self.box.sites():
            q = self.parent(p)
            tail = "SINK" if q is SINK else " ".join(str(c) for c in q)
            lines.append(" ".join(str(c) for c in p) + " -> " + tail)
        return "\n".join(lines) + "\n"


@dataclass
class PastSummary:
    origin: Point
    intrinsic_radius: int
    extrinsic_radius: int
    volume: int
    shell_sizes: np.ndarray  # shell_sizes[n] = |boundary of past ball of radius n|

    def __post_init__(self):
        assert self.shell_sizes[0] == 1
        assert self.volume == int(self.shell_sizes.sum())


def wilson_wired(box: Box, rng: RngStream,
                 vertex_order: Optional[np.ndarray] = None,
                 walk_budget: int = DEFAULT_WALK_BUDGET) -> OrientedForest:
    """Sample the uniform spanning tree of the wired box."""
    if box.n_sites > MAX_DENSE_SITES:
        raise ValueError("box too large for dense Wilson; use sample_past")
    order = spiral_order(box) if vertex_order is None else np.asarray(vertex_order, dtype=np.int64)
    parent = _kforest.k_wilson_dense(rng.kernel_seed(0), box.radius, order, walk_budget)
    return OrientedForest(box, parent)


def wilson_vwired(box: Box, v: Point, rng: RngStream,
                  walk_budget: int = DEFAULT_WALK_BUDGET) -> OrientedForest:
    """Sample the v-wired UST: v is identified with the sink, so the
    component of v is the finite tree hanging from it."""
    v = as_point(v)
    if not box.contains(v):
        raise ValueError("v must lie in the box")
    if box.n_sites > MAX_DENSE_SITES:
        raise ValueError("box too large for dense Wilson; use sample_past")
    order = spiral_order(box)
    parent = _kforest.k_wilson_dense_vwired(
        rng.kernel_seed(0), box.radius, box.index_of(v), order, walk_budget)
    return OrientedForest(box, parent, wired_vertex=v)


def past_summary(forest: OrientedForest, x: Point) -> PastSummary:
    """BFS over reversed edges; shells by tree distance from x; the extrinsic
    radius is the farthest sup-norm displacement from x within the past."""
    x = as_point(x)
    offsets, children = forest.children_index()
    start = forest.box.index_of(x)
    count = 1
    frontier = [start]
    shells = [1]
    ext = 0
    while frontier:
        nxt = []
        for i in frontier:
            nxt.extend(children[offsets[i]:offsets[i + 1]].tolist())
        if not nxt:
            break
        for i in nxt:
            q = forest.box.site_of(i)
            ext = max(ext, max(abs(a - b) for a, b in zip(q, x)))
        count += len(nxt)
        shells.append(len(nxt))
        frontier = nxt
    return PastSummary(x, len(shells) - 1, ext, count,
                       np.asarray(shells, dtype=np.int64))


# ---------------------------------------------------------------------------
# lazy past sampling on large wired boxes
# ---------------------------------------------------------------------------

@dataclass
class PastSample:
    volume: int
    intrinsic_radius: int
    extrinsic_radius: int
    shell_sizes: np.ndarray


def sample_pasts(radius: int, n_samples: int, rng: RngStream,
                 model: str = "ust", shells_max: int = 0,
                 cap_pow: int = 20, max_steps: int = DEFAULT_WALK_BUDGET,
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Sample only the past of the origin in the wired-box UST ("ust") or
    the component of the origin in the 0-wired forest ("0wired").

    Returns (stats, shells): stats[i] = (volume, rad_int, rad_ext, flag).
    Samples flagged nonzero (scratch overflow) are re-drawn with a larger
    table, preserving reproducibility per sample index.
    """
    if model not in ("ust", "0wired"):
        raise ValueError("model must be 'ust' or '0wired'")
    zero_wired = model == "0wired"
    stats, shells = _kforest.k_past_batch(
        rng.kernel_seed(11), radius, zero_wired, n_samples, shells_max,
        cap_pow, max_steps)
    bad = np.flatnonzero(stats[:, 3] != 0)
    for i in bad:
        retry_pow = cap_pow
        for attempt in range(1, 4):
            retry_pow += 2
            st2, sh2 = _kforest.k_past_batch(
                rng.substream(int(i)).kernel_seed(12 + attempt), radius,
                zero_wired, 1, shells_max, retry_pow, max_steps)
            if st2[0, 3] == 0:
                stats[i] = st2[0]
                shells[i] = sh2[0]
                break
        else:
            raise RuntimeError(f"past sample {i} kept overflowing its table")
    return stats, shells


def sample_past_tree(radius: int, rng: RngStream, model: str = "ust",
                     cap_pow: int = 20,
                     max_steps: int = DEFAULT_WALK_BUDGET):
    """One lazy past sample with tree structure (for path functionals).

    Returns (sites, parents, depths): packed past sites, parent indices
    (origin has -1), and tree depths.
    """
    zero_wired = model == "0wired"
    for attempt in range(4):
        sites, parents, depths, flag = _kforest.k_past_tree(
            rng.kernel_seed(21 + attempt), radius, zero_wired,
            cap_pow + 2 * attempt, max_steps)
        if flag == 0:
            return sites, parents, depths
    raise RuntimeError("past-tree sample kept overflowing its table")


def wilson_edge_marginals(radius: int, sites: Sequence[Point], n_samples: int,
                          rng: RngStream, cap_pow: int = 20
                          ) -> np.ndarray:
    """Empirical parent-direction distribution of given sites in the
    wired-box UST, sampled lazily (one tree per sample).

    Returns counts of shape (len(sites), 8).
    """
    packed = pack_points([as_point(p) for p in sites])
    counts = np.zeros((len(sites), 8), dtype=np.int64)
    for rep in range(n_samples):
        dirs, flag = _kforest.k_wilson_parents(
            rng.substream(rep).kernel_seed(0), radius, packed, cap_pow,
            DEFAULT_WALK_BUDGET)
        if flag != 0:
            raise RuntimeError("edge-marginal sample overflowed its table")
        counts[np.arange(len(sites)), dirs] += 1
    return counts


# ---------------------------------------------------------------------------
# tiny wired multigraphs: exact spanning-tree counts and generic Wilson
# ---------------------------------------------------------------------------

@dataclass
class TinyWiredGraph:
    """A small multigraph with a distinguished sink (root).

    adjacency[i][j] = number of edges between internal vertices i and j;
    sink_edges[i] = number of edges from i to the sink.  Edge multiplicities
    matter both for the tree count and for the walk law.
    """

    adjacency: np.ndarray
    sink_edges: np.ndarray
    labels: Optional[list] = None

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=np.int64)
        self.sink_edges = np.asarray(self.sink_edges, dtype=np.int64)
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n) or self.sink_edges.shape != (n,):
            raise ValueError("inconsistent adjacency shapes")
        if not np.array_equal(self.adjacency, self.adjacency.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(self.adjacency) != 0):
            raise ValueError("self-loops are not allowed")

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    def degree(self, i: int) -> int:
        return int(self.adjacency[i].sum() + self.sink_edges[i])


def spanning_tree_count(graph: TinyWiredGraph) -> int:
    """Number of spanning trees rooted at the sink (matrix-tree theorem),
    exact over rationals."""
    n = graph.n_vertices
    if n > 20:
        raise ValueError("exact determinant capped at 20 vertices")
    if n == 0:
        return 1
    lap = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        lap[i][i] = Fraction(graph.degree(i))
        for j in range(n):
            if i != j:
                lap[i][j] = Fraction(-int(graph.adjacency[i, j]))
    # fraction-free-ish Gaussian elimination
    det = Fraction(1)
    for col in range(n):
        piv = None
        for row in range(col, n):
            if lap[row][col] != 0:
                piv = row
                break
        if piv is None:
            return 0
        if piv != col:
            lap[col], lap[piv] = lap[piv], lap[col]
            det = -det
        det *= lap[col][col]
        inv = Fraction(1) / lap[col][col]
        for row in range(col + 1, n):
            factor = lap[row][col] * inv
            if factor:
                for c2 in range(col, n):
                    lap[row][c2] -= factor * lap[col][c2]
    assert det.denominator == 1
    return int(det)


def wilson_tiny(graph: TinyWiredGraph, rng: RngStream) -> tuple[tuple[int, int], ...]:
    """Sample a uniform spanning tree of the tiny wired graph.

    Returns, per internal vertex, the pair (target, edge_copy): target is the
    parent vertex (-1 = sink) and edge_copy distinguishes parallel edges, so
    the returned tuple identifies the tree as a subset of the multigraph's
    edges.
    """
    n = graph.n_vertices
    gen = rng.generator
    # per-vertex cumulative edge tables
    targets = []
    for i in range(n):
        opts = []
        for j in range(n):
            for c in range(int(graph.adjacency[i, j])):
                opts.append((j, c))
        for c in range(int(graph.sink_edges[i])):
            opts.append((-1, c))
        if not opts:
            raise ValueError(f"vertex {i} is isolated")
        targets.append(opts)
    parent: list[Optional[tuple[int, int]]] = [None] * n
    in_tree = [False] * n
    for start in range(n):
        if in_tree[start]:
            continue
        nxt: dict[int, tuple[int, int]] = {}
        u = start
        while u != -1 and not in_tree[u]:
            choice = targets[u][int(gen.integers(0, len(targets[u])))]
            nxt[u] = choice
            u = choice[0]
        u = start
        while u != -1 and not in_tree[u]:
            in_tree[u] = True
            parent[u] = nxt[u]
            u = nxt[u][0]
    return tuple(parent)  # type: ignore[arg-type]


def z4_slice_graph() -> TinyWiredGraph:
    """The 1d slice {-e0, 0, +e0} of Lambda_1 with all remaining Z^4 edges
    wired to the sink: a 3-vertex path, 7 or 6 parallel sink edges each."""
    adj = np.zeros((3, 3), dtype=np.int64)
    adj[0, 1] = adj[1, 0] = 1
    adj[1, 2] = adj[2, 1] = 1
    return TinyWiredGraph(adj, np.array([7, 6, 7]), labels=[(-1,), (0,), (1,)])


def patch_2x2_graph() -> TinyWiredGraph:
    """The 2x2x1x1 patch of Z^4: a 4-cycle of internal edges, 6 sink edges
    per site (degree 8 in Z^4)."""
    adj = np.zeros((4, 4), dtype=np.int64)
    cycle = [(0, 1), (1, 3), (3, 2), (2, 0)]
    for i, j in cycle:
        adj[i, j] = adj[j, i] = 1
    return TinyWiredGraph(adj, np.array([6, 6, 6, 6]))
