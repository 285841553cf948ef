import math
import re

import numpy as np
import pytest
from scipy import stats as sstats

from ustlab import forest, lerw
from ustlab.forest import (SINK, Box, OrientedForest, TinyWiredGraph,
                           past_summary, sample_pasts, spanning_tree_count,
                           wilson_tiny, wilson_vwired, wilson_wired)
from ustlab.rng import RngStream


def test_wilson_radius_zero(rng):
    f = wilson_wired(Box(0), rng)
    assert f.parent((0, 0, 0, 0)) is SINK


def test_wilson_spans_and_acyclic(rng):
    box = Box(2)
    f = wilson_wired(box, rng)
    assert np.all(f.parent_dir >= 0)
    for p in box.sites():
        fut = f.future(p)  # raises on a cycle
        assert len(fut) <= box.n_sites


def test_wilson_vertex_order_invariance(rng):
    # two fixed orders give the same parent-edge marginal at a probe site
    box = Box(1)
    probe = (0, 0, 0, 0)
    reps = 4000
    orders = [forest.spiral_order(box), forest.spiral_order(box)[::-1].copy()]
    counts = np.zeros((2, 8), dtype=np.int64)
    for oi, order in enumerate(orders):
        for i in range(reps):
            f = wilson_wired(box, rng.substream(oi).substream(i),
                             vertex_order=order)
            counts[oi, f.parent_dir[box.index_of(probe)]] += 1
    for d in range(8):
        p1, p2 = counts[0, d] / reps, counts[1, d] / reps
        se = math.sqrt(p1 * (1 - p1) / reps + p2 * (1 - p2) / reps)
        assert abs(p1 - p2) <= 4 * se + 1e-9


def test_vwired_box_zero(rng):
    f = wilson_vwired(Box(0), (0, 0, 0, 0), rng)
    assert f.parent((0, 0, 0, 0)) is SINK  # v is part of the root
    assert f.wired_vertex == (0, 0, 0, 0)


def test_vwired_neighbors_defined(rng):
    box = Box(2)
    f = wilson_vwired(box, (0, 0, 0, 0), rng)
    for p in box.sites():
        if p == (0, 0, 0, 0):
            assert f.parent(p) is SINK
        else:
            assert f.parent(p) is SINK or box.contains(f.parent(p))


def test_vwired_volume_dominates_past(rng):
    # component of 0 in the 0-wired forest stochastically dominates the past
    s_ust, _ = sample_pasts(12, 4000, rng.substream(0), model="ust")
    s_0w, _ = sample_pasts(12, 4000, rng.substream(1), model="0wired")
    ks = sstats.ks_2samp(s_0w[:, 0], s_ust[:, 0], alternative="greater")
    # "greater": CDF of first sample >= CDF of second, i.e. UST-past larger
    # would fail; we test the 0-wired volumes dominate
    assert ks.pvalue > 0.01
    assert s_0w[:, 0].mean() > s_ust[:, 0].mean()


def test_future_and_tree_path(rng):
    box = Box(2)
    f = wilson_wired(box, rng)
    x, y = (1, 0, 0, 0), (0, 1, 0, 0)
    assert len(f.tree_path(x, x)) == 0
    pxy = f.tree_path(x, y)
    pyx = f.tree_path(y, x)
    assert list(pxy) == list(pyx)[::-1]
    assert pxy.start == x and pxy.end == y


def test_past_summary_leaf_and_consistency(rng):
    box = Box(2)
    f = wilson_wired(box, rng)
    offsets, children = f.children_index()
    leaf = None
    for i in range(box.n_sites):
        if offsets[i] == offsets[i + 1]:
            leaf = box.site_of(i)
            break
    ps = past_summary(f, leaf)
    assert ps.volume == 1 and ps.intrinsic_radius == 0 and ps.extrinsic_radius == 0
    ps0 = past_summary(f, (0, 0, 0, 0))
    assert ps0.shell_sizes[0] == 1
    assert ps0.volume == ps0.shell_sizes.sum()


def test_unique_nth_ancestor_mass_transport_skeleton(rng):
    # every vertex has exactly one n-th ancestor or none: summing shell
    # memberships over all x gives exactly one hit per (y, n<=depth)
    box = Box(1)
    f = wilson_wired(box, rng)
    n = 3
    count = {}
    for x in box.sites():
        fut = f.future(x)
        if len(fut) >= n:
            count[(x, n)] = fut[n]
    # each y counted by as many x as have y exactly n steps ahead; invert:
    inverse = {}
    for (x, _n), y in count.items():
        inverse.setdefault(y, []).append(x)
    for y, xs in inverse.items():
        ps = past_summary(f, y)
        shell = ps.shell_sizes[n] if n < len(ps.shell_sizes) else 0
        assert shell == len(xs)


def test_lazy_past_matches_dense_distribution(rng):
    vols = []
    for i in range(400):
        f = wilson_wired(Box(4), rng.substream(i))
        vols.append(past_summary(f, (0, 0, 0, 0)).volume)
    stats, _ = sample_pasts(4, 4000, rng.substream(10 ** 6), model="ust")
    ks = sstats.ks_2samp(vols, stats[:, 0])
    assert ks.pvalue > 0.01


def test_sample_pasts_shells_mean_one(rng):
    stats, shells = sample_pasts(16, 4000, rng, model="ust", shells_max=6)
    assert (stats[:, 3] == 0).all()
    means = shells.mean(axis=0)
    ses = shells.std(axis=0, ddof=1) / math.sqrt(shells.shape[0])
    assert means[0] == 1.0
    for n in range(1, 7):
        assert abs(means[n] - 1.0) <= 3 * ses[n]


def test_lerw_marginal_of_future(rng):
    # the future of 0 in the wired tree is a loop-erased walk to the sink
    box = Box(8)
    n = 5
    a, b = [], []
    for i in range(2500):
        f = wilson_wired(Box(4), rng.substream(i))
        fut = f.future((0, 0, 0, 0))
        if len(fut) >= n:
            a.append(fut[n][0])
        le, _out = lerw.lerw_to_target((0, 0, 0, 0), [], 4, rng.substream(10 ** 6 + i),
                                       horizon=10 ** 6)
        if len(le.le_path) >= n:
            b.append(le.le_path[n][0])
    ks = sstats.ks_2samp(a, b)
    assert ks.pvalue > 0.01


def test_spanning_tree_counts():
    tri = TinyWiredGraph(np.array([[0, 1], [1, 0]]), np.array([1, 1]))
    assert spanning_tree_count(tri) == 3  # triangle
    single = TinyWiredGraph(np.zeros((1, 1), dtype=int), np.array([1]))
    assert spanning_tree_count(single) == 1
    cyc = TinyWiredGraph(
        np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]), np.array([1, 0, 1]))
    assert spanning_tree_count(cyc) == 4  # 4-cycle


def test_wilson_tiny_uniform(rng):
    g = forest.z4_slice_graph()
    count = spanning_tree_count(g)
    freq = {}
    reps = 20000
    for i in range(reps):
        t = wilson_tiny(g, rng.substream(i))
        freq[t] = freq.get(t, 0) + 1
    assert len(freq) <= count
    obs = np.array(list(freq.values()) + [0] * (count - len(freq)))
    assert sstats.chisquare(obs).pvalue > 0.01


def test_forest_dump_format(rng):
    f = wilson_wired(Box(1), rng)
    dump = f.dump()
    lines = dump.strip().split("\n")
    assert len(lines) == 81
    pat = re.compile(r"^-?\d+ -?\d+ -?\d+ -?\d+ -> (-?\d+ -?\d+ -?\d+ -?\d+|SINK)$")
    for line in lines:
        assert pat.match(line), line


def test_wilson_edge_marginals_shape(rng):
    sites = [(0, 0, 0, 0), (1, 0, 0, 0)]
    counts = forest.wilson_edge_marginals(8, sites, 200, rng)
    assert counts.shape == (2, 8)
    assert counts.sum() == 400


def test_sample_past_tree_structure(rng):
    for i in range(30):
        sites, parents, depths = forest.sample_past_tree(10, rng.substream(i))
        m = sites.shape[0]
        assert m >= 1
        roots = np.flatnonzero(parents == -1)
        assert len(roots) == 1
        assert depths[roots[0]] == 0
        for j in range(m):
            p = parents[j]
            if p >= 0:
                assert depths[j] == depths[p] + 1
