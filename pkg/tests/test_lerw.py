import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ustlab import _kenum, lerw, walk
from ustlab.lattice import DIRECTIONS
from ustlab.oracles import first_cycle_erase
from ustlab.rng import RngStream
from ustlab.walk import LatticePath, StopTag


def test_self_avoiding_fixed_point(rng):
    p = LatticePath.from_points([(i, 0, 0, 0) for i in range(7)])
    le = lerw.loop_erase(p)
    assert list(le.le_path) == list(p)
    assert list(le.ell) == list(range(7))


def test_forced_two_step_example():
    # walk 0, e1, 0, e2: the surviving times follow the chronological
    # recursion ell_0 = 0, ell_{i+1} = 1 + last visit to the i-th point
    w = LatticePath.from_points([(0, 0, 0, 0), (1, 0, 0, 0), (0, 0, 0, 0),
                                 (0, 1, 0, 0)])
    le = lerw.loop_erase(w)
    assert list(le.le_path) == [(0, 0, 0, 0), (0, 1, 0, 0)]
    assert list(le.ell) == [0, 3]
    assert [le.rho(m) for m in range(4)] == [0, 0, 0, 1]


def test_loop_erase_against_first_cycle_oracle(rng):
    for i in range(2000):
        steps = int(rng.substream(i).generator.integers(0, 51))
        p = walk.srw((0, 0, 0, 0), steps, rng.substream(i))
        assert list(lerw.loop_erase(p).le_path) == first_cycle_erase(list(p))


def test_ell_rho_duality(rng):
    for i in range(400):
        p = walk.srw((0, 0, 0, 0), 80, rng.substream(i))
        le = lerw.loop_erase(p)
        ell, rho = le.ell, le.rho_array
        for n in range(len(ell)):
            assert np.array_equal(ell[n] <= np.arange(81), rho >= n)


def test_source_times_give_le_path(rng):
    p = walk.srw((0, 0, 0, 0), 300, rng)
    le = lerw.loop_erase(p)
    assert np.array_equal(p.sites[le.ell], le.le_path.sites)
    assert np.all(np.diff(le.ell) > 0)
    assert le.le_path.is_self_avoiding()


def test_idempotence(rng):
    p = walk.srw((0, 0, 0, 0), 400, rng)
    le = lerw.loop_erase(p)
    again = lerw.loop_erase(le.le_path)
    assert list(again.le_path) == list(le.le_path)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=0, max_size=60),
       st.integers(0, 2 ** 32 - 1))
def test_streaming_equals_batch_property(dirs, seed):
    pts = [(0, 0, 0, 0)]
    for d in dirs:
        pts.append(tuple(a + b for a, b in zip(pts[-1], DIRECTIONS[d])))
    path = LatticePath.from_points(pts)
    state = lerw.StreamingErasure(pts[0])
    for t in range(1, len(pts)):
        state.feed(pts[t])
        prefix = lerw.loop_erase(path.slice(0, t))
        assert state.stack == list(prefix.le_path)
        assert list(state.ell) == list(prefix.ell)
        assert state.rho_n == prefix.rho(t)


def test_streaming_never_pops_on_self_avoiding():
    state = lerw.StreamingErasure((0, 0, 0, 0))
    for i in range(1, 10):
        state.feed((i, 0, 0, 0))
        assert state.rho_n == i


def test_streaming_rejects_non_neighbor():
    state = lerw.StreamingErasure((0, 0, 0, 0))
    with pytest.raises(ValueError):
        state.feed((2, 0, 0, 0))


def test_streaming_eta_prefix_property(rng):
    # the eta_n prefix of the horizon erasure is a common prefix of every
    # longer-horizon erasure
    p = walk.srw((0, 0, 0, 0), 600, rng)
    full = lerw.loop_erase(p)
    n = 300
    rho_n = full.rho(n)
    prefix_sites = full.le_path.sites[: rho_n + 1]
    le_n = lerw.loop_erase(p.slice(0, n))
    assert np.array_equal(le_n.le_path.sites[: rho_n + 1], prefix_sites)


def test_reverse_loop_erase_self_avoiding_identity():
    p = LatticePath.from_points([(i, 0, 0, 0) for i in range(5)])
    assert list(lerw.reverse_loop_erase(p)) == list(p)


def test_reverse_loop_erase_endpoints(rng):
    p = walk.srw((0, 0, 0, 0), 200, rng)
    r = lerw.reverse_loop_erase(p)
    assert r.start == p.start and r.end == p.end
    assert r.is_self_avoiding()


def test_reverse_loop_erase_is_aldous_broder_path(rng):
    # the first-entry-edge tree of the walk, oriented toward the start,
    # carries LE^R(w) as the branch of the endpoint
    for i in range(300):
        p = walk.srw((0, 0, 0, 0), 120, rng.substream(i))
        parent = {}
        for t in range(1, len(p) + 1):
            q = p[t]
            if q not in parent and q != p.start:
                parent[q] = p[t - 1]
        chain = [p.end]
        while chain[-1] != p.start:
            chain.append(parent[chain[-1]])
        assert chain == list(lerw.reverse_loop_erase(p))[::-1]


def test_lerw_to_target_trivials(rng):
    le, out = lerw.lerw_to_target((0, 0, 0, 0), [(0, 0, 0, 0)], 8, rng)
    assert out.tag is StopTag.HIT_TARGET and len(le.le_path) == 0
    le2, out2 = lerw.lerw_to_target((2, 0, 0, 0), [(0, 0, 0, 0)], 64, rng)
    assert le2.le_path.is_self_avoiding()
    if out2.tag is StopTag.HIT_TARGET:
        assert le2.le_path.end == (0, 0, 0, 0)


def test_lerw_to_target_mean_length_vs_enumeration(rng):
    # exact conditional mean of |LE| at the first origin hit, truncated at
    # L steps; Monte Carlo restricted to the same event must agree
    L = 9
    hit_counts, le_sums = _kenum.k_le_length_at_hit(1, 0, 0, 0, L)
    num = sum(Fraction(int(le_sums[n]), 8 ** n) for n in range(L + 1))
    den = sum(Fraction(int(hit_counts[n]), 8 ** n) for n in range(L + 1))
    exact_mean = float(num / den)
    got = []
    for i in range(40000):
        path, out = walk.srw_until((1, 0, 0, 0), [(0, 0, 0, 0)], 30, L,
                                   rng.substream(i))
        if out.tag is StopTag.HIT_TARGET and 1 <= out.stop_index <= L:
            got.append(len(lerw.loop_erase(path).le_path))
    got = np.asarray(got, dtype=np.float64)
    se = got.std(ddof=1) / math.sqrt(len(got))
    assert abs(got.mean() - exact_mean) <= 3 * se


def test_check_reversibility_trivial_and_random(rng):
    eta0 = LatticePath.single((0, 0, 0, 0))
    assert lerw.check_reversibility(eta0, [], 4)["deviation"] == 0.0
    eta = LatticePath.from_points([(0, 0, 0, 0), (1, 0, 0, 0), (1, 1, 0, 0)])
    res = lerw.check_reversibility(eta, [(2, 2, 0, 0), (0, 0, 1, 1)], 5)
    assert res["deviation"] < 1e-12
    res2 = lerw.check_reversibility(eta, [], 5)
    assert res2["deviation"] < 1e-12


def test_check_domain_markov_identity_and_truncation(rng):
    om = LatticePath.from_points([(0, 0, 0, 0), (1, 0, 0, 0)])
    et = LatticePath.from_points([(1, 0, 0, 0), (2, 0, 0, 0)])
    prev = None
    for L in (5, 6, 7):
        res = lerw.check_domain_markov(2.0, om, et, L)
        assert res["deviation"] <= res["truncation_bound"]
        if prev is not None:
            assert res["deviation"] <= prev * 1.05  # shrinking truncation
        prev = res["deviation"]


def test_check_domain_markov_zero_length_omega():
    # k = 0 is the boundary case: conditioning on the trivial prefix versus
    # conditioning on no return to the start
    om = LatticePath.single((0, 0, 0, 0))
    et = LatticePath.from_points([(0, 0, 0, 0), (1, 0, 0, 0)])
    res = lerw.check_domain_markov(1.0, om, et, 6)
    assert res["deviation"] <= res["truncation_bound"]
