import math
from itertools import product

import numpy as np
import pytest
from scipy import stats as sstats

from ustlab import capacity, interlace
from ustlab.capacity import ExactEscapeField
from ustlab.interlace import aldous_broder_window, past_dynamics_check, sample_interlacement
from ustlab.rng import RngStream


@pytest.fixture(scope="module")
def cap0():
    return capacity.capacity([(0, 0, 0, 0)], method="exact")


def test_empty_window(cap0, rng):
    w = sample_interlacement([(0, 0, 0, 0)], 1.0, 1.0, cap0, rng)
    assert w.trajectories == []


def test_singleton_entries_and_count_mean(cap0, rng):
    dt = 0.5
    counts = []
    for i in range(2500):
        w = sample_interlacement([(0, 0, 0, 0)], 0.0, dt, cap0,
                                 rng.substream(i))
        counts.append(len(w.trajectories))
        for tr in w.trajectories:
            assert tr.entry == (0, 0, 0, 0)
    lam = dt * cap0.value
    mean = np.mean(counts)
    se = np.std(counts, ddof=1) / math.sqrt(len(counts))
    assert abs(mean - lam) <= 3 * se


def test_backward_walk_avoids_k(cap0, rng):
    K = [(0, 0, 0, 0), (1, 0, 0, 0)]
    cap = capacity.capacity(K, method="exact")
    w = sample_interlacement(K, 0.0, 2.0, cap, rng)
    kset = set(K)
    for tr in w.trajectories:
        assert tr.backward[0] == tr.entry
        for p in list(tr.backward)[1:]:
            assert p not in kset


def test_two_point_entry_frequencies(rng):
    K = [(0, 0, 0, 0), (1, 0, 0, 0)]
    cap = capacity.capacity(K, method="exact")
    fld = ExactEscapeField(K)
    esc = np.array([fld.escape(p) for p in K])
    target = esc[0] / esc.sum()
    n0 = tot = 0
    for i in range(1200):
        w = sample_interlacement(K, 0.0, 1.0, cap, rng.substream(i),
                                 entry_weights=esc)
        for tr in w.trajectories:
            tot += 1
            n0 += tr.entry == K[0]
    p = n0 / tot
    se = math.sqrt(target * (1 - target) / tot)
    assert abs(p - target) <= 3 * se


def test_ab_singleton_root_edge(cap0, rng):
    K = [(0, 0, 0, 0)]
    w = sample_interlacement(K, 0.0, 2.0, cap0, rng)
    parent, uncovered = aldous_broder_window(w, 0.0)
    assert not uncovered
    trs = [t for t in w.trajectories if t.arrival_time > 0.0]
    tr = min(trs, key=lambda t: t.arrival_time)
    assert parent[(0, 0, 0, 0)] == tr.backward[1]


def test_ab_increasing_t_changes_only_rehit(rng):
    K = [p for p in product(range(-1, 2), repeat=4)]
    cap = capacity.capacity(K, method="exact")
    fld = ExactEscapeField(K)
    wts = np.array([fld.escape(p) for p in K])
    w = sample_interlacement(K, 0.0, 4.0, cap, rng, entry_weights=wts)
    p1, unc1 = aldous_broder_window(w, 0.0)
    p2, unc2 = aldous_broder_window(w, 1.0)
    assert not unc1 and not unc2
    hit = w.hit_sites(0.0, 1.0)
    for x in K:
        if p1[x] != p2[x]:
            assert x in hit


def test_ab_thinning_consistency(rng):
    # trajectories of [0, t1] restricted to [0, u] are a fresh [0, u] sample
    K = [(0, 0, 0, 0), (2, 2, 0, 0)]
    cap = capacity.capacity(K, method="exact")
    fld = ExactEscapeField(K)
    wts = np.array([fld.escape(p) for p in K])
    big_counts, fresh_counts = [], []
    for i in range(1500):
        w = sample_interlacement(K, 0.0, 2.0, cap, rng.substream(i),
                                 entry_weights=wts)
        big_counts.append(sum(tr.arrival_time < 0.7 for tr in w.trajectories))
        w2 = sample_interlacement(K, 0.0, 0.7, cap,
                                  rng.substream(10 ** 6 + i),
                                  entry_weights=wts)
        fresh_counts.append(len(w2.trajectories))
    ks = sstats.ks_2samp(big_counts, fresh_counts)
    assert ks.pvalue > 0.01


def test_past_dynamics_no_trajectories(rng):
    K = [p for p in product(range(-1, 2), repeat=4)]
    cap = capacity.capacity(K, method="exact")
    fld = ExactEscapeField(K)
    wts = np.array([fld.escape(p) for p in K])
    w = sample_interlacement(K, 0.0, 6.0, cap, rng, entry_weights=wts)
    arrivals = sorted(tr.arrival_time for tr in w.trajectories)
    # find a gap with no arrivals
    gaps = [(a, b) for a, b in zip(arrivals, arrivals[1:]) if b - a > 1e-6]
    (a, b) = max(gaps, key=lambda g: g[1] - g[0])
    s = a + (b - a) * 0.25
    t = a + (b - a) * 0.75
    v = (0, 0, 0, 0)
    assert past_dynamics_check(w, s, t, v)
    ps, _ = aldous_broder_window(w, s)
    pt, _ = aldous_broder_window(w, t)
    assert ps == pt


def test_past_dynamics_random_triples(rng):
    K = [p for p in product(range(-1, 2), repeat=4)]
    cap = capacity.capacity(K, method="exact")
    fld = ExactEscapeField(K)
    wts = np.array([fld.escape(p) for p in K])
    gen = rng.generator
    checked = 0
    w = sample_interlacement(K, 0.0, 6.0, cap, rng, entry_weights=wts)
    while checked < 60:
        s, t = np.sort(gen.uniform(0.0, 3.0, 2))
        if t - s < 1e-9:
            continue
        v = K[int(gen.integers(0, len(K)))]
        if v in w.hit_sites(s, t):
            continue
        assert past_dynamics_check(w, float(s), float(t), v)
        checked += 1


def test_past_dynamics_precondition(rng):
    K = [(0, 0, 0, 0)]
    cap = capacity.capacity(K, method="exact")
    w = sample_interlacement(K, 0.0, 8.0, cap, rng)
    tr = w.trajectories[0]
    s = tr.arrival_time - 1e-6
    t = tr.arrival_time + 1e-6
    with pytest.raises(ValueError):
        past_dynamics_check(w, s, t, (0, 0, 0, 0))
