import math

import numpy as np
import pytest
from scipy import stats as sstats

from ustlab import walk
from ustlab.lattice import DIRECTIONS
from ustlab.rng import RngStream
from ustlab.walk import LatticePath, StopTag, cut_times, srw, srw_geometric, srw_no_return, srw_until


def test_srw_zero_steps(rng):
    p = srw((1, 2, 3, 4), 0, rng)
    assert len(p) == 0 and p.start == (1, 2, 3, 4)


def test_srw_step_distribution_uniform(rng):
    p = srw((0, 0, 0, 0), 10 ** 6, rng)
    steps = np.diff(p.sites, axis=0)
    dirs = {tuple(d): i for i, d in enumerate(DIRECTIONS)}
    codes = np.array([dirs[tuple(s)] for s in steps])
    counts = np.bincount(codes, minlength=8)
    assert sstats.chisquare(counts).pvalue > 0.01


def test_srw_mean_square_displacement(rng):
    # E ||X_n||^2 = n exactly, by orthogonality of the unit increments
    n, reps = 10 ** 4, 400
    vals = np.empty(reps)
    for i in range(reps):
        p = srw((0, 0, 0, 0), n, rng.substream(i))
        vals[i] = sum(c * c for c in p.end)
    se = vals.std(ddof=1) / math.sqrt(reps)
    assert abs(vals.mean() - n) <= 3 * se


def test_path_invariants(rng):
    p = srw((0, 0, 0, 0), 500, rng)
    LatticePath(p.sites, validate=True)  # neighbour steps
    s = p.slice(10, 20)
    assert len(s) == 10 and s[0] == p[10] and s[10] == p[20]
    assert p.reversed()[0] == p[500]
    with pytest.raises(ValueError):
        LatticePath.from_points([(0, 0, 0, 0), (2, 0, 0, 0)])


def test_srw_until_start_in_target(rng):
    p, out = srw_until((0, 0, 0, 0), [(0, 0, 0, 0)], 8, 100, rng)
    assert out.tag is StopTag.HIT_TARGET and out.stop_index == 0 and len(p) == 0


def test_srw_until_empty_target(rng):
    for i in range(50):
        _p, out = srw_until((0, 0, 0, 0), [], 6, 10 ** 6, rng.substream(i))
        assert out.tag in (StopTag.ESCAPED, StopTag.HORIZON_REACHED)


def test_srw_until_exactly_one_stop(rng):
    # outcome is the earliest matching stop condition
    for i in range(200):
        p, out = srw_until((0, 0, 0, 0), [(1, 1, 0, 0)], 5, 300, rng.substream(i))
        hit_i = next((t for t, q in enumerate(p) if q == (1, 1, 0, 0)), None)
        esc_i = next((t for t, q in enumerate(p)
                      if max(abs(c) for c in q) > 5), None)
        if out.tag is StopTag.HIT_TARGET:
            assert hit_i == out.stop_index and (esc_i is None)
            assert out.hit_point == (1, 1, 0, 0)
        elif out.tag is StopTag.ESCAPED:
            assert esc_i == out.stop_index and hit_i is None
        else:
            assert len(p) == 300 and hit_i is None and esc_i is None


def test_srw_until_hit_probability_green_ratio(green, rng):
    # P_x(hit 0) = G(x)/G(0); the escape window adds a documented bias
    x = (3, 0, 0, 0)
    target_p = green.value(x) / green.g0
    hits = 0
    reps = 4000
    for i in range(reps):
        _p, out = srw_until(x, [(0, 0, 0, 0)], 256, 10 ** 7, rng.substream(i))
        hits += out.tag is StopTag.HIT_TARGET
    p = hits / reps
    se = math.sqrt(target_p * (1 - target_p) / reps)
    far_bias = green.g0 / 256 ** 2  # return-after-escape tail
    assert abs(p - target_p) <= 3 * se + far_bias


def test_geometric_mean_and_atom(rng):
    t = 5.0
    reps = 20000
    lengths = np.empty(reps)
    for i in range(reps):
        _p, out = srw_geometric((0, 0, 0, 0), t, rng.substream(i))
        assert out.tag is StopTag.GEOMETRIC_KILL
        lengths[i] = out.stop_index
    se = lengths.std(ddof=1) / math.sqrt(reps)
    assert abs(lengths.mean() - t) <= 3 * se
    p0 = (lengths == 0).mean()
    q = 1 / (t + 1)
    assert abs(p0 - q) <= 3 * math.sqrt(q * (1 - q) / reps)


@pytest.mark.parametrize("t", [5.0, 50.0])
def test_geometric_length_chisquare(rng, t):
    reps = 20000
    lengths = np.array([srw_geometric((0, 0, 0, 0), t,
                                      rng.substream(i))[1].stop_index
                        for i in range(reps)])
    kmax = int(np.quantile(lengths, 0.99))
    obs = np.bincount(np.minimum(lengths, kmax + 1), minlength=kmax + 2)
    q = 1 / (t + 1)
    probs = np.array([q * (1 - q) ** k for k in range(kmax + 1)] +
                     [(1 - q) ** (kmax + 1)])
    assert sstats.chisquare(obs, probs * reps).pvalue > 0.01


def test_geometric_memorylessness(rng):
    t = 20.0
    lengths = np.array([srw_geometric((0, 0, 0, 0), t,
                                      rng.substream(i))[1].stop_index
                        for i in range(20000)])
    k = 10
    residual = lengths[lengths >= k] - k
    ks = sstats.ks_2samp(residual, lengths)
    assert ks.pvalue > 0.01


def test_no_return_postcondition(rng):
    for i in range(300):
        p = srw_no_return((0, 0, 0, 0), 200, 64, rng.substream(i))
        assert (0, 0, 0, 0) not in list(p)[1:]


def test_no_return_acceptance_rate(green, rng):
    # acceptance ~ escape probability 1 - theta = 0.8068
    total = 0
    reps = 3000
    for i in range(reps):
        _p, attempts = srw_no_return((0, 0, 0, 0), 4000, 1024,
                                     rng.substream(i), return_attempts=True)
        total += attempts
    rate = reps / total
    target = 1 - green.return_probability
    se = math.sqrt(target * (1 - target) / total)
    assert abs(rate - target) <= 3 * se + 1e-3


def test_no_return_first_step_uniform(rng):
    firsts = []
    dirs = {tuple(d): i for i, d in enumerate(DIRECTIONS)}
    for i in range(8000):
        p = srw_no_return((0, 0, 0, 0), 50, 64, rng.substream(i))
        firsts.append(dirs[tuple(np.array(p[1]) - np.array(p[0]))])
    counts = np.bincount(np.array(firsts), minlength=8)
    assert sstats.chisquare(counts).pvalue > 0.01


def test_cut_times_self_avoiding():
    p = LatticePath.from_points([(i, 0, 0, 0) for i in range(6)])
    assert list(cut_times(p)) == list(range(6))


def test_cut_times_loop_at_start():
    p = LatticePath.from_points([(0, 0, 0, 0), (1, 0, 0, 0), (0, 0, 0, 0)])
    ct = list(cut_times(p))
    assert 0 not in ct and 2 in ct


def test_cut_times_matches_bruteforce(rng):
    for i in range(40):
        p = srw((0, 0, 0, 0), 60, rng.substream(i))
        sites = list(p)
        expected = [t for t in range(len(p) + 1)
                    if not (set(sites[: t + 1]) & set(sites[t + 1:]))]
        assert list(cut_times(p)) == expected
