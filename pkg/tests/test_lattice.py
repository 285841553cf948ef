import math

import numpy as np
import pytest

from ustlab import lattice
from ustlab.lattice import Box, GreenTable, dirichlet_solve, green_estimate, neighbors
from ustlab.rng import RngStream


def test_neighbors_of_origin_are_unit_vectors():
    nbrs = neighbors((0, 0, 0, 0))
    assert len(nbrs) == 8
    assert len(set(nbrs)) == 8
    for q in nbrs:
        assert sum(abs(c) for c in q) == 1


def test_neighbors_symmetric_adjacency():
    p = (3, -1, 2, 7)
    for q in neighbors(p):
        assert p in neighbors(q)


def test_neighbors_euclidean_norm_one():
    p = (5, 5, 5, 5)
    for q in neighbors(p):
        assert sum((a - b) ** 2 for a, b in zip(p, q)) == 1


def test_neighbors_overflow_is_fatal():
    with pytest.raises(OverflowError):
        neighbors((2 ** 62, 0, 0, 0))


def test_box_membership_and_indexing():
    box = Box(3)
    assert box.contains((3, -3, 0, 2))
    assert not box.contains((4, 0, 0, 0))
    for p in [(0, 0, 0, 0), (3, 3, 3, 3), (-3, 1, -2, 0)]:
        assert box.site_of(box.index_of(p)) == p


def test_dirichlet_constant_boundary():
    # constants are harmonic: no absorbing set, boundary 1 -> field is 1
    f = dirichlet_solve(Box(4), (), 1.0)
    assert abs(f[(0, 0, 0, 0)] - 1.0) < 1e-8
    assert abs(f[(2, -1, 3, 0)] - 1.0) < 1e-8


def test_dirichlet_absorbing_everything():
    box = Box(2)
    f = dirichlet_solve(box, list(box.sites()), 1.0)
    assert np.all(f.values == 0.0)


def test_dirichlet_linear_profile():
    # gambler's-ruin oracle: h(x) = (x0 + r) / (2r) is discrete harmonic, so
    # imposing it on the shell must reproduce it exactly in the interior
    r = 5
    box = Box(r)

    def linear(coords):
        return (coords[:, 0] + r) / (2.0 * r)

    f = dirichlet_solve(box, (), boundary_field=linear)
    for p in [(0, 0, 0, 0), (2, 1, -1, 3), (-4, 0, 2, 0)]:
        assert abs(f[p] - (p[0] + r) / (2 * r)) < 1e-8


def test_dirichlet_mean_value_property():
    box = Box(4)
    f = dirichlet_solve(box, [(0, 0, 0, 0)], 1.0)
    for p in [(2, 0, 0, 0), (1, 1, -1, 0), (3, 3, 0, 0)]:
        assert abs(f[p] - f.neighbor_mean(p)) < 1e-9


def test_dirichlet_radius_cap():
    with pytest.raises(ValueError):
        dirichlet_solve(Box(49), (), 1.0)


def test_green_estimate_reproducible(rng):
    a = green_estimate((0, 0, 0, 0), 200, 500, rng)
    b = green_estimate((0, 0, 0, 0), 200, 500, rng)
    assert a.value == b.value


def test_green_estimate_matches_known_value(rng):
    est = green_estimate((0, 0, 0, 0), 30000, 4000, rng)
    tol = 3 * est.stderr + est.metadata["tail_bound"]
    assert abs(est.value - 1.2394671) < tol
    assert est.metadata["tail_bound"] == 8.0 / 4000


def test_green_estimate_symmetry(rng):
    x = (2, 1, 0, 0)
    mx = (-2, -1, 0, 0)
    a = green_estimate(x, 60000, 1500, rng.substream(0))
    b = green_estimate(mx, 60000, 1500, rng.substream(1))
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_green_table_consistency(green):
    # G(0) = 1 + G(e0) is the exact one-step identity at the origin
    assert abs(green.g0 - 1.2394671) < 1e-5
    assert abs(green.value((1, 0, 0, 0)) - (green.g0 - 1.0)) < 1e-9
    # permutation / sign symmetry
    assert abs(green.value((1, 2, 0, 3)) - green.value((-2, 3, 1, 0))) < 1e-9


def test_green_table_farfield_band(green):
    # G(x) (|x|^2 + 1) stays within a fixed constant band over |x| in [4, 64]
    vals = []
    for x in [(4, 0, 0, 0), (4, 4, 4, 4), (8, 3, 0, 1), (16, 0, 0, 0),
              (16, 16, 16, 16), (23, 23, 0, 0), (40, 20, 10, 5),
              (64, 0, 0, 0)]:
        n2 = sum(c * c for c in x)
        if not 16 <= n2 <= 64 ** 2:
            continue
        vals.append(green.value(x) * (n2 + 1))
    assert max(vals) / min(vals) < 1.5
    # and the band sits near the far-field constant 2/pi^2
    assert all(abs(v - 2 / math.pi ** 2) < 0.05 for v in vals)


def test_green_estimate_vs_table(green, rng):
    x = (3, 2, 1, 0)
    est = green_estimate(x, 40000, 3000, rng, symmetrize=True)
    tol = 3 * est.stderr + est.metadata["tail_bound"]
    assert abs(est.value - green.value(x)) < tol


def test_return_probability_identity(green):
    # P(return) = 1 - 1/G(0)
    assert abs(green.return_probability - 0.1932017) < 1e-5
