import math
from itertools import product

import numpy as np
import pytest

from ustlab import capacity
from ustlab.capacity import (CapacityEstimate, ExactEscapeField, chi_tilde,
                             capacity as cap_of, decomposition_check,
                             escape_probability)
from ustlab.lattice import neighbors
from ustlab.rng import RngStream


def test_escape_isolated_site(green):
    est = escape_probability((0, 0, 0, 0), [(0, 0, 0, 0)])
    assert abs(est.value - 0.8067984) < 1e-5


def test_escape_routes_agree(green, rng):
    gen = rng.generator
    pts = list({tuple(int(c) for c in gen.integers(-4, 5, 4)) for _ in range(6)})
    fg = ExactEscapeField(pts, via="green")
    fd = ExactEscapeField(pts, via="dirichlet")
    for p in pts:
        assert abs(fg.escape(p) - fd.escape(p)) < 1e-5


def test_escape_surrounded_site():
    A = [(0, 0, 0, 0)] + neighbors((0, 0, 0, 0))
    fld = ExactEscapeField(A)
    assert fld.escape((0, 0, 0, 0)) <= 1e-9


def test_escape_monotone_in_set(green, rng):
    gen = rng.generator
    for _ in range(10):
        base = [(0, 0, 0, 0)] + [tuple(int(c) for c in gen.integers(-3, 4, 4))
                                 for _ in range(3)]
        base = list(dict.fromkeys(base))
        extra = base + [tuple(int(c) for c in gen.integers(-3, 4, 4))
                        for _ in range(3)]
        extra = list(dict.fromkeys(extra))
        fa = ExactEscapeField(base)
        fb = ExactEscapeField(extra)
        for p in base:
            assert fb.escape(p) <= fa.escape(p) + 1e-9


def test_escape_mc_matches_exact(green, rng):
    A = [(0, 0, 0, 0), (1, 0, 0, 0), (0, 2, 0, 0)]
    exact = ExactEscapeField(A)
    est = escape_probability((0, 0, 0, 0), A, method="mc", rng=rng,
                             n_walks=30000, mc_radius=64)
    assert abs(est.value - exact.escape((0, 0, 0, 0))) <= 3 * est.stderr + 2e-3


def test_capacity_empty_and_singleton(green):
    assert cap_of([]).value == 0.0
    c = cap_of([(0, 0, 0, 0)])
    assert abs(c.value - 6.45439) < 1e-4


def test_capacity_far_additivity(green):
    c1 = cap_of([(0, 0, 0, 0)]).value
    c2 = cap_of([(0, 0, 0, 0), (14, 0, 0, 0)]).value
    # two far sites: additive up to the G(d) cross term
    assert c2 <= 2 * c1
    assert c2 >= 2 * c1 - 2 * 8 * 0.003


def test_capacity_monotone_subadditive(green, rng):
    gen = rng.generator
    for _ in range(15):
        A = list({tuple(int(c) for c in gen.integers(-4, 5, 4)) for _ in range(4)})
        B = list({tuple(int(c) for c in gen.integers(-4, 5, 4)) for _ in range(4)})
        ca = cap_of(A).value
        cb = cap_of(B).value
        cu = cap_of(list(dict.fromkeys(A + B))).value
        assert ca <= cu + 1e-6
        assert cu <= ca + cb + 1e-6


def test_capacity_estimate_bounds():
    with pytest.raises(ValueError):
        CapacityEstimate(-1.0, 0.0, "exact")
    c = cap_of([(0, 0, 0, 0), (5, 5, 0, 0)])
    assert c.value <= 8 * 2  # cap <= 8 |A|


def test_chi_tilde_empty(green):
    assert chi_tilde([(0, 0, 0, 0)], []).value == 0.0


def test_chi_tilde_singletons_plugin(green):
    # chi~({x},{y}) = 8 esc^2 G(x - y) exactly for singletons
    x, y = (0, 0, 0, 0), (3, 1, 0, 0)
    est = chi_tilde([x], [y])
    esc = ExactEscapeField([x]).escape(x)
    from ustlab.lattice import green_table

    expected = 8 * esc * esc * green_table().value((3, 1, 0, 0))
    assert abs(est.value - expected) < 1e-6


def test_chi_tilde_monotone(green, rng):
    gen = rng.generator
    for _ in range(8):
        A = list({tuple(int(c) for c in gen.integers(-3, 4, 4)) for _ in range(3)})
        B = list({tuple(int(c) for c in gen.integers(-3, 4, 4)) for _ in range(3)})
        A2 = list(dict.fromkeys(
            A + [tuple(int(c) for c in gen.integers(-3, 4, 4))]))
        B2 = list(dict.fromkeys(
            B + [tuple(int(c) for c in gen.integers(-3, 4, 4))]))
        assert chi_tilde(A, B).value <= chi_tilde(A2, B2).value + 1e-6


def test_chi_tilde_lower_bound_for_union(green, rng):
    # cap(A u B) >= cap A + cap B - chi~(A,B) - chi~(B,A)
    gen = rng.generator
    for _ in range(10):
        A = list({tuple(int(c) for c in gen.integers(-4, 5, 4)) for _ in range(4)})
        B = list({tuple(int(c) for c in gen.integers(-4, 5, 4)) for _ in range(4)})
        cu = cap_of(list(dict.fromkeys(A + B))).value
        lower = (cap_of(A).value + cap_of(B).value
                 - chi_tilde(A, B).value - chi_tilde(B, A).value)
        assert cu >= lower - 1e-6


def test_decomposition_empty_B(green):
    r = decomposition_check([(0, 0, 0, 0)], [])
    assert r.epsilon == 0.0 and r.chi_ab == 0.0 and r.chi_ba == 0.0


def test_decomposition_equal_sets(green):
    A = [(0, 0, 0, 0), (1, 0, 0, 0)]
    r = decomposition_check(A, A)
    assert r.within_tolerance
    assert abs(r.epsilon - r.cap_a) < 1e-6  # eps = cap(A) when A = B


def test_decomposition_disjoint_sets(green, rng):
    gen = rng.generator
    for _ in range(10):
        A = list({tuple(int(c) for c in gen.integers(-5, 6, 4)) for _ in range(5)})
        B = list({tuple(int(c) for c in gen.integers(-5, 6, 4)) for _ in range(5)})
        B = [p for p in B if p not in set(A)] or [(5, 5, 5, 5)]
        r = decomposition_check(A, B)
        assert r.within_tolerance
        assert -1e-3 <= r.epsilon <= r.cap_intersection + 1e-3


def test_last_exit_identity(green, rng):
    # P_x(tau_A < inf) = sum_a G(x, a) P_a(no return), MC versus exact
    from ustlab import _kwalk
    from ustlab.lattice import pack_points

    A = [(0, 0, 0, 0), (2, 0, 0, 0), (0, 1, 1, 0)]
    fld = ExactEscapeField(A)
    x = (5, 0, 0, 0)
    expected = fld.hit_probability(x)
    keys, shift = _kwalk.hashset_build(pack_points(A))
    reps = 30000
    hits = 0
    for i in range(reps):
        hit, _t = _kwalk.k_hit_indicator(rng.substream(i).kernel_seed(0),
                                         keys, shift, *x, 50000, False)
        hits += hit
    p = hits / reps
    se = math.sqrt(expected * (1 - expected) / reps)
    assert abs(p - expected) <= 3 * se + 2e-3


def test_box_escape_geometry(green):
    K = [p for p in product(range(-1, 2), repeat=4)]
    fld = ExactEscapeField(K)
    corner = fld.escape((1, 1, 1, 1))
    face = fld.escape((1, 0, 0, 0))
    center = fld.escape((0, 0, 0, 0))
    assert corner > face > center  # corners escape more easily
    assert center < 1e-6  # deep interior cannot avoid the shell


def test_large_set_dirichlet_route(green):
    # sets beyond the dense-system cap route through the field solver
    K = [p for p in product(range(-2, 3), repeat=4)]  # 625 sites
    fld = ExactEscapeField(K)
    assert fld.via == "dirichlet"
    cap = 8 * sum(fld.escape(p) for p in K)
    assert 0 < cap <= 8 * len(K)
    # cross-check a corner value against the green route on the same set is
    # impossible (size cap); instead verify against monotonicity: the bigger
    # box escapes harder per site than the smaller one at matched corners
    small = ExactEscapeField([p for p in product(range(-1, 2), repeat=4)])
    assert fld.escape((2, 2, 2, 2)) <= small.escape((1, 1, 1, 1)) + 1e-6


def test_capacity_mc_packed_matches_exact(green, rng):
    from ustlab.lattice import pack_points

    A = [(0, 0, 0, 0), (1, 0, 0, 0), (1, 1, 0, 0), (0, 1, 0, 0)]
    exact = 8 * sum(ExactEscapeField(A).escape(p) for p in A)
    est = capacity.capacity_mc_packed(pack_points(A), rng, n_walks=40000,
                                      radius=64)
    assert abs(est.value - exact) <= 3 * est.stderr + 0.05
