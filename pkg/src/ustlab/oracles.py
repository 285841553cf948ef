"""Independent correctness oracles for the structural verification suite.

Each verifier draws its own randomness, evaluates an identity by a method
independent of the implementation it checks (brute force, exhaustive
enumeration, exact counting), and returns (passed, detail).  The same
functions back `lab verify --suite structural` and the acceptance tests.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import stats as sstats

from . import capacity, forest, interlace, lerw, sandpile, walk
from .lattice import Box, neighbors
from .rng import RngStream


def first_cycle_erase(points: list) -> list:
    """Reference loop erasure: repeatedly delete the first cycle.

    Scans for the earliest time whose site was seen before and removes the
    enclosed cycle, restarting each time; provably equal to chronological
    erasure, and independent of the production stack algorithm.
    """
    pts = list(points)
    while True:
        seen = {}
        cut = None
        for i, p in enumerate(pts):
            if p in seen:
                cut = (seen[p], i)
                break
            seen[p] = i
        if cut is None:
            return pts
        a, b = cut
        pts = pts[: a + 1] + pts[b + 1:]


def verify_loop_erase(rng: RngStream, n_paths: int = 10000,
                      max_len: int = 50) -> tuple[bool, dict]:
    """Production erasure equals first-cycle removal; ell/rho duality holds."""
    gen = rng.generator
    for i in range(n_paths):
        steps = int(gen.integers(0, max_len + 1))
        path = walk.srw((0, 0, 0, 0), steps, rng.substream(i))
        le = lerw.loop_erase(path)
        oracle = first_cycle_erase(list(path))
        if list(le.le_path) != oracle:
            return False, {"case": i, "path_steps": steps}
        # duality on the same instance
        ell = le.ell
        rho = le.rho_array
        for n in range(len(ell)):
            lhs = ell[n] <= np.arange(steps + 1)
            if not np.array_equal(lhs, rho >= n):
                return False, {"case": i, "duality_index": n}
    return True, {"paths": n_paths}


def verify_reversibility(rng: RngStream, cases: int = 20, max_len: int = 6
                         ) -> tuple[bool, dict]:
    """Exhaustive-walk check of the loop-erasure reversal identity."""
    gen = rng.generator
    worst = 0.0
    for i in range(cases):
        eta_steps = int(gen.integers(0, 3))
        eta = lerw.loop_erase(walk.srw((0, 0, 0, 0), eta_steps,
                                       rng.substream(2 * i))).le_path
        a_size = int(gen.integers(0, 3))
        A = [tuple(int(c) for c in gen.integers(-2, 3, size=4))
             for _ in range(a_size)]
        A = [p for p in A if p not in set(eta)]
        res = lerw.check_reversibility(eta, A, max_len)
        worst = max(worst, res["deviation"])
        if res["deviation"] >= 1e-12:
            return False, {"case": i, "deviation": res["deviation"]}
    return True, {"cases": cases, "max_deviation": worst}


def verify_domain_markov(rng: RngStream, cases: int = 10, max_len: int = 8,
                         mean_t: float = 1.0) -> tuple[bool, dict]:
    """Truncated geometric enumeration of the domain Markov identity."""
    gen = rng.generator
    dirs = [(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1),
            (-1, 0, 0, 0), (0, -1, 0, 0)]
    details = []
    for i in range(cases):
        d1 = dirs[int(gen.integers(0, len(dirs)))]
        d2 = dirs[int(gen.integers(0, len(dirs)))]
        omega = walk.LatticePath.from_points([(0, 0, 0, 0), d1])
        eta_end = tuple(a + b for a, b in zip(d1, d2))
        if eta_end == (0, 0, 0, 0):
            d2 = dirs[(dirs.index(d2) + 1) % len(dirs)]
            eta_end = tuple(a + b for a, b in zip(d1, d2))
        eta = walk.LatticePath.from_points([d1, eta_end])
        res = lerw.check_domain_markov(mean_t, omega, eta, max_len)
        details.append({"deviation": res["deviation"],
                        "bound": res["truncation_bound"]})
        if res["deviation"] > res["truncation_bound"]:
            return False, {"case": i, **res}
    return True, {"cases": cases, "details": details}


def verify_abelian(rng: RngStream, instances: int = 100, radius: int = 3
                   ) -> tuple[bool, dict]:
    """Schedule independence: the FIFO engine against a randomized
    one-topple-at-a-time reference, exact equality of configs and odometers."""
    box = Box(radius)
    gen = rng.generator
    for i in range(instances):
        heights = gen.integers(0, 16, size=box.n_sites).astype(np.int64)
        cfg = sandpile.SandpileConfig(box, heights.copy())
        stable, odo = sandpile.stabilize(cfg)
        ref_h, ref_odo = _stabilize_reference(heights.copy(), box,
                                              rng.substream(i).generator)
        if not (np.array_equal(stable.heights, ref_h)
                and np.array_equal(odo, ref_odo)):
            return False, {"instance": i}
    return True, {"instances": instances, "radius": radius}


def _stabilize_reference(heights: np.ndarray, box: Box, gen) -> tuple:
    """Topple one random unstable site at a time (pure python)."""
    L = box.side
    odo = np.zeros_like(heights)
    while True:
        unstable = np.flatnonzero(heights >= 8)
        if unstable.size == 0:
            return heights, odo
        idx = int(unstable[gen.integers(0, unstable.size)])
        heights[idx] -= 8
        odo[idx] += 1
        p = box.site_of(idx)
        for q in neighbors(p):
            if box.contains(q):
                heights[box.index_of(q)] += 1


def verify_bijection(rng: RngStream, wilson_samples: int = 1000,
                     radius: int = 6) -> tuple[bool, dict]:
    """Burning bijection: exhaustive bijectivity on the 2x2 patch against the
    matrix-tree count, plus round trips on Wilson samples."""
    patch = sandpile.Patch((2, 2, 1, 1))
    recs = sandpile.enumerate_recurrent(patch)
    trees = sandpile.enumerate_patch_trees(patch)
    count = forest.spanning_tree_count(forest.patch_2x2_graph())
    if not (len(recs) == len(trees) == count):
        return False, {"recurrent": len(recs), "trees": len(trees),
                       "matrix_tree": count}
    # bijectivity both ways on the patch
    seen_heights = set()
    tree_keys = {tuple(t.tolist()) for t in trees}
    for t in trees:
        cfg = sandpile.heights_from_parents(t, patch)
        key = tuple(cfg.heights.tolist())
        if key in seen_heights:
            return False, {"noninjective_tree": t.tolist()}
        seen_heights.add(key)
        if not sandpile.is_recurrent(cfg):
            return False, {"nonrecurrent_image": t.tolist()}
        back = sandpile.parents_from_heights(cfg)
        if tuple(back.tolist()) not in tree_keys or not np.array_equal(back, t):
            return False, {"roundtrip_tree": t.tolist()}
    rec_keys = {tuple(c.heights.tolist()) for c in recs}
    if seen_heights != rec_keys:
        return False, {"image_mismatch": True}
    # round trips on Wilson samples at the working radius
    box = Box(radius)
    for i in range(wilson_samples):
        f = forest.wilson_wired(box, rng.substream(i))
        cfg = sandpile.tree_to_recurrent(f)
        back = sandpile.recurrent_to_tree(cfg)
        if not np.array_equal(back.parent_dir, f.parent_dir):
            return False, {"wilson_roundtrip_case": i}
    return True, {"patch_count": count, "wilson_samples": wilson_samples}


def verify_matrix_tree(rng: RngStream, samples: int = 100000,
                       p_threshold: float = 0.01) -> tuple[bool, dict]:
    """Wilson uniformity: chi-square of sampled trees against the uniform law
    over the matrix-tree count, on two fixed tiny wired graphs."""
    out = {}
    for name, graph in (("z4-slice", forest.z4_slice_graph()),
                        ("2x2-patch", forest.patch_2x2_graph())):
        count = forest.spanning_tree_count(graph)
        freq: dict[tuple, int] = {}
        sub = rng.substream(0 if name == "z4-slice" else 1)
        for i in range(samples):
            tree = forest.wilson_tiny(graph, sub.substream(i))
            freq[tree] = freq.get(tree, 0) + 1
        if len(freq) > count:
            return False, {name: {"distinct": len(freq), "expected": count}}
        observed = np.array(list(freq.values()) + [0] * (count - len(freq)))
        chi = sstats.chisquare(observed)
        out[name] = {"count": count, "distinct_seen": len(freq),
                     "p_value": float(chi.pvalue)}
        if chi.pvalue <= p_threshold:
            return False, out
    return True, out


def verify_poisson_counts(rng: RngStream, windows: int = 10000,
                          p_threshold: float = 0.01) -> tuple[bool, dict]:
    """Interlacement trajectory counts against Poisson(dt cap(K))."""
    K = [(0, 0, 0, 0), (2, 0, 0, 0)]
    cap_est = capacity.capacity(K, method="exact")
    dt = 0.15
    lam = dt * cap_est.value
    fld = capacity.ExactEscapeField(K)
    weights = np.array([fld.escape(p) for p in K])
    counts = np.zeros(windows, dtype=np.int64)
    for i in range(windows):
        w = interlace.sample_interlacement(K, 0.0, dt, cap_est,
                                           rng.substream(i),
                                           entry_weights=weights)
        counts[i] = len(w.trajectories)
    kmax = max(int(counts.max()), 4)
    observed = np.bincount(counts, minlength=kmax + 1)
    probs = np.array([math.exp(-lam) * lam ** k / math.factorial(k)
                      for k in range(kmax + 1)])
    probs[-1] = 1.0 - probs[:-1].sum()
    # pool tail cells with tiny expectation
    exp = probs * windows
    cut = int(np.argmax((exp < 5) & (np.arange(kmax + 1) > lam)))
    if cut > 0:
        observed = np.concatenate([observed[:cut], [observed[cut:].sum()]])
        exp = np.concatenate([exp[:cut], [exp[cut:].sum()]])
    chi = sstats.chisquare(observed, exp)
    detail = {"lambda": lam, "p_value": float(chi.pvalue),
              "mean": float(counts.mean())}
    return bool(chi.pvalue > p_threshold), detail


STRUCTURAL_SUITE: dict[str, Callable[[RngStream], tuple[bool, dict]]] = {
    "loop-erase-oracle": lambda rng: verify_loop_erase(rng, 2000, 50),
    "reversibility": lambda rng: verify_reversibility(rng, 8, 5),
    "domain-markov": lambda rng: verify_domain_markov(rng, 5, 7),
    "abelian": lambda rng: verify_abelian(rng, 30),
    "burning-bijection": lambda rng: verify_bijection(rng, 200),
    "matrix-tree-uniformity": lambda rng: verify_matrix_tree(rng, 20000),
    "poisson-rate": lambda rng: verify_poisson_counts(rng, 2000),
}
