"""Z^4 geometry, Green's function estimation, and the Dirichlet-problem oracle.

Sites are 4-tuples of Python ints.  Boxes are centred sup-norm balls
Lambda_r = [-r, r]^4 with an implicit wired boundary: everything outside the
box is identified with a single sink vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from . import _kwalk
from ._ksolve import rb_residual, rb_sweep
from .rng import RngStream

Point = tuple[int, int, int, int]

ORIGIN: Point = (0, 0, 0, 0)

#: fixed neighbour order: +e0, -e0, +e1, -e1, +e2, -e2, +e3, -e3
DIRECTIONS: tuple[Point, ...] = tuple(tuple(int(c) for c in row) for row in _kwalk.DIRECTIONS)

#: vertex conductance of Z^4 with unit edge conductances
C_VERTEX = 8

_COORD_GUARD = 2 ** 62

DEFAULT_SOLVER_CAP = 48

# leading far-field coefficient of the Green's function: G(x) ~ 2 / (pi^2 |x|^2)
GREEN_FARFIELD_COEFF = 2.0 / math.pi ** 2


class SolverError(RuntimeError):
    """Dirichlet relaxation failed to reach the target residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def as_point(p) -> Point:
    t = tuple(int(c) for c in p)
    if len(t) != 4:
        raise ValueError(f"a Z^4 site needs 4 coordinates, got {len(t)}")
    return t


def neighbors(p: Point) -> list[Point]:
    """The 8 sites at l1-distance 1, in the fixed deterministic order."""
    x0, x1, x2, x3 = p
    if max(abs(x0), abs(x1), abs(x2), abs(x3)) >= _COORD_GUARD:
        raise OverflowError("site coordinate too large for 64-bit lattice arithmetic")
    return [
        (x0 + 1, x1, x2, x3), (x0 - 1, x1, x2, x3),
        (x0, x1 + 1, x2, x3), (x0, x1 - 1, x2, x3),
        (x0, x1, x2 + 1, x3), (x0, x1, x2 - 1, x3),
        (x0, x1, x2, x3 + 1), (x0, x1, x2, x3 - 1),
    ]


def norm_inf(p: Point) -> int:
    return max(abs(c) for c in p)


def norm2_sq(p: Point) -> int:
    return sum(c * c for c in p)


def pack_points(points: Iterable[Point]) -> np.ndarray:
    arr = np.asarray(list(points), dtype=np.int64).reshape(-1, 4)
    return _kwalk.pack_array(arr)


def unpack_points(packed: np.ndarray) -> list[Point]:
    arr = _kwalk.unpack_array(np.asarray(packed, dtype=np.int64))
    return [tuple(int(c) for c in row) for row in arr]


@dataclass(frozen=True)
class Box:
    """The site set Lambda_r with a wired (single-sink) boundary."""

    radius: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("box radius must be >= 0")

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def n_sites(self) -> int:
        return self.side ** 4

    def contains(self, p: Point) -> bool:
        return norm_inf(p) <= self.radius

    def index_of(self, p: Point) -> int:
        """Row-major dense index of an in-box site."""
        r, L = self.radius, self.side
        i0, i1, i2, i3 = (c + r for c in p)
        return ((i0 * L + i1) * L + i2) * L + i3

    def site_of(self, idx: int) -> Point:
        r, L = self.radius, self.side
        i3 = idx % L
        idx //= L
        i2 = idx % L
        idx //= L
        i1 = idx % L
        i0 = idx // L
        return (i0 - r, i1 - r, i2 - r, i3 - r)

    def sites(self) -> Iterator[Point]:
        rng = range(-self.radius, self.radius + 1)
        return product(rng, rng, rng, rng)

    def boundary_shell(self) -> Iterator[Point]:
        for p in self.sites():
            if norm_inf(p) == self.radius:
                yield p


@dataclass
class ScalarField:
    """Real values (probabilities or potentials) on the sites of a box."""

    box: Box
    values: np.ndarray  # shape (L, L, L, L)

    def __getitem__(self, p: Point) -> float:
        if not self.box.contains(p):
            raise KeyError(f"site {p} outside the box")
        r = self.box.radius
        return float(self.values[p[0] + r, p[1] + r, p[2] + r, p[3] + r])

    def neighbor_mean(self, p: Point) -> float:
        return sum(self[q] for q in neighbors(p)) / 8.0


@dataclass
class Estimate:
    """Monte Carlo estimate with standard error and truncation metadata."""

    value: float
    stderr: float
    metadata: dict = field(default_factory=dict)


def green_estimate(x: Point, n_samples: int, horizon: int, rng: RngStream,
                   symmetrize: bool = False) -> Estimate:
    """MC estimate of G(x): expected visits to x by a walk from 0.

    Walks run a fixed horizon; the neglected tail is bounded by 8/horizon
    (local CLT) and recorded in the metadata.  With symmetrize=True the
    visits to the full symmetry orbit of x are counted and divided by the
    orbit size, which shrinks the variance by roughly the orbit size.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = as_point(x)
    if symmetrize:
        orbit = set()
        for perm in _permutations4():
            q = tuple(x[i] for i in perm)
            for signs in product((1, -1), repeat=4):
                orbit.add(tuple(s * c for s, c in zip(signs, q)))
        targets = sorted(orbit)
    else:
        targets = [x]
    keys, shift = _kwalk.hashset_build(pack_points(targets))
    total, total_sq = _kwalk.k_green_visits(
        rng.kernel_seed(0), keys, shift, float(len(targets)), horizon, n_samples)
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    stderr = math.sqrt(var / n_samples)
    return Estimate(mean, stderr, {
        "horizon": horizon,
        "n_samples": n_samples,
        "tail_bound": 8.0 / horizon,
        "orbit_size": len(targets),
    })


def _permutations4():
    from itertools import permutations

    return list(permutations(range(4)))


def dirichlet_solve(box: Box,
                    absorbing: Iterable[Point] = (),
                    boundary_value: float = 1.0,
                    interior_source: Optional[dict] = None,
                    boundary_field: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    tol: float = 1e-10,
                    max_sweeps: int = 10 ** 6,
                    omega: Optional[float] = None,
                    solver_cap: int = DEFAULT_SOLVER_CAP) -> ScalarField:
    """Solve the wired-box Dirichlet problem by red-black relaxation.

    The returned field h satisfies h = 0 on the absorbing set, h = boundary
    data on the boundary shell ||x||_inf = radius, and the discrete
    mean-value property (plus interior_source, if given) at every other site,
    to max-norm residual <= tol.

    boundary_field, when given, overrides the constant boundary_value; it
    maps an (n, 4) array of shell coordinates to n values.  omega defaults to
    the near-optimal over-relaxation factor for the box (omega = 1 is plain
    Gauss-Seidel).
    """
    if box.radius > solver_cap:
        raise ValueError(f"box radius {box.radius} exceeds solver cap {solver_cap}")
    L = box.side
    N = L ** 4
    f = np.zeros(N, dtype=np.float64)
    fixed = np.zeros(N, dtype=np.uint8)
    src = np.zeros(N, dtype=np.float64)

    r = box.radius
    # boundary shell: all sites with some coordinate at +-r
    shell_val = np.full(L, False)
    shell_val[0] = shell_val[L - 1] = True
    grid = np.indices((L, L, L, L))
    on_shell = shell_val[grid[0]] | shell_val[grid[1]] | shell_val[grid[2]] | shell_val[grid[3]]
    fixed_arr = fixed.reshape(L, L, L, L)
    f_arr = f.reshape(L, L, L, L)
    fixed_arr[on_shell] = 1
    if boundary_field is None:
        f_arr[on_shell] = boundary_value
    else:
        coords = np.argwhere(on_shell).astype(np.int64) - r
        f_arr[on_shell] = boundary_field(coords)

    for p in absorbing:
        p = as_point(p)
        if not box.contains(p):
            raise ValueError(f"absorbing site {p} outside the box")
        idx = box.index_of(p)
        fixed[idx] = 1
        f[idx] = 0.0

    if interior_source:
        # h(x) = mean of neighbours + v(x), i.e. (I - P) h = v
        for p, v in interior_source.items():
            p = as_point(p)
            idx = box.index_of(p)
            if fixed[idx]:
                raise ValueError(f"source site {p} is fixed")
            src[idx] = float(v)

    if omega is None:
        omega = 2.0 / (1.0 + math.sin(math.pi / L))

    check_every = max(8, L // 2)
    sweeps = 0
    residual = math.inf
    while sweeps < max_sweeps:
        rb_sweep(f, fixed, src, L, omega, 0)
        rb_sweep(f, fixed, src, L, omega, 1)
        sweeps += 1
        if sweeps % check_every == 0 or sweeps >= max_sweeps:
            residual = float(rb_residual(f, fixed, src, L))
            if residual <= tol:
                return ScalarField(box, f.reshape(L, L, L, L))
    raise SolverError(f"no convergence after {sweeps} sweeps", residual)


class GreenTable:
    """High-accuracy G(x) on a window, from one sourced Dirichlet solve.

    The solve places a unit source at 0 and imposes the far-field law
    2/(pi^2 |x|^2) on the boundary shell, so the truncation error is
    O(radius^-4) by the maximum principle.  Values beyond the window fall
    back to the far-field formula.
    """

    def __init__(self, radius: int = 24, tol: float = 1e-10):
        box = Box(radius)

        def farfield(coords: np.ndarray) -> np.ndarray:
            sq = (coords.astype(np.float64) ** 2).sum(axis=1)
            return GREEN_FARFIELD_COEFF / sq

        fld = dirichlet_solve(
            box,
            absorbing=(),
            interior_source={ORIGIN: 1.0},
            boundary_field=farfield,
            tol=tol,
        )
        self.radius = radius
        self._values = fld.values
        self.g0 = fld[ORIGIN]

    def value(self, p: Point) -> float:
        p = as_point(p)
        if norm_inf(p) <= self.radius:
            r = self.radius
            return float(self._values[p[0] + r, p[1] + r, p[2] + r, p[3] + r])
        return GREEN_FARFIELD_COEFF / norm2_sq(p)

    def value_array(self, dx: np.ndarray) -> np.ndarray:
        """Vectorised G over an (n, 4) array of displacements."""
        dx = np.asarray(dx, dtype=np.int64)
        r = self.radius
        inside = np.abs(dx).max(axis=1) <= r
        out = np.empty(dx.shape[0], dtype=np.float64)
        din = dx[inside] + r
        out[inside] = self._values[din[:, 0], din[:, 1], din[:, 2], din[:, 3]]
        far = dx[~inside].astype(np.float64)
        out[~inside] = GREEN_FARFIELD_COEFF / (far * far).sum(axis=1)
        return out

    def value_between(self, x: Point, y: Point) -> float:
        return self.value(tuple(a - b for a, b in zip(x, y)))

    @property
    def return_probability(self) -> float:
        """P(walk from 0 returns to 0) = 1 - 1/G(0)."""
        return 1.0 - 1.0 / self.g0


_GREEN_TABLE: Optional[GreenTable] = None


def green_table(radius: int = 24) -> GreenTable:
    """Shared Green's-function table (built once per process)."""
    global _GREEN_TABLE
    if _GREEN_TABLE is None or _GREEN_TABLE.radius < radius:
        _GREEN_TABLE = GreenTable(radius)
    return _GREEN_TABLE
