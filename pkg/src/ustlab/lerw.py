"""Chronological loop-erasure with full bookkeeping, plus exact-enumeration
oracles for the reversibility and domain Markov identities.

Conventions.  For a walk w, ell[i] is the time of the walk's last departure
point landing on the i-th erased-path site: ell[0] = 0 and
ell[i+1] = 1 + max{k : w_k = w_ell[i]}.  rho[m] = max{i : ell[i] <= m} counts
the surviving steps among the first m, so the duality
"ell[n] <= m iff rho[m] >= n" holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from . import _kenum, _kwalk
from .lattice import Point, as_point, neighbors, pack_points
from .rng import RngStream
from .walk import LatticePath, StopOutcome, srw_until


@dataclass
class LoopErasure:
    """A loop-erased path with its surviving-time bookkeeping."""

    le_path: LatticePath
    ell: np.ndarray          # strictly increasing, ell[0] = 0
    source_length: int       # number of steps of the walk that was erased

    def __post_init__(self):
        self.ell = np.asarray(self.ell, dtype=np.int64)

    def __len__(self) -> int:
        """Steps of the erased path."""
        return len(self.le_path)

    def rho(self, m: int) -> int:
        """max{ i : ell[i] <= m }."""
        if m < 0:
            raise ValueError("rho is defined for m >= 0")
        return int(np.searchsorted(self.ell, m, side="right")) - 1

    @property
    def rho_array(self) -> np.ndarray:
        """rho[m] for every m = 0..source_length."""
        ms = np.arange(self.source_length + 1)
        return np.searchsorted(self.ell, ms, side="right").astype(np.int64) - 1


def loop_erase(path: LatticePath) -> LoopErasure:
    """Erase cycles chronologically as they appear; O(length).

    The erased path is the original path evaluated at the surviving times:
    le_path[i] = path[ell[i]].
    """
    ell = _kwalk.k_loop_erase(path.packed())
    return LoopErasure(LatticePath(path.sites[ell]), ell, len(path))


def reverse_loop_erase(path: LatticePath) -> LatticePath:
    """The reversal of the loop-erasure of the reversal."""
    return loop_erase(path.reversed()).le_path.reversed()


class StreamingErasure:
    """Incremental loop-erasure of a growing walk.

    After feeding the prefix w^n, `stack` equals LE(w^n) and the first
    eta_n-surviving part equals the horizon-limited infinite erasure.
    Single-owner mutable state; not thread safe.
    """

    def __init__(self, start: Point):
        start = as_point(start)
        self._stack: list[Point] = [start]
        self._pos: dict[Point, int] = {start: 0}
        self._ltime: list[int] = [0]
        self._n = 0

    @property
    def n_fed(self) -> int:
        return self._n

    @property
    def stack(self) -> list[Point]:
        """LE of the walk fed so far (a self-avoiding site sequence)."""
        return list(self._stack)

    @property
    def ell(self) -> np.ndarray:
        out = np.empty(len(self._stack), dtype=np.int64)
        out[0] = 0
        for i in range(1, len(self._stack)):
            out[i] = self._ltime[i - 1] + 1
        return out

    @property
    def rho_n(self) -> int:
        """Surviving steps among the walk fed so far."""
        return len(self._stack) - 1

    @property
    def eta_n(self) -> int:
        """Largest walk time contributing to the erasure so far."""
        return int(self.ell[-1])

    def feed(self, step_point: Point) -> "StreamingErasure":
        p = as_point(step_point)
        cur = self._stack[-1]
        if sum(abs(a - b) for a, b in zip(p, cur)) != 1:
            raise ValueError(f"step {p} is not a lattice neighbour of {cur}")
        self._n += 1
        idx = self._pos.get(p)
        if idx is not None:
            for q in self._stack[idx + 1:]:
                del self._pos[q]
            del self._stack[idx + 1:]
            del self._ltime[idx + 1:]
            self._ltime[idx] = self._n
        else:
            self._pos[p] = len(self._stack)
            self._stack.append(p)
            self._ltime.append(self._n)
        return self


def lerw_to_target(start: Point, target: Iterable[Point], escape_radius: int,
                   rng: RngStream, horizon: int = 10 ** 8) -> tuple[LoopErasure, StopOutcome]:
    """Loop-erasure of a walk stopped at the target (or escape/horizon)."""
    path, outcome = srw_until(start, target, escape_radius, horizon, rng)
    return loop_erase(path), outcome


# ---------------------------------------------------------------------------
# exact-enumeration oracles
# ---------------------------------------------------------------------------

def _enum_counts(start: Point, max_len: int, avoid: Iterable[Point], avoid_mode: int,
                 eta: Optional[LatticePath], le_mode: int) -> np.ndarray:
    avoid_list = [as_point(p) for p in avoid]
    avoid_arr = pack_points(avoid_list) if avoid_list else np.empty(0, dtype=np.int64)
    if eta is None:
        eta_arr = np.empty(0, dtype=np.int64)
    else:
        eta_arr = eta.packed()
    return _kenum.k_enumerate(*as_point(start), max_len, avoid_arr, avoid_mode,
                              eta_arr, le_mode)


def check_reversibility(eta: LatticePath, A: Iterable[Point], max_len: int) -> dict:
    """Exact check of the time-reversal identity for loop erasure.

    For every n <= max_len, compares the number of n-step walks from eta's
    start with LE = eta that avoid A at positive times against the number of
    n-step walks from eta's end with LE = reversed(eta) that avoid A before
    time n.  Both sides carry weight 8^-n, so equal counts mean equal
    probabilities.  Returns the max absolute probability deviation (exactly 0
    for a correct erasure) and the raw counts.
    """
    if max_len > 8:
        raise ValueError("enumeration beyond 8^8 walks is not supported")
    if not eta.is_self_avoiding():
        raise ValueError("eta must be self-avoiding")
    A = [as_point(p) for p in A]
    lhs = _enum_counts(eta.start, max_len, A, _kenum.AVOID_POSITIVE, eta, _kenum.LE_EXACT)
    rhs = _enum_counts(eta.end, max_len, A, _kenum.AVOID_WEAK, eta.reversed(),
                       _kenum.LE_EXACT)
    deviation = 0.0
    for n in range(max_len + 1):
        deviation = max(deviation, abs(int(lhs[n]) - int(rhs[n])) / 8.0 ** n)
    return {
        "deviation": deviation,
        "lhs_counts": lhs,
        "rhs_counts": rhs,
        "max_len": max_len,
    }


def check_domain_markov(mean_t: float, omega: LatticePath, eta: LatticePath,
                        max_len: int) -> dict:
    """Exact truncated check of the domain Markov property under geometric
    killing.

    Both sides of the conditional identity are evaluated by enumerating all
    walks of length <= max_len with exact rational geometric weights; the
    geometric tail beyond max_len bounds the truncation error, which is
    returned alongside the deviation.
    """
    if max_len > 8:
        raise ValueError("enumeration beyond 8^8 walks is not supported")
    if omega.end != eta.start:
        raise ValueError("omega must end where eta starts")
    overlap = omega.site_set() & eta.site_set()
    if overlap != {omega.end}:
        raise ValueError("omega and eta may only share the junction site")
    k = len(omega)
    concat = LatticePath(np.concatenate([omega.sites, eta.sites[1:]], axis=0))

    num_l = _enum_counts(omega.start, max_len, (), _kenum.AVOID_NONE, concat,
                         _kenum.LE_PREFIX)
    den_l = _enum_counts(omega.start, max_len, (), _kenum.AVOID_NONE, omega,
                         _kenum.LE_PREFIX)
    omega_set = list(omega)
    num_r = _enum_counts(omega.end, max_len, omega_set, _kenum.AVOID_POSITIVE,
                         eta, _kenum.LE_PREFIX)
    den_r = _enum_counts(omega.end, max_len, omega_set, _kenum.AVOID_POSITIVE,
                         None, _kenum.LE_NONE)

    t = Fraction(mean_t).limit_denominator(10 ** 9)
    q = t / (t + 1)          # survival probability per step
    w0 = 1 - q               # P(T = 0)

    def weighted(counts: np.ndarray) -> Fraction:
        total = Fraction(0)
        wn = w0
        for n in range(max_len + 1):
            total += wn * Fraction(int(counts[n]), 8 ** n)
            wn *= q
        return total

    nl, dl = weighted(num_l), weighted(den_l)
    nr, dr = weighted(num_r), weighted(den_r)
    if dl == 0 or dr == 0:
        raise ValueError("conditioning event has zero truncated probability")
    lhs = nl / dl
    rhs = nr / dr
    tail = q ** (max_len + 1)
    bound = float(2 * tail / dl + 2 * tail / dr)
    return {
        "deviation": abs(float(lhs - rhs)),
        "lhs": float(lhs),
        "rhs": float(rhs),
        "truncation_bound": bound,
        "max_len": max_len,
    }
