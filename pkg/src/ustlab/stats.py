"""Estimation helpers: Wilson-score intervals, polylog exponent fits, and
band / trend checks shared by the experiment drivers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wilson_score(successes: int, n: int, z: float = 1.96) -> tuple[float, float, float]:
    """(p_hat, lo, hi): the Wilson score interval for a binomial proportion."""
    if n <= 0:
        return (math.nan, 0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return p, max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class PolylogFit:
    """Least-squares fit of log(n^b v) = intercept + a log log n."""

    b: float                 # fixed polynomial exponent
    a: float                 # fitted logarithmic exponent
    intercept: float
    r_squared: float
    residuals: np.ndarray = field(repr=False)
    ns: np.ndarray = field(repr=False)


def polylog_fit(ns, values, b: float) -> PolylogFit:
    """Fit the log-power a in v(n) ~ C (log n)^a / n^b.

    The polynomial power b is fixed (the mean-field part is known); only the
    logarithmic correction is fitted, on log(n^b v) versus log log n.
    """
    ns = np.asarray(ns, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    keep = values > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive points to fit")
    ns, values = ns[keep], values[keep]
    x = np.log(np.log(ns))
    y = np.log(values * ns ** b)
    a, intercept = np.polyfit(x, y, 1)
    pred = a * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return PolylogFit(b, float(a), float(intercept), r2, y - pred, ns)


def band_ratio(values) -> float:
    """max/min over positive entries; the 'constant band' statistic."""
    v = np.asarray([x for x in values if x > 0], dtype=np.float64)
    if v.size == 0:
        return math.inf
    return float(v.max() / v.min())


def trend_slope(ns, values) -> float:
    """Slope of values against log n (sign = direction of the trend)."""
    ns = np.asarray(ns, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    return float(np.polyfit(np.log(ns), values, 1)[0])


@dataclass
class TailCurve:
    """A tail-probability curve with Wilson-score confidence intervals."""

    ns: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    samples: np.ndarray
    successes: np.ndarray
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_counts(cls, ns, successes, samples, metadata=None) -> "TailCurve":
        ns = np.asarray(ns)
        successes = np.asarray(successes, dtype=np.int64)
        samples = np.asarray(samples, dtype=np.int64)
        trip = [wilson_score(int(s), int(n)) for s, n in zip(successes, samples)]
        return cls(ns, np.array([t[0] for t in trip]), np.array([t[1] for t in trip]),
                   np.array([t[2] for t in trip]), samples, successes,
                   metadata or {})

    @property
    def flagged(self) -> np.ndarray:
        """Points with fewer than 50 successes (reported, not trusted)."""
        return self.successes < 50

    def monotone_within_ci(self) -> bool:
        """Non-increasing within CI widths: lo[i] <= hi[i+1] ... lo/hi order."""
        for i in range(len(self.ns) - 1):
            if self.ci_lo[i + 1] > self.ci_hi[i]:
                return False
        return True

    def rows(self) -> list[dict]:
        out = []
        for i in range(len(self.ns)):
            out.append({
                "n": int(self.ns[i]),
                "p_hat": float(self.p_hat[i]),
                "ci_lo": float(self.ci_lo[i]),
                "ci_hi": float(self.ci_hi[i]),
                "samples": int(self.samples[i]),
                "successes": int(self.successes[i]),
            })
        return out
