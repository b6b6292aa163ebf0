"""Empirical scalar distributions and tail-risk estimators.

Sorted sample sets with an exact step-function EDF, order-statistic
quantiles (VaR), tail means (CVaR), uniform closed-form oracles for
testing, and DKW-based confidence widths for quantile estimates.

Conventions: costs are minimized, so the risky tail is the *upper* tail.
For a risk level ``alpha`` in (0, 1], VaR is the (1 - alpha)-quantile and
CVaR averages the worst ``alpha`` fraction of outcomes; ``alpha = 1``
recovers the plain mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EmpiricalDistribution",
    "Uniform",
    "closed_form",
    "check_risk_level",
    "empirical_var",
    "empirical_var_cvar",
    "BinnedVarEstimator",
    "dkw_confidence_width",
]


def check_risk_level(alpha: float) -> float:
    """Validate a risk level, which must lie in (0, 1]. Returns it as float."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"risk level must be in (0, 1], got {alpha}")
    return alpha


def _tail_start(t: int, alpha: float) -> int:
    """1-based index k of the (1 - alpha)-quantile order statistic.

    k is the smallest integer with k/t >= 1 - alpha.  The 1e-9 guard
    absorbs float noise in ``t * (1 - alpha)`` without changing exact
    cases; alpha = 1 lands on k = 1 (the minimum sample).
    """
    k = math.ceil(t * (1.0 - alpha) - 1e-9)
    return max(1, k)


def empirical_var(values: np.ndarray, alpha: float) -> float:
    """VaR of a raw (unsorted) sample array: the k-th order statistic.

    Equivalent to ``EmpiricalDistribution.from_samples(values).var(alpha)``
    but avoids the full sort (np.partition is linear time).
    """
    check_risk_level(alpha)
    values = np.asarray(values, dtype=np.float64)
    t = values.size
    if t == 0:
        raise ValueError("empty sample set has no quantiles")
    k = _tail_start(t, alpha)
    return float(np.partition(values, k - 1)[k - 1])


def empirical_var_cvar(values: np.ndarray, alpha: float) -> tuple[float, float]:
    """(VaR, CVaR) of a raw sample array in one pass.

    CVaR is the plug-in value nu + sum((v - nu)_+) / (alpha * t) with nu
    the empirical VaR.
    """
    check_risk_level(alpha)
    values = np.asarray(values, dtype=np.float64)
    t = values.size
    if t == 0:
        raise ValueError("empty sample set has no quantiles")
    k = _tail_start(t, alpha)
    part = np.partition(values, k - 1)
    nu = float(part[k - 1])
    # Elements before k-1 are <= nu, so they contribute nothing to (v - nu)_+.
    tail = part[k - 1 :]
    cvar = nu + float(np.sum(tail - nu)) / (alpha * t)
    return nu, cvar


class EmpiricalDistribution:
    """Multiset of scalar samples kept in ascending order.

    Immutable: ``insert`` returns a new distribution. Duplicates are kept,
    so the EDF counts samples rather than distinct values.
    """

    __slots__ = ("_samples",)

    def __init__(self, samples=()):
        arr = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr.flags.writeable = False
        self._samples = arr

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalDistribution":
        return cls(samples)

    @property
    def samples(self) -> np.ndarray:
        """Sorted sample array (read-only view)."""
        return self._samples

    @property
    def count(self) -> int:
        return int(self._samples.size)

    def __len__(self) -> int:
        return self.count

    def __repr__(self) -> str:
        return f"EmpiricalDistribution(t={self.count})"

    def _require_samples(self):
        if self._samples.size == 0:
            raise ValueError("empty distribution")

    def insert(self, value: float) -> "EmpiricalDistribution":
        """Return a new distribution with ``value`` added.

        Cost is a binary search plus one shift of the tail of the array.
        """
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"sample must be finite, got {value}")
        idx = int(np.searchsorted(self._samples, value))
        out = object.__new__(EmpiricalDistribution)
        arr = np.insert(self._samples, idx, value)
        arr.flags.writeable = False
        out._samples = arr
        return out

    def edf(self, y) -> float:
        """Fraction of samples <= y (right-continuous step function)."""
        self._require_samples()
        idx = np.searchsorted(self._samples, y, side="right")
        out = idx / self._samples.size
        return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out

    def var(self, alpha: float) -> float:
        """Empirical VaR: smallest sample y with edf(y) >= 1 - alpha."""
        check_risk_level(alpha)
        self._require_samples()
        k = _tail_start(self.count, alpha)
        return float(self._samples[k - 1])

    def cvar(self, alpha: float) -> float:
        """Plug-in CVaR: nu + mean((samples - nu)_+) / alpha at nu = var(alpha).

        For alpha = 1 this reduces exactly to the sample mean.
        """
        check_risk_level(alpha)
        self._require_samples()
        k = _tail_start(self.count, alpha)
        nu = float(self._samples[k - 1])
        tail = self._samples[k - 1 :]
        return nu + float(np.sum(tail - nu)) / (alpha * self.count)

    def mean(self) -> float:
        self._require_samples()
        return float(self._samples.mean())


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution on [a, b] with closed-form VaR and CVaR.

    Serves as the test oracle: VaR_alpha = a + (1 - alpha)(b - a) and
    CVaR_alpha = a + (1 - alpha/2)(b - a), the midpoint of the upper tail.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("bounds must be finite")
        if not self.b > self.a:
            raise ValueError(f"need b > a, got a={self.a}, b={self.b}")

    @classmethod
    def scaled(cls, scale: float, a: float, b: float, shift: float = 0.0) -> "Uniform":
        """The law of scale * U(a, b) + shift for a positive scale."""
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        return cls(scale * a + shift, scale * b + shift)

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def density_lower_bound(self) -> float:
        """Constant density 1 / (b - a); the p-underbar of the DKW bound."""
        return 1.0 / self.width

    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    def var(self, alpha: float) -> float:
        check_risk_level(alpha)
        return self.a + (1.0 - alpha) * self.width

    def cvar(self, alpha: float) -> float:
        check_risk_level(alpha)
        return self.a + (1.0 - 0.5 * alpha) * self.width

    def var_cvar(self, alpha: float) -> tuple[float, float]:
        return self.var(alpha), self.cvar(alpha)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return rng.uniform(self.a, self.b, size=size)


def closed_form(kind: str, **params) -> Uniform:
    """Build a closed-form oracle distribution by name.

    Supported kinds: ``uniform(a, b)`` and ``scaled-uniform(scale, a, b,
    shift)``. Anything else is a domain error.
    """
    if kind == "uniform":
        return Uniform(params["a"], params["b"])
    if kind == "scaled-uniform":
        return Uniform.scaled(
            params["scale"], params["a"], params["b"], params.get("shift", 0.0)
        )
    raise ValueError(f"unsupported closed-form kind: {kind!r}")


@dataclass(frozen=True)
class BinnedVarEstimator:
    """Histogram approximation of the empirical VaR.

    Partitions [0, U] into equal-width bins (U defaults to the largest
    observed cost) and reads the quantile off the binned EDF at bin right
    edges. Samples outside the range are clamped into the end bins. This
    trades exactness for a bounded memory footprint; the exact
    order-statistic estimator is the default everywhere.
    """

    num_bins: int = 1000
    upper: float | None = None

    def __post_init__(self):
        if self.num_bins < 1:
            raise ValueError("num_bins must be >= 1")

    def _edges(self, values: np.ndarray) -> np.ndarray:
        lo = min(0.0, float(values.min()))
        hi = self.upper if self.upper is not None else float(values.max())
        if hi <= lo:
            hi = lo + 1.0
        return np.linspace(lo, hi, self.num_bins + 1)

    def __call__(self, values: np.ndarray, alpha: float) -> float:
        check_risk_level(alpha)
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValueError("empty sample set has no quantiles")
        edges = self._edges(values)
        counts, _ = np.histogram(np.clip(values, edges[0], edges[-1]), bins=edges)
        cum = np.cumsum(counts) / values.size
        idx = int(np.searchsorted(cum, 1.0 - alpha - 1e-12))
        idx = min(idx, self.num_bins - 1)
        return float(edges[idx + 1])

    def var_cvar(self, values: np.ndarray, alpha: float) -> tuple[float, float]:
        """Binned (VaR, CVaR): the tail expectation as a finite sum over bins."""
        values = np.asarray(values, dtype=np.float64)
        nu = self(values, alpha)
        edges = self._edges(values)
        counts, _ = np.histogram(np.clip(values, edges[0], edges[-1]), bins=edges)
        centers = 0.5 * (edges[:-1] + edges[1:])
        excess = np.maximum(centers - nu, 0.0)
        cvar = nu + float(np.dot(counts, excess)) / (alpha * values.size)
        return nu, cvar


def dkw_confidence_width(t: int, gamma_bar: float, p_lower: float) -> float:
    """Width epsilon such that P{|VaR estimate - true VaR| > epsilon} <= gamma_bar.

    Inverts the DKW tail 2 exp(-2 t eps^2 p^2) for a sample of size t when
    the cost density is bounded below by ``p_lower`` near the quantile:
    eps = sqrt(ln(2 / gamma_bar)) / (p_lower * sqrt(2 t)).
    """
    if t < 1:
        raise ValueError(f"sample size must be >= 1, got {t}")
    if not 0.0 < gamma_bar < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {gamma_bar}")
    if p_lower <= 0.0:
        raise ValueError(f"density lower bound must be positive, got {p_lower}")
    return math.sqrt(math.log(2.0 / gamma_bar)) / (p_lower * math.sqrt(2.0 * t))
