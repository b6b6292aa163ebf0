"""Run traces, cross-trial aggregation, and empirical bound validators.

The validators check the theory's inequalities against simulation: the
DKW-based VaR concentration bound, the accumulated gradient-bias bound
along a learning run, and the T^{-1/2} decay of the time-averaged
squared distance to equilibrium. All checks are one-sided (empirical at
or below the theoretical value passes; the bounds are not expected to be
tight).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Uniform, _tail_start, check_risk_level

__all__ = [
    "RunTrace",
    "AggregateTrace",
    "BoundReport",
    "time_averaged_error",
    "risk_sums",
    "fit_rate",
    "validate_lemma3",
    "validate_lemma4",
]


@dataclass
class RunTrace:
    """Per-episode record of one learning run.

    ``actions[t - 1]`` is the joint action played at episode t (so the
    initial action is row 0 and there are exactly ``horizon`` rows).
    ``nu`` holds the VaR value each agent used in its gradient estimate;
    ``nu_star`` the true VaR at the same action when the game provides
    it. ``err_sq`` is the squared distance to the equilibrium ``x_star``
    when one is known. ``config`` snapshots everything needed to rerun.
    """

    episodes: np.ndarray
    actions: np.ndarray
    nu: np.ndarray
    nu_star: np.ndarray | None
    err_sq: np.ndarray | None
    x_star: np.ndarray | None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        t = self.episodes.size
        if self.actions.shape[0] != t or self.nu.shape[0] != t:
            raise ValueError("trace arrays must have one row per episode")
        if self.nu_star is not None and self.nu_star.shape != self.nu.shape:
            raise ValueError("nu_star must match nu in shape")
        if self.err_sq is not None:
            if self.err_sq.shape != (t,):
                raise ValueError("err_sq must have one entry per episode")
            if np.any(self.err_sq < 0):
                raise ValueError("squared distances cannot be negative")

    @property
    def horizon(self) -> int:
        return int(self.episodes.size)

    @property
    def num_agents(self) -> int:
        return int(self.nu.shape[1])


@dataclass
class AggregateTrace:
    """Mean and standard deviation of an error series across trials."""

    episodes: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_trials: int

    @classmethod
    def from_series(cls, episodes, rows) -> "AggregateTrace":
        """Aggregate a list of per-trial series (each of length T).

        Uses the unbiased (n - 1) std denominator; a single trial gets
        zero std.
        """
        episodes = np.asarray(episodes)
        stack = np.stack([np.asarray(r, dtype=np.float64) for r in rows])
        if stack.shape[1] != episodes.size:
            raise ValueError("series length must match the episode axis")
        mean = stack.mean(axis=0)
        n = stack.shape[0]
        std = stack.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
        return cls(episodes=episodes, mean=mean, std=std, n_trials=n)


@dataclass
class BoundReport:
    """Outcome of one empirical-vs-theoretical comparison."""

    name: str
    empirical: float
    bound: float
    passed: bool
    detail: str = ""

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        out = f"[{status}] {self.name}: empirical {self.empirical:.6g} vs bound {self.bound:.6g}"
        return out + (f" ({self.detail})" if self.detail else "")


def time_averaged_error(trace: RunTrace) -> np.ndarray:
    """Running average A_T = (1/T) sum_{t<=T} ||x_t - x*||^2 for every prefix."""
    if trace.err_sq is None:
        raise ValueError("trace has no equilibrium distances")
    return np.cumsum(trace.err_sq) / np.arange(1, trace.horizon + 1, dtype=np.float64)


def risk_sums(alphas) -> tuple[float, float]:
    """(sum_i 1/alpha_i, sum_i 1/alpha_i^2), the constants in the rate bound."""
    alphas = np.array([check_risk_level(a) for a in alphas])
    inv = 1.0 / alphas
    return float(inv.sum()), float(np.square(inv).sum())


def fit_rate(series: AggregateTrace, window: tuple[float, float]) -> float:
    """Log-log OLS slope of a mean error series over an episode window.

    A series decaying like T^(-r) yields slope -r; the fit is invariant
    to positive rescaling of the series.
    """
    lo, hi = window
    mask = (series.episodes >= lo) & (series.episodes <= hi)
    if int(mask.sum()) < 2:
        raise ValueError(f"window {window} selects fewer than two points")
    values = series.mean[mask]
    if np.any(values <= 0):
        raise ValueError("series must be positive inside the fit window")
    slope = np.polyfit(np.log(series.episodes[mask]), np.log(values), 1)[0]
    return float(slope)


def validate_lemma3(
    dist: Uniform,
    alpha: float,
    t: int,
    repeats: int,
    epsilon: float,
    rng: np.random.Generator,
    p_lower: float | None = None,
) -> BoundReport:
    """Check the VaR concentration bound P{|nu_hat - nu*| > eps} <= 2 e^{-2 t eps^2 p^2}.

    Draws ``repeats`` independent samples of size ``t``, estimates the
    VaR each time, and compares the empirical violation frequency with
    the theoretical tail (at the supplied density lower bound, default
    the distribution's true one). Passing allows two binomial standard
    errors of slack; an inflated ``p_lower`` shrinks the claimed bound
    below the true frequency and is reported as a failure.
    """
    check_risk_level(alpha)
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    p = dist.density_lower_bound if p_lower is None else float(p_lower)
    true_var = dist.var(alpha)
    draws = dist.sample(rng, size=(repeats, t))
    k = _tail_start(t, alpha)
    nu_hat = np.partition(draws, k - 1, axis=1)[:, k - 1]
    freq = float(np.mean(np.abs(nu_hat - true_var) > epsilon))
    bound = min(1.0, 2.0 * math.exp(-2.0 * t * epsilon**2 * p**2))
    slack = 2.0 * math.sqrt(bound * (1.0 - bound) / repeats)
    return BoundReport(
        name="lemma3",
        empirical=freq,
        bound=bound,
        passed=freq <= bound + slack,
        detail=f"alpha={alpha}, t={t}, eps={epsilon:.6g}, p_lower={p:.4g}, repeats={repeats}",
    )


def _cournot_density_range(trace: RunTrace, agent: int) -> tuple[float, float]:
    """(L0, p_lower) for a Cournot trace.

    At joint action x the agent's cost is uniform with width x_i, so the
    density is exactly 1/x_i: its Lipschitz constant along the run is
    1/min(x_i) and its lower bound 1/max(x_i).
    """
    blk = slice(agent, agent + 1)
    own = trace.actions[:, blk].ravel()
    if np.any(own <= 0):
        raise ValueError(
            "trace touches a zero action; the cost density is unbounded there"
        )
    return 1.0 / float(own.min()), 1.0 / float(own.max())


def validate_lemma4(
    trace: RunTrace,
    agent: int,
    gamma: float = 0.05,
    B: float | None = None,
    L0: float | None = None,
    p_lower: float | None = None,
) -> BoundReport:
    """Check the accumulated gradient-bias bound along one run.

    The per-episode bias proxy is (B * L0 / alpha_i) |nu_t - nu*_t|; its
    running sum must stay below

        sqrt(2) * B * L0 / (alpha_i * p_lower) * sqrt(ln(2T/gamma)) * sqrt(T')

    for every prefix T' <= T, where the log factor comes from a union
    bound over episodes at per-episode confidence gamma/T. Constants
    default to the game's gradient bound from the trace config and, for
    Cournot traces, to the per-trace density range.
    """
    if trace.nu_star is None:
        raise ValueError("trace has no true VaR series")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    alphas = trace.config.get("alphas")
    if alphas is None:
        raise ValueError("trace config is missing the risk levels")
    alpha = check_risk_level(alphas[agent])
    if B is None:
        B = trace.config.get("grad_bound")
        if B is None:
            raise ValueError("no gradient bound in trace config; pass B explicitly")
    if L0 is None or p_lower is None:
        if trace.config.get("game") != "cournot":
            raise ValueError("L0 and p_lower must be given for non-Cournot traces")
        auto_L0, auto_p = _cournot_density_range(trace, agent)
        L0 = auto_L0 if L0 is None else L0
        p_lower = auto_p if p_lower is None else p_lower

    horizon = trace.horizon
    err = np.abs(trace.nu[:, agent] - trace.nu_star[:, agent])
    sums = np.cumsum((B * L0 / alpha) * err)
    prefixes = np.arange(1, horizon + 1, dtype=np.float64)
    log_factor = math.sqrt(math.log(2.0 * horizon / gamma))
    rhs = (math.sqrt(2.0) * B * L0 / (alpha * p_lower)) * log_factor * np.sqrt(prefixes)
    worst = float(np.max(sums / rhs))
    return BoundReport(
        name="lemma4",
        empirical=float(sums[-1]),
        bound=float(rhs[-1]),
        passed=bool(np.all(sums <= rhs)),
        detail=(
            f"agent={agent}, gamma={gamma}, worst prefix ratio {worst:.4f}, "
            f"B={B:.4g}, L0={L0:.4g}, p_lower={p_lower:.4g}"
        ),
    )
