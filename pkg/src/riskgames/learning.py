"""First-order risk-averse learning.

Each episode every agent replays its full noise history at the current
joint action, estimates the VaR of the resulting cost sample, averages
the per-sample gradients over the tail at or above that estimate
(scaled by 1/alpha), and takes a projected gradient step:

    g_i = (1 / (t * alpha_i)) * sum_k 1{J_i(x_t, xi_i^k) >= nu_i}
                                    * grad_i J_i(x_t, xi_i^k)

The exact-VaR baseline runs the identical loop with the estimated
quantile replaced by the game's closed-form VaR, which removes the only
source of bias and isolates its effect.

Re-evaluating the whole history costs O(t) per episode, O(T^2) per run.
An optional sliding window caps the history length; that is a speed
knob, not part of the analyzed algorithm, and is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import RunTrace
from .distributions import check_risk_level, empirical_var
from .games import Box, StochasticGame, UnsupportedGameError

__all__ = [
    "StepSchedule",
    "GradientEstimate",
    "project_box",
    "cvar_gradient_estimate",
    "unbiased_cvar_gradient",
    "run_algorithm1",
    "run_unbiased_baseline",
]


@dataclass(frozen=True)
class StepSchedule:
    """Constant step size, either explicit or horizon-tuned.

    ``auto()`` resolves to (D / B) / sqrt(T) where D is the largest
    per-agent action-set diameter and B the game's gradient bound.
    """

    eta: float | None = None

    def __post_init__(self):
        if self.eta is not None and self.eta < 0:
            raise ValueError("step size must be nonnegative")

    @classmethod
    def auto(cls) -> "StepSchedule":
        return cls(None)

    @classmethod
    def constant(cls, eta: float) -> "StepSchedule":
        return cls(float(eta))

    def resolve(self, game: StochasticGame, horizon: int) -> float:
        if self.eta is not None:
            return self.eta
        diameter = max(box.diameter for box in game.action_sets)
        return (diameter / game.grad_bound) / np.sqrt(horizon)


@dataclass
class GradientEstimate:
    """Tail-weighted gradient average, the VaR it used, and the tail size."""

    g: np.ndarray
    var_used: float
    tail_count: int


def project_box(x, box: Box) -> np.ndarray:
    """Euclidean projection onto a box (componentwise clamp)."""
    return box.project(x)


def _tail_gradient(
    costs: np.ndarray, grads: np.ndarray, nu: float, alpha: float
) -> GradientEstimate:
    mask = costs >= nu
    g = grads[mask].sum(axis=0) / (costs.size * alpha)
    return GradientEstimate(g=g, var_used=nu, tail_count=int(mask.sum()))


def cvar_gradient_estimate(
    game: StochasticGame,
    agent: int,
    x: np.ndarray,
    noise_history: np.ndarray,
    alpha: float,
    var_estimator=None,
) -> GradientEstimate:
    """CVaR gradient estimate from the replayed noise history.

    Re-evaluates every stored draw at the current joint action, takes
    the empirical VaR of the costs (or a custom estimator such as
    ``BinnedVarEstimator``), and averages the gradients whose cost is at
    or above it, scaled by 1 / alpha. The divisor is the full history
    length even when ties push extra samples into the tail.
    """
    check_risk_level(alpha)
    noise_history = np.asarray(noise_history, dtype=np.float64)
    if noise_history.ndim != 2 or noise_history.shape[0] == 0:
        raise ValueError("noise history must be a nonempty (t, noise_dim) array")
    costs = game.cost_batch(agent, x, noise_history)
    grads = game.grad_batch(agent, x, noise_history)
    estimator = empirical_var if var_estimator is None else var_estimator
    nu = estimator(costs, alpha)
    return _tail_gradient(costs, grads, nu, alpha)


def unbiased_cvar_gradient(
    game: StochasticGame,
    agent: int,
    x: np.ndarray,
    noise_history: np.ndarray,
    alpha: float,
    exact_var: float | None = None,
) -> GradientEstimate:
    """Same tail average but thresholded at the true VaR of J_i(x, xi).

    With the exact quantile the tail indicator has the correct
    expectation, so this estimator is unbiased for the CVaR gradient.
    The game must supply the closed-form VaR unless one is passed in.
    """
    check_risk_level(alpha)
    noise_history = np.asarray(noise_history, dtype=np.float64)
    if noise_history.ndim != 2 or noise_history.shape[0] == 0:
        raise ValueError("noise history must be a nonempty (t, noise_dim) array")
    if exact_var is None:
        exact_var = game.exact_var(agent, x, alpha)
    costs = game.cost_batch(agent, x, noise_history)
    grads = game.grad_batch(agent, x, noise_history)
    return _tail_gradient(costs, grads, float(exact_var), alpha)


def _as_rngs(game: StochasticGame, seed) -> list[np.random.Generator]:
    """Independent per-agent generators spawned from one master seed."""
    if isinstance(seed, np.random.SeedSequence):
        root = seed
    else:
        root = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in root.spawn(game.num_agents)]


def _run(
    game: StochasticGame,
    alphas,
    horizon: int,
    schedule: StepSchedule,
    x0,
    seed,
    unbiased: bool,
    window: int | None,
    var_estimator,
    algorithm: str,
) -> RunTrace:
    alphas = [check_risk_level(a) for a in alphas]
    if len(alphas) != game.num_agents:
        raise ValueError("expected one risk level per agent")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if window is not None and window < 1:
        raise ValueError("window must be >= 1 when set")

    num_agents = game.num_agents
    if x0 is None:
        x = np.concatenate([box.center for box in game.action_sets])
    else:
        x = np.asarray(x0, dtype=np.float64).copy()
        if not game.feasible(x):
            raise ValueError(f"infeasible initial action {x!r}")
    eta = float(schedule.resolve(game, horizon))

    rngs = _as_rngs(game, seed)
    histories = [np.empty((horizon, game.noise_dim)) for _ in range(num_agents)]
    blocks = [game.block_slice(i) for i in range(num_agents)]

    x_star = game.nash_equilibrium(alphas)
    track_true_var = True
    try:
        game.exact_var(0, x, alphas[0])
    except UnsupportedGameError:
        track_true_var = False
    if unbiased and not track_true_var:
        raise UnsupportedGameError(
            "the exact-VaR baseline needs a game with closed-form VaR"
        )

    actions = np.empty((horizon, x.size))
    nu = np.empty((horizon, num_agents))
    nu_star = np.empty((horizon, num_agents)) if track_true_var else None
    err_sq = np.empty(horizon) if x_star is not None else None

    for t in range(1, horizon + 1):
        actions[t - 1] = x
        if err_sq is not None:
            delta = x - x_star
            err_sq[t - 1] = float(delta @ delta)
        estimates = []
        for i in range(num_agents):
            histories[i][t - 1] = game.sample_noise(i, rngs[i])
            start = 0 if window is None else max(0, t - window)
            hist = histories[i][start:t]
            if unbiased:
                est = unbiased_cvar_gradient(game, i, x, hist, alphas[i])
            else:
                est = cvar_gradient_estimate(
                    game, i, x, hist, alphas[i], var_estimator=var_estimator
                )
            nu[t - 1, i] = est.var_used
            if nu_star is not None:
                nu_star[t - 1, i] = game.exact_var(i, x, alphas[i])
            estimates.append(est)
        # simultaneous play: all updates use the same joint action
        x_next = x.copy()
        for i in range(num_agents):
            x_next[blocks[i]] = game.action_sets[i].project(
                x[blocks[i]] - eta * estimates[i].g
            )
        x = x_next

    config = {
        "game": getattr(game, "name", type(game).__name__.lower()),
        "alphas": list(alphas),
        "eta": eta,
        "horizon": horizon,
        "seed": seed if isinstance(seed, int) else repr(seed),
        "algorithm": algorithm,
        "window": window,
        "grad_bound": game.grad_bound,
    }
    return RunTrace(
        episodes=np.arange(1, horizon + 1),
        actions=actions,
        nu=nu,
        nu_star=nu_star,
        err_sq=err_sq,
        x_star=x_star,
        config=config,
    )


def run_algorithm1(
    game: StochasticGame,
    alphas,
    horizon: int,
    schedule: StepSchedule | None = None,
    x0=None,
    seed=0,
    window: int | None = None,
    var_estimator=None,
) -> RunTrace:
    """Run the first-order risk-averse learning loop for ``horizon`` episodes.

    All agents play simultaneously; each draws one fresh noise sample per
    episode and estimates its gradient from the full replayed history
    (or the last ``window`` draws if a window is set). Runs with equal
    seeds and configuration are bit-identical.
    """
    return _run(
        game,
        alphas,
        horizon,
        schedule or StepSchedule.auto(),
        x0,
        seed,
        unbiased=False,
        window=window,
        var_estimator=var_estimator,
        algorithm="algorithm1",
    )


def run_unbiased_baseline(
    game: StochasticGame,
    alphas,
    horizon: int,
    schedule: StepSchedule | None = None,
    x0=None,
    seed=0,
    window: int | None = None,
) -> RunTrace:
    """Identical loop with the estimated VaR replaced by the exact one."""
    return _run(
        game,
        alphas,
        horizon,
        schedule or StepSchedule.auto(),
        x0,
        seed,
        unbiased=True,
        window=window,
        var_estimator=None,
        algorithm="unbiased-fo",
    )
