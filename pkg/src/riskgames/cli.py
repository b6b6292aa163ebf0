"""Config-driven experiment runner and command-line entry point.

Subcommands:

    riskgames run --config cfg.yaml [--out DIR] [--workers N] [--strict]
    riskgames validate --config cfg.yaml
    riskgames report --bundle DIR [--strict]

A run executes every configured algorithm for the configured number of
trials (seeds split deterministically from the master seed), then writes
per-trial trace CSVs, an aggregate CSV, a convergence SVG, a bound
report CSV, and the resolved config. Re-running an identical config
byte-reproduces the CSVs. Progress goes to stderr; data only to files.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import yaml

from .analysis import (
    AggregateTrace,
    BoundReport,
    RunTrace,
    fit_rate,
    time_averaged_error,
    validate_lemma3,
    validate_lemma4,
)
from .distributions import BinnedVarEstimator, dkw_confidence_width
from .games import CournotGame, QuadraticCounterexampleGame, StochasticGame
from .learning import StepSchedule, run_algorithm1, run_unbiased_baseline
from .plotting import emit_plot

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "OutputBundle",
    "validate_config",
    "load_config",
    "build_game",
    "run_experiment",
    "main",
]

ALGORITHMS = ("algorithm1", "unbiased-fo")

GAME_DEFAULT_ALPHAS = {
    "cournot": (0.4, 0.8),
    "quadratic-counterexample": (0.5, 0.5),
}

_GAME_PARAM_KEYS = ("a", "b", "c", "d")

_KNOWN_KEYS = {
    "game",
    "alphas",
    "T",
    "trials",
    "seed",
    "eta",
    "algorithms",
    "window",
    "edf",
    "x0",
    "out_dir",
    *_GAME_PARAM_KEYS,
}

# lemma-3 report parameters (U-family concentration check at fixed size)
_LEMMA3_T = 1000
_LEMMA3_REPEATS = 1000
_LEMMA3_GAMMA_BAR = 0.05

TRIAL_HEADER_BASE = ("t",)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    game: str
    game_params: tuple[tuple[str, float], ...]
    alphas: tuple[float, ...]
    horizon: int
    trials: int
    seed: int
    eta: float | None  # None means the horizon-tuned (D/B)/sqrt(T)
    algorithms: tuple[str, ...]
    window: int | None
    edf: str
    x0: tuple[float, ...]
    out_dir: str | None


def build_game(config: ExperimentConfig) -> StochasticGame:
    if config.game == "cournot":
        return CournotGame()
    if config.game == "quadratic-counterexample":
        return QuadraticCounterexampleGame(**dict(config.game_params))
    raise ConfigError(f"game: unknown game {config.game!r}")


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def _as_int(raw, field: str, minimum: int) -> int:
    _require(isinstance(raw, int) and not isinstance(raw, bool), f"{field}: expected an integer, got {raw!r}")
    _require(raw >= minimum, f"{field}: must be >= {minimum}, got {raw}")
    return raw


def _as_float(raw, field: str) -> float:
    _require(isinstance(raw, (int, float)) and not isinstance(raw, bool), f"{field}: expected a number, got {raw!r}")
    return float(raw)


def validate_config(raw: dict) -> ExperimentConfig:
    """Check a flat key-value document and fill in the documented defaults.

    Defaults: trials=20, seed=0, eta=auto, both algorithms, window off,
    exact EDF, x0 at the box centers, and the built-in risk levels of the
    selected game. Unknown keys are rejected.
    """
    _require(isinstance(raw, dict), f"config: expected a mapping, got {type(raw).__name__}")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"config: unknown key {sorted(unknown)[0]!r}")

    game = raw.get("game")
    _require(game is not None, "game: required")
    _require(game in GAME_DEFAULT_ALPHAS, f"game: unknown game {game!r}")

    params = {}
    for key in _GAME_PARAM_KEYS:
        if key in raw:
            _require(
                game == "quadratic-counterexample",
                f"{key}: game parameter only applies to quadratic-counterexample",
            )
            params[key] = _as_float(raw[key], key)

    horizon = _as_int(raw.get("T"), "T", 1) if "T" in raw else None
    _require(horizon is not None, "T: required")
    trials = _as_int(raw.get("trials", 20), "trials", 1)
    seed = _as_int(raw.get("seed", 0), "seed", 0)

    raw_eta = raw.get("eta", "auto")
    if raw_eta == "auto":
        eta = None
    else:
        eta = _as_float(raw_eta, "eta")
        _require(eta > 0, f"eta: must be positive or 'auto', got {eta}")

    algorithms = raw.get("algorithms", list(ALGORITHMS))
    _require(
        isinstance(algorithms, (list, tuple)) and len(algorithms) > 0,
        "algorithms: expected a nonempty list",
    )
    for alg in algorithms:
        _require(alg in ALGORITHMS, f"algorithms: unknown algorithm {alg!r} (choose from {list(ALGORITHMS)})")
    _require(len(set(algorithms)) == len(algorithms), "algorithms: duplicate entries")

    raw_window = raw.get("window", 0)
    window = None
    if raw_window not in (0, None):
        window = _as_int(raw_window, "window", 1)

    edf = raw.get("edf", "exact")
    if edf != "exact":
        _require(isinstance(edf, str) and edf.startswith("binned:"), f"edf: expected 'exact' or 'binned:<bins>', got {edf!r}")
        try:
            bins = int(edf.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"edf: malformed bin count in {edf!r}") from None
        _require(bins >= 1, f"edf: bin count must be >= 1, got {bins}")

    config = ExperimentConfig(
        game=game,
        game_params=tuple(sorted(params.items())),
        alphas=(),
        horizon=horizon,
        trials=trials,
        seed=seed,
        eta=eta,
        algorithms=tuple(algorithms),
        window=window,
        edf=edf,
        x0=(),
        out_dir=raw.get("out_dir"),
    )
    game_obj = build_game(config)

    alphas = raw.get("alphas", list(GAME_DEFAULT_ALPHAS[game]))
    _require(isinstance(alphas, (list, tuple)), "alphas: expected a list")
    _require(
        len(alphas) == game_obj.num_agents,
        f"alphas: expected {game_obj.num_agents} entries, got {len(alphas)}",
    )
    checked = []
    for i, a in enumerate(alphas):
        a = _as_float(a, f"alphas[{i}]")
        _require(0.0 < a <= 1.0, f"alphas[{i}]: must be in (0, 1], got {a}")
        checked.append(a)

    if "x0" in raw:
        x0_raw = raw["x0"]
        _require(isinstance(x0_raw, (list, tuple)), "x0: expected a list")
        _require(
            len(x0_raw) == game_obj.dimension,
            f"x0: expected {game_obj.dimension} coordinates, got {len(x0_raw)}",
        )
        x0 = tuple(_as_float(v, f"x0[{i}]") for i, v in enumerate(x0_raw))
        _require(game_obj.feasible(np.array(x0)), "x0: outside the action boxes")
    else:
        x0 = tuple(float(v) for v in np.concatenate([b.center for b in game_obj.action_sets]))

    if config.out_dir is not None:
        _require(isinstance(config.out_dir, str), f"out_dir: expected a string, got {config.out_dir!r}")

    return replace(config, alphas=tuple(checked), x0=x0)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: not valid YAML ({exc})") from None
    return validate_config(raw if raw is not None else {})


def resolved_document(config: ExperimentConfig) -> dict:
    """Flat dict of the fully resolved config; re-parses to an equal config."""
    doc = {
        "game": config.game,
        "alphas": list(config.alphas),
        "T": config.horizon,
        "trials": config.trials,
        "seed": config.seed,
        "eta": "auto" if config.eta is None else config.eta,
        "algorithms": list(config.algorithms),
        "window": 0 if config.window is None else config.window,
        "edf": config.edf,
        "x0": list(config.x0),
    }
    for key, value in config.game_params:
        doc[key] = value
    if config.out_dir is not None:
        doc["out_dir"] = config.out_dir
    return doc


def _var_estimator(config: ExperimentConfig):
    if config.edf == "exact":
        return None
    return BinnedVarEstimator(num_bins=int(config.edf.split(":", 1)[1]))


def _trial_seed(config: ExperimentConfig, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.seed).spawn(config.trials + 1)[index]


def _report_rng(config: ExperimentConfig) -> np.random.Generator:
    return np.random.default_rng(_trial_seed(config, config.trials))


def _run_trial(args) -> RunTrace:
    config, algorithm, index = args
    game = build_game(config)
    schedule = StepSchedule.auto() if config.eta is None else StepSchedule.constant(config.eta)
    seed = _trial_seed(config, index)
    if algorithm == "algorithm1":
        trace = run_algorithm1(
            game,
            config.alphas,
            config.horizon,
            schedule=schedule,
            x0=np.array(config.x0),
            seed=seed,
            window=config.window,
            var_estimator=_var_estimator(config),
        )
    else:
        trace = run_unbiased_baseline(
            game,
            config.alphas,
            config.horizon,
            schedule=schedule,
            x0=np.array(config.x0),
            seed=seed,
            window=config.window,
        )
    trace.config["seed"] = f"{config.seed}:{index}"
    return trace


@dataclass
class OutputBundle:
    """Artifacts of one experiment, both on disk and in memory."""

    out_dir: str
    config: ExperimentConfig
    traces: dict
    aggregates: dict
    reports: list
    trial_paths: dict
    aggregate_path: str | None
    plot_path: str | None
    report_path: str
    config_path: str

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.reports if r.passed is not None)


def trial_filename(algorithm: str, index: int) -> str:
    return f"{algorithm}-trial{index:03d}.csv"


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trace_csv(trace: RunTrace, path) -> None:
    """One row per episode; full round-trip float precision."""
    dim = trace.actions.shape[1]
    n = trace.num_agents
    header = ["t"] + [f"x{j}" for j in range(dim)]
    if trace.err_sq is not None:
        header.append("err_sq")
    header += [f"nu_agent{i}" for i in range(n)]
    if trace.nu_star is not None:
        header += [f"nu_star_agent{i}" for i in range(n)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in range(trace.horizon):
            out = [str(int(trace.episodes[row]))]
            out += [_fmt(v) for v in trace.actions[row]]
            if trace.err_sq is not None:
                out.append(_fmt(trace.err_sq[row]))
            out += [_fmt(v) for v in trace.nu[row]]
            if trace.nu_star is not None:
                out += [_fmt(v) for v in trace.nu_star[row]]
            writer.writerow(out)


def read_trace_csv(path, config: ExperimentConfig, algorithm: str) -> RunTrace:
    """Rebuild a RunTrace from a trial CSV plus the bundle's config."""
    game = build_game(config)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows)
    cols = {name: idx for idx, name in enumerate(header)}
    n = game.num_agents
    dim = game.dimension
    episodes = data[:, cols["t"]].astype(int)
    actions = data[:, [cols[f"x{j}"] for j in range(dim)]]
    nu = data[:, [cols[f"nu_agent{i}"] for i in range(n)]]
    nu_star = None
    if "nu_star_agent0" in cols:
        nu_star = data[:, [cols[f"nu_star_agent{i}"] for i in range(n)]]
    err_sq = data[:, cols["err_sq"]] if "err_sq" in cols else None
    x_star = game.nash_equilibrium(config.alphas)
    eta = config.eta
    if eta is None:
        eta = StepSchedule.auto().resolve(game, config.horizon)
    return RunTrace(
        episodes=episodes,
        actions=actions,
        nu=nu,
        nu_star=nu_star,
        err_sq=err_sq,
        x_star=x_star,
        config={
            "game": config.game,
            "alphas": list(config.alphas),
            "eta": float(eta),
            "horizon": config.horizon,
            "algorithm": algorithm,
            "window": config.window,
            "grad_bound": game.grad_bound,
        },
    )


def _aggregate(traces: list[RunTrace]) -> dict:
    episodes = traces[0].episodes
    out = {}
    if traces[0].err_sq is not None:
        out["err_sq"] = AggregateTrace.from_series(episodes, [t.err_sq for t in traces])
        out["dist"] = AggregateTrace.from_series(episodes, [np.sqrt(t.err_sq) for t in traces])
        out["avg_err_sq"] = AggregateTrace.from_series(
            episodes, [time_averaged_error(t) for t in traces]
        )
    return out


def write_aggregate_csv(aggregates: dict, algorithms, path) -> None:
    """Columns: t, then mean/std of the squared and plain distance per algorithm."""
    episodes = aggregates[algorithms[0]]["err_sq"].episodes
    header = ["t"]
    for alg in algorithms:
        header += [
            f"{alg}_mean_err_sq",
            f"{alg}_std_err_sq",
            f"{alg}_mean_dist",
            f"{alg}_std_dist",
        ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in range(episodes.size):
            out = [str(int(episodes[row]))]
            for alg in algorithms:
                sq = aggregates[alg]["err_sq"]
                dist = aggregates[alg]["dist"]
                out += [_fmt(sq.mean[row]), _fmt(sq.std[row]), _fmt(dist.mean[row]), _fmt(dist.std[row])]
            writer.writerow(out)


def compute_reports(config: ExperimentConfig, traces: dict) -> list[BoundReport]:
    """Bound rows for a bundle: VaR concentration, bias accumulation, rate fit.

    The concentration check runs on the game's noise law per agent at a
    fixed sample size; the bias check runs per algorithm-1 trial and
    agent (it needs true VaR values); the rate fit needs equilibrium
    distances and a long enough horizon.
    """
    game = build_game(config)
    reports = []
    rng = _report_rng(config)
    for agent, alpha in enumerate(config.alphas):
        dist = game.noise_distribution(agent)
        eps = dkw_confidence_width(_LEMMA3_T, _LEMMA3_GAMMA_BAR, dist.density_lower_bound)
        rep = validate_lemma3(dist, alpha, _LEMMA3_T, _LEMMA3_REPEATS, eps, rng)
        rep.detail = f"agent={agent}, " + rep.detail
        reports.append(rep)

    for trial, trace in enumerate(traces.get("algorithm1", [])):
        if trace.nu_star is None or trace.config.get("game") != "cournot":
            continue
        for agent in range(trace.num_agents):
            rep = validate_lemma4(trace, agent)
            rep.detail = f"trial={trial}, " + rep.detail
            reports.append(rep)

    for alg, alg_traces in traces.items():
        if not alg_traces or alg_traces[0].err_sq is None:
            continue
        series = AggregateTrace.from_series(
            alg_traces[0].episodes, [time_averaged_error(t) for t in alg_traces]
        )
        window = (100, config.horizon)
        if config.horizon >= 200:
            slope = fit_rate(series, window)
            reports.append(
                BoundReport(
                    name="rate",
                    empirical=slope,
                    bound=-0.4,
                    passed=slope <= -0.4,
                    detail=f"algorithm={alg}, log-log slope of mean time-averaged sq error over {window}",
                )
            )
    return reports


def write_report_csv(reports: list[BoundReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "empirical", "bound", "passed", "detail"])
        for rep in reports:
            writer.writerow(
                [rep.name, _fmt(rep.empirical), _fmt(rep.bound), str(rep.passed).lower(), rep.detail]
            )


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | None = None,
    workers: int = 1,
    progress=None,
) -> OutputBundle:
    """Execute all configured trials and write the output bundle.

    Trials run in parallel up to ``workers``; results are reduced in
    trial order, so the artifacts do not depend on scheduling.
    """
    out_dir = out_dir or config.out_dir or "out"
    os.makedirs(out_dir, exist_ok=True)
    trials_dir = os.path.join(out_dir, "trials")
    os.makedirs(trials_dir, exist_ok=True)

    def say(msg):
        if progress is not None:
            print(msg, file=progress)

    jobs = [(config, alg, idx) for alg in config.algorithms for idx in range(config.trials)]
    say(f"running {len(jobs)} trials ({config.game}, T={config.horizon}, workers={workers})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(job) for job in jobs]

    traces = {alg: [] for alg in config.algorithms}
    for (cfg, alg, idx), trace in zip(jobs, results):
        traces[alg].append(trace)

    trial_paths = {}
    for alg in config.algorithms:
        for idx, trace in enumerate(traces[alg]):
            path = os.path.join(trials_dir, trial_filename(alg, idx))
            write_trace_csv(trace, path)
            trial_paths[(alg, idx)] = path

    aggregates = {alg: _aggregate(traces[alg]) for alg in config.algorithms}
    aggregate_path = None
    plot_path = None
    if all(aggregates[alg] for alg in config.algorithms):
        aggregate_path = os.path.join(out_dir, "aggregate.csv")
        write_aggregate_csv(aggregates, config.algorithms, aggregate_path)
        plot_path = os.path.join(out_dir, "convergence.svg")
        emit_plot(
            [(alg, aggregates[alg]["dist"]) for alg in config.algorithms],
            plot_path,
        )
        say(f"wrote {aggregate_path} and {plot_path}")

    reports = compute_reports(config, traces)
    report_path = os.path.join(out_dir, "bounds.csv")
    write_report_csv(reports, report_path)

    config_path = os.path.join(out_dir, "config.yaml")
    with open(config_path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(resolved_document(config), fh, sort_keys=False)
    say(f"wrote {report_path} and {config_path}")

    return OutputBundle(
        out_dir=out_dir,
        config=config,
        traces=traces,
        aggregates=aggregates,
        reports=reports,
        trial_paths=trial_paths,
        aggregate_path=aggregate_path,
        plot_path=plot_path,
        report_path=report_path,
        config_path=config_path,
    )


def load_bundle_traces(bundle_dir: str) -> tuple[ExperimentConfig, dict]:
    config = load_config(os.path.join(bundle_dir, "config.yaml"))
    traces = {}
    for alg in config.algorithms:
        traces[alg] = []
        for idx in range(config.trials):
            path = os.path.join(bundle_dir, "trials", trial_filename(alg, idx))
            if not os.path.exists(path):
                raise FileNotFoundError(f"bundle is missing trial file {path}")
            traces[alg].append(read_trace_csv(path, config, alg))
    return config, traces


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="riskgames",
        description="Risk-averse learning experiments in convex games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (default: config out_dir or ./out)")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--strict", action="store_true", help="exit nonzero if any bound report fails")

    p_val = sub.add_parser("validate", help="parse a config file and echo the resolved values")
    p_val.add_argument("--config", required=True)

    p_rep = sub.add_parser("report", help="recompute bound reports from a stored bundle")
    p_rep.add_argument("--bundle", required=True)
    p_rep.add_argument("--strict", action="store_true")

    args = parser.parse_args(argv)

    try:
        if args.command == "validate":
            config = load_config(args.config)
            yaml.safe_dump(resolved_document(config), sys.stdout, sort_keys=False)
            return 0

        if args.command == "run":
            config = load_config(args.config)
            bundle = run_experiment(
                config, out_dir=args.out, workers=max(1, args.workers), progress=sys.stderr
            )
            for rep in bundle.reports:
                print(rep, file=sys.stderr)
            if args.strict and not bundle.all_passed:
                return 1
            return 0

        if args.command == "report":
            config, traces = load_bundle_traces(args.bundle)
            reports = compute_reports(config, traces)
            write_report_csv(reports, os.path.join(args.bundle, "bounds.csv"))
            for rep in reports:
                print(rep)
            if args.strict and not all(r.passed for r in reports):
                return 1
            return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    return 0


if __name__ == "__main__":
    sys.exit(main())
