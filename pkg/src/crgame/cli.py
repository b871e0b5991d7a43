"""Command line front end.

Every subcommand writes CSV with a header row. Tables, states, signals,
and customers are printed 1-based. Exit codes: 0 success, 2 bad
configuration, 3 budget exceeded, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import sys
from typing import Iterable, Sequence

import numpy as np

from crgame.bayes import simulate_realization, solve_game
from crgame.config import Config, ConfigError, ExperimentSettings, load_config
from crgame.core import GameSpec, mirrored_spec
from crgame.errors import (
    BudgetExceededError,
    CRGError,
    DomainError,
    ImpossibleObservationError,
    InternalInvariantError,
    InvalidGameError,
    UnreachableContextError,
    UnsupportedConfigurationError,
)
from crgame.montecarlo import (
    Deviation,
    ExperimentConfig,
    evaluate,
    exact_expectation,
    run_trials,
    sweep,
    with_signal_quality,
)
from crgame.perfect import play_sequential_perfect

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4


def fmt(value: float | int) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML game/experiment file")
    common.add_argument("--customers", type=int, default=3, help="customers in the built-in game (default 3)")
    common.add_argument("--p", type=_float_list, metavar="LIST", help="signal qualities, comma separated")
    common.add_argument("--r", type=_float_list, metavar="LIST", help="size ratios, comma separated")
    common.add_argument("--seed", type=_seed, help="64-bit seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")

    parser = argparse.ArgumentParser(
        prog="crgame",
        description="Solve sequential table-selection games with negative externality and social learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    perfect = sub.add_parser("solve-perfect", parents=[common], help="subgame-perfect play for a known state")
    perfect.add_argument("--state", type=int, default=1, help="true state, 1-based (default 1)")
    sub.add_parser("solve-bayes", parents=[common], help="expected utilities under noisy signals")
    table = sub.add_parser("best-response-table", parents=[common], help="actions for every signal profile")
    table.add_argument(
        "--paper-row-order",
        action="store_true",
        help="list profiles from all-last-signal down, first customer varying fastest",
    )
    sub.add_parser("experiment", parents=[common], help="Monte Carlo, deviation, or sweep study")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    if args.config:
        config = load_config(args.config)
    else:
        p = args.p[0] if args.p else 0.9
        r = args.r[0] if args.r else 0.4
        if args.customers < 1:
            raise ConfigError("must be positive", "--customers")
        try:
            config = Config(mirrored_spec(args.customers, p, r), ExperimentSettings(), p)
        except InvalidGameError as exc:
            raise ConfigError(str(exc), "--p/--r") from exc
    exp = config.experiment
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 0:
            raise ConfigError("must be nonnegative", "--trials")
        changes["trials"] = args.trials
    if args.config and args.p:
        changes["p_grid"] = tuple(args.p)
    if args.config and args.r:
        changes["r_grid"] = tuple(args.r)
    if changes:
        fields = dict(exp.__dict__)
        fields.update(changes)
        config = Config(config.game, ExperimentSettings(**fields), config.binary_p)
    return config


def _writer(stream: io.TextIOBase) -> csv.writer:
    return csv.writer(stream, lineterminator="\n")


def cmd_solve_perfect(config: Config, state: int, out) -> None:
    spec = config.game
    if not 1 <= state <= spec.num_states:
        raise ConfigError(f"state must lie in 1..{spec.num_states}", "--state")
    play = play_sequential_perfect(state - 1, spec)
    w = _writer(out)
    w.writerow(["kind", "values"])
    w.writerow(["grouping", *play.final])
    w.writerow(["actions", *(a + 1 for a in play.actions)])
    w.writerow(["utilities", *(fmt(u) for u in play.utilities)])


def cmd_solve_bayes(config: Config, out) -> None:
    spec = config.game
    exp = config.experiment
    strategy = solve_game(spec)
    result = evaluate(spec, exp.trials, exp.seed, strategy=strategy)
    w = _writer(out)
    w.writerow(["customer", "expected_utility", "stderr", "method"])
    method = "exact" if result.exact else "monte-carlo"
    for c, (mean, se) in enumerate(zip(result.means, result.stderrs), start=1):
        w.writerow([c, fmt(mean), fmt(se), method])


def signal_profiles(num_signals: int, num_customers: int, reference_order: bool = False) -> Iterable[tuple[int, ...]]:
    """Lexicographic profiles, or reverse order with the first customer varying fastest."""
    if not reference_order:
        return itertools.product(range(num_signals), repeat=num_customers)
    reverse = range(num_signals - 1, -1, -1)
    return (tuple(reversed(prof)) for prof in itertools.product(reverse, repeat=num_customers))


def _specs_by_quality(config: Config, p_list: Sequence[float] | None) -> list[tuple[str, GameSpec]]:
    if p_list:
        return [(fmt(p), with_signal_quality(config.game, p)) for p in p_list]
    label = fmt(config.binary_p) if config.binary_p is not None else ""
    return [(label, config.game)]


def cmd_best_response_table(config: Config, p_list: Sequence[float] | None, reference_order: bool, out) -> None:
    n = config.game.num_customers
    w = _writer(out)
    w.writerow(["p", *(f"s_{i}" for i in range(1, n + 1)), *(f"x_{i}" for i in range(1, n + 1))])
    for label, spec in _specs_by_quality(config, p_list):
        strategy = solve_game(spec)
        for profile in signal_profiles(spec.num_signals, n, reference_order):
            state = _consistent_state(spec, profile)
            rec = simulate_realization(spec, state, profile, strategy)
            w.writerow([label, *(s + 1 for s in profile), *(a + 1 for a in rec.actions)])


def _consistent_state(spec: GameSpec, profile: Sequence[int]) -> int:
    # actions do not depend on the true state; any state giving the profile positive probability works
    f = spec.likelihood
    for state in range(spec.num_states):
        if spec.prior_array[state] > 0 and all(f[s, state] > 0 for s in profile):
            return state
    raise UnreachableContextError(f"signal profile {profile} has zero probability")


def cmd_experiment(config: Config, out) -> None:
    spec = config.game
    exp = config.experiment
    w = _writer(out)
    use_exact = exp.method == "exact" or (exp.method is None and exp.trials == 0)
    if exp.deviation_customer is not None:
        if spec.num_tables != 2:
            raise UnsupportedConfigurationError("deviation studies need exactly two tables")
        w.writerow(["p", "p_mis", "customer", "mean", "stderr"])
        for label, game in _specs_by_quality(config, exp.p_grid):
            strategy = solve_game(game)
            for p_mis in exp.p_mis:
                dev = Deviation(exp.deviation_customer, p_mis)
                if use_exact:
                    means = exact_expectation(game, strategy, dev)
                    errs = np.zeros_like(means)
                else:
                    res = run_trials(ExperimentConfig(game, exp.trials, exp.seed, deviation=dev), strategy)
                    means, errs = res.means, res.stderrs
                for c in range(game.num_customers):
                    w.writerow([label, fmt(p_mis), c + 1, fmt(means[c]), fmt(errs[c])])
        return
    if exp.p_grid and exp.r_grid:
        result = sweep(ExperimentConfig(spec, exp.trials, exp.seed, exp.p_grid, exp.r_grid))
        n = spec.num_customers
        w.writerow(["p", "r", "argmax_customer", *(f"mean_{i}" for i in range(1, n + 1))])
        for cell in result.cells:
            w.writerow([fmt(cell.p), fmt(cell.r), cell.best_customer + 1, *(fmt(m) for m in cell.means)])
        return
    strategy = solve_game(spec)
    if use_exact:
        means = exact_expectation(spec, strategy)
        errs = np.zeros_like(means)
    else:
        res = run_trials(ExperimentConfig(spec, exp.trials, exp.seed), strategy)
        means, errs = res.means, res.stderrs
    w.writerow(["customer", "mean", "stderr"])
    for c in range(spec.num_customers):
        w.writerow([c + 1, fmt(means[c]), fmt(errs[c])])


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    buffer = io.StringIO()
    try:
        config = resolve_config(args)
        if args.command == "solve-perfect":
            cmd_solve_perfect(config, args.state, buffer)
        elif args.command == "solve-bayes":
            cmd_solve_bayes(config, buffer)
        elif args.command == "best-response-table":
            cmd_best_response_table(config, args.p, args.paper_row_order, buffer)
        else:
            cmd_experiment(config, buffer)
    except (ConfigError, InvalidGameError, UnsupportedConfigurationError, DomainError) as exc:
        print(f"crgame: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"crgame: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InternalInvariantError, ImpossibleObservationError, UnreachableContextError, CRGError) as exc:
        print(f"crgame: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    text = buffer.getvalue()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
