"""Acceptance criteria, one test each.

Each test records a PASS/FAIL line through the ``report`` fixture; the
lines are printed together at the end of the pytest run. Run just this
file with ``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import io
import itertools
import sys
import time
from contextlib import redirect_stdout

import numpy as np
import pytest

from crgame.bayes import DecisionContext, best_response, simulate_realization, solve_game
from crgame.cli import run
from crgame.core import SignalHistory, mirrored_spec
from crgame.montecarlo import Deviation, ExperimentConfig, argmax_customer, exact_expectation, run_trials
from crgame.perfect import equilibrium_grouping
from golden import AVAIL_R0, POOL_R04
from oracles import brute_force_utility, known_state, nash_groupings, no_deviation_violations, reachable_contexts, strict_instance


def golden_mismatches(table, r):
    bad = []
    for k, p in enumerate(table["p"]):
        spec = mirrored_spec(3, p, r)
        strategy = solve_game(spec)
        for signals, actions in table["rows"]:
            got = simulate_realization(spec, 0, tuple(s - 1 for s in signals), strategy).actions
            if tuple(a + 1 for a in got) != actions[k]:
                bad.append((p, signals, actions[k], got))
    return bad


def test_ac1_golden_table_resource_pool(report):
    start = time.perf_counter()
    bad = golden_mismatches(POOL_R04, 0.4)
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    report("AC1 golden table r=0.4", ok, f"{16 - len(bad)}/16 cells, {elapsed:.3f}s")
    assert ok, bad


def test_ac2_golden_table_available(report):
    start = time.perf_counter()
    bad = golden_mismatches(AVAIL_R0, 0.0)
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 1.0
    report("AC2 golden table r=0", ok, f"{24 - len(bad)}/24 cells, {elapsed:.3f}s")
    assert ok, bad


def test_ac3_greedy_matches_enumeration(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    failures = 0
    instances = 250
    for _ in range(instances):
        spec = strict_instance(rng)
        sizes = spec.sizes[:, 0]
        expected = nash_groupings(sizes, spec.num_customers, spec.utility)
        got = equilibrium_grouping(None, spec.num_customers, 0, spec).counts
        failures += len(expected) != 1 or got != expected[0]
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 10.0
    report("AC3 greedy equilibrium oracle", ok, f"{failures} failures over {instances} instances, {elapsed:.2f}s")
    assert ok


def test_ac4_subgame_perfection(report):
    violations = []
    for n in (3, 4, 5):
        spec = known_state((100, 40), n)
        violations += no_deviation_violations(spec, 0)
    ok = not violations
    report("AC4 subgame perfection", ok, f"{len(violations)} violations for N in 3..5")
    assert ok, violations[:5]


def test_ac5_best_response_optimal_under_uncertainty(report):
    worst = 0.0
    checked = 0
    for n, p, r in itertools.product((2, 3, 4), (0.55, 0.7, 0.9), (0.0, 0.4, 1.0)):
        spec = mirrored_spec(n, p, r)
        strategy = solve_game(spec)
        for actions, signals, own in reachable_contexts(spec):
            observed = tuple(list(actions).count(j) for j in range(2))
            ctx = DecisionContext(len(actions), observed, SignalHistory.from_signals(signals, spec), own)
            chosen = best_response(ctx, spec, strategy)
            values = [brute_force_utility(spec, strategy, actions, signals, own, a) for a in range(2)]
            worst = max(worst, max(values) - values[chosen])
            checked += 1
    ok = worst <= 1e-9
    report("AC5 best response vs brute force", ok, f"{checked} contexts, worst gap {worst:.2e}")
    assert ok


def test_ac6_deviation_monotonicity(report):
    miss = np.round(np.arange(0, 1.0001, 0.1), 10)
    qualities = np.round(np.arange(0.5, 1.0001, 0.05), 10)
    violations = []
    for p in qualities:
        spec = mirrored_spec(5, float(p), 0.4)
        strategy = solve_game(spec)
        second = [exact_expectation(spec, strategy, Deviation(1, float(m)))[1] for m in miss]
        violations += [(p, a, b) for a, b in zip(second, second[1:]) if b > a + 1e-9]
    spec = mirrored_spec(5, 0.9, 0.4)
    before = exact_expectation(spec)[2]
    after = exact_expectation(spec, deviation=Deviation(1, 1.0))[2]
    ok = not violations and after >= before
    report(
        "AC6 deviation monotonicity",
        ok,
        f"{len(violations)} increases over {len(qualities)}x{len(miss)} grid; customer 3 {before:.2f} -> {after:.2f}",
    )
    assert ok, violations


def test_ac7_sweep_anchor_cells(report):
    high = exact_expectation(mirrored_spec(3, 0.95, 0.1))
    low = exact_expectation(mirrored_spec(3, 0.55, 0.9))
    first = argmax_customer(high) + 1
    second = argmax_customer(low) + 1
    ok = first == 3 and second == 1
    report("AC7 sweep anchors", ok, f"argmax at (0.95, 0.1) = {first}, at (0.55, 0.9) = {second}")
    assert ok


def test_ac8_monte_carlo_consistency(report):
    spec = mirrored_spec(3, 0.9, 0.4)
    start = time.perf_counter()
    strategy = solve_game(spec)
    exact = exact_expectation(spec, strategy)
    passing = 0
    for seed in range(100):
        res = run_trials(ExperimentConfig(spec, trials=100_000, seed=seed), strategy)
        passing += bool(np.all(np.abs(res.means - exact) <= 4 * res.stderrs))
    elapsed = time.perf_counter() - start
    ok = passing >= 99 and elapsed < 30.0
    report("AC8 Monte Carlo consistency", ok, f"{passing}/100 seeds within 4 SE, {elapsed:.1f}s")
    assert ok


def _cli_bytes(argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(list(argv))
    return code, buf.getvalue().encode()


def test_ac9_determinism(report, tmp_path):
    config = tmp_path / "dev.yaml"
    config.write_text(
        "game: {mirrored: {customers: 4, p: 0.8, r: 0.4}}\n"
        "experiment:\n  trials: 20000\n  seed: 31\n  deviation: {customer: 2, p_mis: [0, 0.5]}\n"
    )
    commands = [
        ("solve-perfect", "--customers", "5"),
        ("solve-bayes", "--customers", "5"),
        ("best-response-table", "--p", "0.6,0.9", "--paper-row-order"),
        ("experiment", "--trials", "50000", "--seed", "7"),
        ("experiment", "--config", str(config)),
        ("experiment", "--config", str(config), "--p", "0.55,0.95", "--r", "0.1,0.9"),
    ]
    differing = [c[0] for c in commands if _cli_bytes(c) != _cli_bytes(c) or _cli_bytes(c)[0] != 0]
    ok = not differing
    report("AC9 determinism", ok, f"{len(commands) - len(differing)}/{len(commands)} commands byte-identical")
    assert ok, differing


def test_ac10_scale(report):
    spec = mirrored_spec(10, 0.9, 0.4)
    start = time.perf_counter()
    table = solve_game(spec)
    elapsed = time.perf_counter() - start
    # groupings times signal-count differences at each position
    polynomial = sum((pos + 1) ** 2 for pos in range(10))
    histories = sum(2**pos * (pos + 1) for pos in range(10))
    ok = elapsed < 60.0 and table.num_contexts <= polynomial
    report(
        "AC10 scale N=10",
        ok,
        f"{table.num_contexts} contexts (bound {polynomial}, raw histories {histories}), {elapsed:.2f}s",
    )
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
