"""Seeded simulation and exact evaluation of the solved game.

Random draws come from PCG64 streams keyed by ``(seed, block index)``
through :class:`numpy.random.SeedSequence`, one stream per block of
``BLOCK_SIZE`` consecutive trials. A trial's draws therefore depend only
on the seed and its own index, and blocks can be generated in any order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from crgame.bayes import StrategyTable, simulate_realization, solve_game
from crgame.core import UTILITY_TOL, GameSpec, binary_signal_model, mirrored_spec
from crgame.errors import BudgetExceededError, DomainError, UnsupportedConfigurationError

BLOCK_SIZE = 8192
EXACT_PROFILE_LIMIT = 10**6


@dataclass(frozen=True)
class Deviation:
    """Customer at 0-based ``customer`` plays the other table with probability ``p_mis``."""

    customer: int
    p_mis: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_mis <= 1.0:
            raise DomainError(f"miss probability must lie in [0, 1], got {self.p_mis}")
        if self.customer < 0:
            raise DomainError("deviating customer index must be nonnegative")


@dataclass(frozen=True)
class ExperimentConfig:
    base: GameSpec
    trials: int = 0
    seed: int = 0
    p_grid: tuple[float, ...] = ()
    r_grid: tuple[float, ...] = ()
    deviation: Deviation | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        object.__setattr__(self, "r_grid", tuple(float(r) for r in self.r_grid))
        if self.trials < 0:
            raise DomainError("trial count must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if any(not 0.5 <= p <= 1.0 for p in self.p_grid):
            raise DomainError("signal qualities must lie in [0.5, 1]")
        if any(not 0.0 <= r <= 1.0 for r in self.r_grid):
            raise DomainError("size ratios must lie in [0, 1]")


@dataclass(frozen=True)
class ExperimentResult:
    means: np.ndarray
    stderrs: np.ndarray
    trials: int
    seed: int
    exact: bool = False

    @property
    def best_customer(self) -> int:
        return argmax_customer(self.means)


@dataclass(frozen=True)
class SweepCell:
    p: float
    r: float
    best_customer: int
    means: np.ndarray


@dataclass(frozen=True)
class SweepResult:
    cells: list[SweepCell] = field(default_factory=list)

    def grid(self, p_grid: Sequence[float], r_grid: Sequence[float]) -> np.ndarray:
        """Best customer per cell as a ``(len(p_grid), len(r_grid))`` array."""
        lookup = {(c.p, c.r): c.best_customer for c in self.cells}
        return np.array([[lookup[(p, r)] for r in r_grid] for p in p_grid])


def argmax_customer(means: Sequence[float]) -> int:
    arr = np.asarray(means, dtype=float)
    return int(np.flatnonzero(arr >= arr.max() - UTILITY_TOL)[0])


def with_signal_quality(spec: GameSpec, p: float) -> GameSpec:
    if spec.num_states != 2 or spec.num_signals != 2:
        raise UnsupportedConfigurationError("signal quality applies to the binary two-state model")
    return spec.replace(signal_model=binary_signal_model(p))


def _flipped_set(spec: GameSpec, deviation: Deviation | None) -> frozenset[int]:
    if deviation is None:
        return frozenset()
    if spec.num_tables != 2:
        raise UnsupportedConfigurationError("the opposite table is defined only for two tables")
    if deviation.customer >= spec.num_customers:
        raise DomainError(f"no customer {deviation.customer} among {spec.num_customers}")
    return frozenset({deviation.customer})


def exact_expectation(
    spec: GameSpec,
    strategy: StrategyTable | None = None,
    deviation: Deviation | None = None,
    limit: int = EXACT_PROFILE_LIMIT,
) -> np.ndarray:
    """Per-customer expected utility, summing over every state and signal profile."""
    profiles = spec.num_signals**spec.num_customers
    if profiles > limit:
        raise BudgetExceededError("signal profiles", profiles, limit)
    strat = solve_game(spec) if strategy is None else strategy
    flips = _flipped_set(spec, deviation)
    variants = [(1.0, frozenset())]
    if deviation is not None and deviation.p_mis > 0:
        variants = [(1.0 - deviation.p_mis, frozenset()), (deviation.p_mis, flips)]
    f = spec.likelihood
    total = np.zeros(spec.num_customers)
    for state, g in enumerate(spec.prior_array):
        if g == 0:
            continue
        for signals in itertools.product(range(spec.num_signals), repeat=spec.num_customers):
            weight = g * np.prod(f[list(signals), state])
            if weight == 0:
                continue
            for share, flipped in variants:
                if share == 0:
                    continue
                rec = simulate_realization(spec, state, signals, strat, flipped)
                total += weight * share * np.asarray(rec.utilities)
    return total


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _draw_block(
    spec: GameSpec, rng: np.random.Generator, size: int, p_mis: float | None
) -> np.ndarray:
    """Rows of ``(state, signal_1..signal_N, flip)`` for ``size`` trials."""
    states = rng.choice(spec.num_states, size=size, p=spec.prior_array)
    cdf = np.cumsum(spec.likelihood, axis=0)[:, states].T
    cdf[:, -1] = 1.0
    u = rng.random((size, spec.num_customers))
    signals = (u[:, :, None] >= cdf[:, None, :]).sum(axis=2)
    flips = np.zeros(size, dtype=np.int64)
    if p_mis is not None:
        flips = (rng.random(size) < p_mis).astype(np.int64)
    return np.column_stack([states, signals, flips])


def _unique_rows(draws: np.ndarray, spec: GameSpec) -> tuple[np.ndarray, np.ndarray]:
    radix = [spec.num_states] + [spec.num_signals] * spec.num_customers + [2]
    if float(np.prod(radix, dtype=float)) >= 2**62:
        unique, inverse = np.unique(draws, axis=0, return_inverse=True)
        return unique, np.ravel(inverse)
    codes = np.zeros(len(draws), dtype=np.int64)
    for col, base in enumerate(radix):
        codes = codes * base + draws[:, col]
    _, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
    return draws[first], np.ravel(inverse)


def run_trials(
    config: ExperimentConfig, strategy: StrategyTable | None = None
) -> ExperimentResult:
    """Sample states and signals, play the solved strategy, and average utilities."""
    spec = config.base
    n = spec.num_customers
    if config.trials == 0:
        empty = np.full(n, np.nan)
        return ExperimentResult(empty, empty.copy(), 0, config.seed)
    flips = _flipped_set(spec, config.deviation)
    strat = solve_game(spec) if strategy is None else strategy
    p_mis = config.deviation.p_mis if config.deviation is not None else None
    blocks = []
    for block, start in enumerate(range(0, config.trials, BLOCK_SIZE)):
        size = min(BLOCK_SIZE, config.trials - start)
        blocks.append(_draw_block(spec, _block_rng(config.seed, block), size, p_mis))
    draws = np.concatenate(blocks)
    unique, inverse = _unique_rows(draws, spec)
    outcomes = np.empty((len(unique), n))
    for row, (state, *signals, flip) in enumerate(unique.tolist()):
        rec = simulate_realization(spec, state, signals, strat, flips if flip else frozenset())
        outcomes[row] = rec.utilities
    utilities = outcomes[inverse]
    means = utilities.mean(axis=0)
    if config.trials > 1:
        stderrs = utilities.std(axis=0, ddof=1) / np.sqrt(config.trials)
    else:
        stderrs = np.zeros(n)
    return ExperimentResult(means, stderrs, config.trials, config.seed)


def deviation_experiment(
    config: ExperimentConfig, strategy: StrategyTable | None = None
) -> ExperimentResult:
    """Monte Carlo run where one customer misses their best response at random."""
    if config.deviation is None:
        raise UnsupportedConfigurationError("deviation experiment needs a deviating customer")
    if config.base.num_tables != 2:
        raise UnsupportedConfigurationError("the opposite table is defined only for two tables")
    return run_trials(config, strategy)


def evaluate(
    spec: GameSpec,
    trials: int,
    seed: int,
    deviation: Deviation | None = None,
    strategy: StrategyTable | None = None,
) -> ExperimentResult:
    """Exact expectation when the profile space is small enough, else simulation."""
    if spec.num_signals**spec.num_customers <= EXACT_PROFILE_LIMIT:
        means = exact_expectation(spec, strategy, deviation)
        return ExperimentResult(means, np.zeros_like(means), 0, seed, exact=True)
    if trials <= 0:
        raise DomainError("simulation fallback needs a positive trial count")
    return run_trials(ExperimentConfig(spec, trials, seed, deviation=deviation), strategy)


def sweep(config: ExperimentConfig) -> SweepResult:
    """Best-placed customer over a grid of signal qualities and size ratios."""
    if not config.p_grid or not config.r_grid:
        raise DomainError("sweep needs nonempty p and r grids")
    n = config.base.num_customers
    cells = []
    for p in config.p_grid:
        for r in config.r_grid:
            result = evaluate(mirrored_spec(n, p, r), config.trials, config.seed)
            cells.append(SweepCell(p, r, result.best_customer, result.means))
    return SweepResult(cells)
