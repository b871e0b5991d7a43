"""Equilibria when every customer knows the state.

Covers the Nash grouping condition of the simultaneous game, the greedy
construction of an equilibrium grouping, candidate-table pruning for
subgames, and the subgame-perfect strategy of the sequential game.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from crgame.core import UTILITY_TOL, GameSpec
from crgame.errors import DomainError, InternalInvariantError


def first_argmax(values: Sequence[float], tol: float = UTILITY_TOL) -> int:
    """Index of the first entry within ``tol`` of the maximum."""
    arr = np.asarray(values, dtype=float)
    best = np.nanmax(arr)
    return int(np.flatnonzero(arr >= best - tol)[0])


def _table_set(subset: Iterable[int] | None, spec: GameSpec) -> tuple[int, ...]:
    if subset is None:
        return tuple(range(spec.num_tables))
    tables = tuple(sorted(set(int(j) for j in subset)))
    if tables and not (0 <= tables[0] and tables[-1] < spec.num_tables):
        raise DomainError(f"table subset {tables} is out of range")
    return tables


def _counts(n: Sequence[int], spec: GameSpec) -> np.ndarray:
    counts = np.asarray(n, dtype=int)
    if counts.shape != (spec.num_tables,) or np.any(counts < 0):
        raise DomainError(f"grouping {tuple(n)} does not fit {spec.num_tables} tables")
    return counts


@dataclass(frozen=True)
class EquilibriumGrouping:
    counts: tuple[int, ...]
    table_subset: tuple[int, ...]
    customers: int


@dataclass(frozen=True)
class PerfectPlay:
    actions: tuple[int, ...]
    final: tuple[int, ...]
    utilities: tuple[float, ...]


def is_equilibrium_grouping(
    n: Sequence[int],
    state: int,
    spec: GameSpec,
    subset: Iterable[int] | None = None,
) -> bool:
    """True when no occupied table's customer gains by moving to another table in ``subset``."""
    counts = _counts(n, spec)
    tables = _table_set(subset, spec)
    sizes = spec.sizes[:, state]
    u = spec.utility
    for x in tables:
        if counts[x] == 0:
            continue
        stay = u(sizes[x], int(counts[x]))
        for y in tables:
            if y != x and stay < u(sizes[y], int(counts[y]) + 1) - UTILITY_TOL:
                return False
    return True


def equilibrium_grouping(
    subset: Iterable[int] | None,
    customers: int,
    state: int,
    spec: GameSpec,
) -> EquilibriumGrouping:
    """Seat ``customers`` one at a time, each at the table best for them right now."""
    tables = _table_set(subset, spec)
    if not tables:
        raise DomainError("equilibrium grouping needs a nonempty table set")
    if customers < 0:
        raise DomainError("customer count must be nonnegative")
    sizes = spec.sizes[:, state]
    counts = [0] * spec.num_tables
    for _ in range(customers):
        gains = [spec.utility(sizes[x], counts[x] + 1) for x in tables]
        counts[tables[first_argmax(gains)]] += 1
    return EquilibriumGrouping(tuple(counts), tables, customers)


def prune_candidates(
    subset: Iterable[int] | None,
    observed: Sequence[int],
    customers: int,
    state: int,
    spec: GameSpec,
) -> tuple[int, ...]:
    """Drop tables already holding more customers than their equilibrium share."""
    start = _table_set(subset, spec)
    seen = _counts(observed, spec)
    if any(seen[j] for j in range(spec.num_tables) if j not in start):
        raise DomainError("observed grouping has customers outside the table subset")
    kept = start
    budget = customers
    for _ in range(len(start) + 1):
        target = equilibrium_grouping(kept, budget, state, spec).counts
        survivors = tuple(x for x in kept if target[x] >= seen[x])
        budget = customers - sum(int(seen[x]) for x in start if x not in survivors)
        if survivors == kept:
            if not kept:
                raise InternalInvariantError("candidate pruning removed every table")
            return kept
        kept = survivors
        if not kept:
            raise InternalInvariantError("candidate pruning removed every table")
    raise InternalInvariantError("candidate pruning did not reach a fixed point")


def candidate_grouping(
    observed: Sequence[int], state: int, spec: GameSpec
) -> tuple[tuple[int, ...], EquilibriumGrouping]:
    """Surviving tables and the equilibrium grouping targeted from ``observed``."""
    seen = _counts(observed, spec)
    n_total = spec.num_customers
    tables = prune_candidates(None, seen, n_total, state, spec)
    budget = n_total - sum(int(seen[x]) for x in range(spec.num_tables) if x not in tables)
    return tables, equilibrium_grouping(tables, budget, state, spec)


def subgame_perfect_action(
    position: int,
    observed: Sequence[int],
    state: int,
    spec: GameSpec,
) -> int:
    """Table chosen by the customer at 0-based ``position`` after seeing ``observed``."""
    seen = _counts(observed, spec)
    if int(seen.sum()) != position or not 0 <= position < spec.num_customers:
        raise DomainError(f"position {position} does not match grouping {tuple(observed)}")
    tables, target = candidate_grouping(seen, state, spec)
    open_tables = [x for x in tables if seen[x] < target.counts[x]]
    if not open_tables:
        raise InternalInvariantError(f"no open candidate table at position {position}")
    sizes = spec.sizes[:, state]
    values = [spec.utility(sizes[x], target.counts[x]) for x in open_tables]
    return open_tables[first_argmax(values)]


def continue_play(
    prefix: Sequence[int], state: int, spec: GameSpec
) -> tuple[int, ...]:
    """Complete an action sequence with subgame-perfect play from ``len(prefix)`` on."""
    counts = [0] * spec.num_tables
    actions = list(prefix)
    for x in actions:
        counts[x] += 1
    for position in range(len(actions), spec.num_customers):
        x = subgame_perfect_action(position, counts, state, spec)
        actions.append(x)
        counts[x] += 1
    return tuple(actions)


def grouping_of(actions: Sequence[int], num_tables: int) -> tuple[int, ...]:
    return tuple(int(c) for c in np.bincount(np.asarray(actions, dtype=int), minlength=num_tables))


def realized_utilities(actions: Sequence[int], state: int, spec: GameSpec) -> tuple[float, ...]:
    final = grouping_of(actions, spec.num_tables)
    sizes = spec.sizes[:, state]
    return tuple(spec.utility(sizes[x], final[x]) for x in actions)


def play_sequential_perfect(state: int, spec: GameSpec) -> PerfectPlay:
    actions = continue_play((), state, spec)
    final = grouping_of(actions, spec.num_tables)
    return PerfectPlay(actions, final, realized_utilities(actions, state, spec))
