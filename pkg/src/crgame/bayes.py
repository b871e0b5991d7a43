"""Backward-induction solver for the sequential game with noisy signals.

Every customer sees the tables chosen so far and the signals revealed by
earlier customers, draws a private signal, and picks the table with the
highest expected utility. That expectation needs the distribution of how
many later customers join each table, which in turn depends on their
best responses. The recursion below computes both together, memoized on
``(position, grouping, history statistic)``.

A history enters only through its log-likelihood vector shifted so the
largest entry is 0: signals are conditionally i.i.d. given the state, so
two histories with proportional likelihoods lead to identical beliefs now
and later.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from crgame.core import GameSpec, SignalHistory, belief_from_history, prior_belief, safe_log, shift_log
from crgame.errors import (
    BudgetExceededError,
    DomainError,
    ImpossibleObservationError,
    InternalInvariantError,
    UnreachableContextError,
    UnsupportedConfigurationError,
)
from crgame.perfect import first_argmax, grouping_of

DEFAULT_BUDGET = 10**7
STAT_DECIMALS = 12


def default_budget() -> int:
    raw = os.environ.get("CRG_BUDGET")
    return int(raw) if raw else DEFAULT_BUDGET


def state_space_bound(spec: GameSpec) -> int:
    """Upper bound on memo entries: positions x groupings x signal-count vectors x own signals."""
    k, s = spec.num_tables, spec.num_signals
    contexts = sum(
        math.comb(pos + k - 1, k - 1) * math.comb(pos + s - 1, s - 1)
        for pos in range(spec.num_customers)
    )
    return contexts * s


def _stat_key(log_stat: np.ndarray) -> tuple[float, ...]:
    return tuple(np.round(log_stat, STAT_DECIMALS).tolist())


@dataclass(frozen=True)
class DecisionContext:
    """What the customer at 0-based ``position`` knows when choosing."""

    position: int
    observed: tuple[int, ...]
    history: SignalHistory
    own_signal: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "observed", tuple(int(c) for c in self.observed))
        if sum(self.observed) != self.position or len(self.history) != self.position:
            raise DomainError(
                f"context at position {self.position} needs {self.position} prior "
                f"choices and signals, got {self.observed} and {self.history.signals}"
            )


@dataclass
class ContextNode:
    """Solved decision context before the customer's own signal is drawn.

    ``actions[s]`` is the best response to own signal ``s`` (-1 when ``s``
    cannot occur given the history), ``values[s, j]`` the expected utility of
    table ``j``, and ``successors[s, j, l]`` the distribution of how many
    customers from this position on sit at ``j`` when this customer takes
    ``j`` in state ``l``. ``continuation[l, j]`` is that distribution when
    this customer best-responds to a signal drawn in state ``l``.
    """

    position: int
    observed: tuple[int, ...]
    log_stat: np.ndarray
    actions: tuple[int, ...]
    values: np.ndarray
    successors: np.ndarray
    continuation: np.ndarray


@dataclass(frozen=True)
class TrialRecord:
    state: int
    signals: tuple[int, ...]
    actions: tuple[int, ...]
    final: tuple[int, ...]
    utilities: tuple[float, ...]


def _shift(pmf: np.ndarray) -> np.ndarray:
    out = np.zeros_like(pmf)
    out[..., 1:] = pmf[..., :-1]
    if np.any(pmf[..., -1] > 0):
        raise InternalInvariantError("occupancy distribution overflowed its support")
    return out


class StrategyTable:
    """Memoized best responses for one game.

    Contexts are solved on first access, so lookups never fail for a
    reachable context; :func:`solve_game` fills the whole table up front.
    """

    def __init__(self, spec: GameSpec, budget: int | None = None):
        self.spec = spec
        self.budget = default_budget() if budget is None else budget
        bound = state_space_bound(spec)
        if bound > self.budget:
            raise BudgetExceededError("memo entries", bound, self.budget)
        self._nodes: dict[tuple, ContextNode] = {}
        n, k, l = spec.num_customers, spec.num_tables, spec.num_states
        self._terminal = np.zeros((l, k, n + 1))
        self._terminal[:, :, 0] = 1.0
        self._log_g0 = safe_log(spec.prior_array)
        self._f = spec.likelihood
        self._log_f = spec.log_likelihood
        self._u = np.nan_to_num(spec.utility_grid, nan=0.0)

    def __len__(self) -> int:
        return sum(sum(a >= 0 for a in node.actions) for node in self._nodes.values())

    @property
    def num_contexts(self) -> int:
        return len(self._nodes)

    def nodes(self) -> Iterator[ContextNode]:
        return iter(self._nodes.values())

    def entries(self) -> Iterator[tuple[tuple, int, np.ndarray, np.ndarray]]:
        """Yield ``((position, observed, stat_key, s), action, values, successors)``."""
        for key, node in self._nodes.items():
            for s, a in enumerate(node.actions):
                if a >= 0:
                    yield key + (s,), a, node.values[s], node.successors[s]

    def root(self) -> ContextNode:
        return self.node(0, (0,) * self.spec.num_tables, SignalHistory.empty(self.spec))

    def node(self, position: int, observed: Sequence[int], history: SignalHistory) -> ContextNode:
        return self._solve(position, tuple(int(c) for c in observed), np.asarray(history.log_stat))

    def continuation(self, position: int, observed: tuple[int, ...], log_stat: np.ndarray) -> np.ndarray:
        if position == self.spec.num_customers:
            return self._terminal
        return self._solve(position, observed, log_stat).continuation

    def action(self, context: DecisionContext) -> int:
        node = self.node(context.position, context.observed, context.history)
        a = node.actions[context.own_signal]
        if a < 0:
            raise UnreachableContextError(
                f"signal {context.own_signal} is impossible after history {context.history.signals}"
            )
        return a

    def _solve(self, position: int, observed: tuple[int, ...], log_stat: np.ndarray) -> ContextNode:
        key = (position, observed, _stat_key(log_stat))
        node = self._nodes.get(key)
        if node is not None:
            return node
        spec = self.spec
        n, k, l, ns = spec.num_customers, spec.num_tables, spec.num_states, spec.num_signals
        if not 0 <= position < n or sum(observed) != position:
            raise DomainError(f"no decision at position {position} with grouping {observed}")
        log_weights = self._log_g0 + log_stat
        if np.max(log_weights) == -np.inf:
            raise ImpossibleObservationError("history has zero probability under every state")
        weights = np.exp(log_weights - np.max(log_weights))
        actions = []
        values = np.full((ns, k), np.nan)
        successors = np.zeros((ns, k, l, n + 1))
        chosen_cont = np.zeros((ns, l, k, n + 1))
        for s in range(ns):
            log_joint = log_weights + self._log_f[s]
            if np.max(log_joint) == -np.inf:
                actions.append(-1)
                continue
            joint = np.exp(log_joint - np.max(log_joint))
            belief = joint / joint.sum()
            child_stat = shift_log(log_stat + self._log_f[s], "signal history")
            conts = []
            for j in range(k):
                nxt = list(observed)
                nxt[j] += 1
                cont = self.continuation(position + 1, tuple(nxt), child_stat)
                conts.append(cont)
                pmf = _shift(cont[:, j, :])
                successors[s, j] = pmf
                occ = observed[j] + np.arange(n + 1)
                occ = np.minimum(occ, n)
                per_state = (pmf * self._u[j, :, :][:, occ]).sum(axis=1)
                values[s, j] = float(belief @ per_state)
            a = first_argmax(values[s])
            actions.append(a)
            cont = conts[a].copy()
            cont[:, a, :] = _shift(cont[:, a, :])
            chosen_cont[s] = cont
        support = weights > 0
        continuation = np.zeros((l, k, n + 1))
        continuation[:, :, 0] = 1.0
        for state in np.flatnonzero(support):
            mix = np.zeros((k, n + 1))
            for s in range(ns):
                if self._f[s, state] > 0:
                    mix += self._f[s, state] * chosen_cont[s, state]
            continuation[state] = mix
        node = ContextNode(position, observed, log_stat.copy(), tuple(actions), values, successors, continuation)
        self._nodes[key] = node
        if len(self._nodes) * ns > self.budget:
            raise BudgetExceededError("memo entries", len(self._nodes) * ns, self.budget)
        return node


def solve_game(spec: GameSpec, budget: int | None = None) -> StrategyTable:
    """Best responses for every position, grouping, and signal history."""
    table = StrategyTable(spec, budget)
    table.root()
    return table


def _table_for(spec: GameSpec, strategy: StrategyTable | None) -> StrategyTable:
    if strategy is None:
        return solve_game(spec)
    if strategy.spec != spec:
        raise DomainError("strategy table was solved for a different game")
    return strategy


def signal_partition(
    position: int,
    observed: Sequence[int],
    history: SignalHistory,
    spec: GameSpec,
    strategy: StrategyTable | None = None,
) -> dict[int, int]:
    """Map each possible own signal to the table it leads this customer to."""
    node = _table_for(spec, strategy).node(position, observed, history)
    return {s: a for s, a in enumerate(node.actions) if a >= 0}


def successor_distribution(
    context: DecisionContext,
    action: int,
    state: int,
    spec: GameSpec,
    table: int,
    strategy: StrategyTable | None = None,
) -> np.ndarray:
    """Distribution of how many customers from this one on choose ``table``.

    Entry ``x`` is the probability of exactly ``x`` such customers (counting
    this one) given that this customer takes ``action`` and the state is
    ``state``. The support is ``0..N - position``.
    """
    strat = _table_for(spec, strategy)
    n = spec.num_customers
    if not 0 <= action < spec.num_tables or not 0 <= table < spec.num_tables:
        raise DomainError("table index out of range")
    nxt = list(context.observed)
    nxt[action] += 1
    log_stat = np.asarray(context.history.extend(context.own_signal, spec).log_stat)
    cont = strat.continuation(context.position + 1, tuple(nxt), log_stat)[state, table]
    pmf = _shift(cont) if action == table else cont.copy()
    return pmf[: n - context.position + 1]


def expected_utility(
    context: DecisionContext,
    action: int,
    spec: GameSpec,
    strategy: StrategyTable | None = None,
) -> float:
    strat = _table_for(spec, strategy)
    belief = belief_from_history(prior_belief(spec), context.history, context.own_signal, spec).as_array()
    grid = spec.utility_grid
    total = 0.0
    for state in range(spec.num_states):
        if belief[state] == 0:
            continue
        pmf = successor_distribution(context, action, state, spec, action, strat)
        for x in range(1, len(pmf)):
            if pmf[x] > 0:
                total += belief[state] * pmf[x] * grid[action, state, context.observed[action] + x]
    return total


def best_response(
    context: DecisionContext, spec: GameSpec, strategy: StrategyTable | None = None
) -> int:
    return _table_for(spec, strategy).action(context)


def simulate_realization(
    spec: GameSpec,
    state: int,
    signals: Sequence[int],
    strategy: StrategyTable | None = None,
    flipped: frozenset[int] | set[int] = frozenset(),
) -> TrialRecord:
    """Play one draw of signals under the solved strategy.

    Customers at positions in ``flipped`` take the other table instead of
    their best response; this is only defined for two tables. Everyone
    else still plays the solved strategy.
    """
    strat = _table_for(spec, strategy)
    if len(signals) != spec.num_customers:
        raise DomainError(f"need {spec.num_customers} signals, got {len(signals)}")
    if flipped and spec.num_tables != 2:
        raise UnsupportedConfigurationError("the opposite table is defined only for two tables")
    history = SignalHistory.empty(spec)
    observed = [0] * spec.num_tables
    actions = []
    for position, s in enumerate(signals):
        node = strat.node(position, observed, history)
        if not 0 <= s < spec.num_signals or node.actions[s] < 0:
            raise UnreachableContextError(
                f"signal {s} at position {position} contradicts history {history.signals}"
            )
        a = node.actions[s]
        if position in flipped:
            a = 1 - a
        actions.append(a)
        observed[a] += 1
        try:
            history = history.extend(s, spec)
        except ImpossibleObservationError as exc:
            raise UnreachableContextError(str(exc)) from exc
    final = grouping_of(actions, spec.num_tables)
    sizes = spec.sizes[:, state]
    utilities = tuple(spec.utility(sizes[a], final[a]) for a in actions)
    return TrialRecord(int(state), tuple(int(s) for s in signals), tuple(actions), final, utilities)
