"""Game definition, utility rules, and Bayesian belief arithmetic.

Tables, states, and signals are indexed from 0 throughout the library.
The command line translates to the 1-based labels used in printed tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from crgame.errors import DomainError, ImpossibleObservationError, InvalidGameError

PROB_TOL = 1e-12
UTILITY_TOL = 1e-9


def _as_vector(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def _as_matrix(rows: Iterable[Iterable[float]]) -> tuple[tuple[float, ...], ...]:
    return tuple(_as_vector(row) for row in rows)


def _check_distribution(probs: Sequence[float], what: str) -> None:
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidGameError(f"{what} must be a nonempty vector")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise InvalidGameError(f"{what} has a negative or non-finite entry")
    if abs(arr.sum() - 1.0) > PROB_TOL:
        raise InvalidGameError(f"{what} sums to {arr.sum()!r}, not 1")


@dataclass(frozen=True)
class UtilityRule:
    """Utility of a customer as a function of table size and final occupancy.

    ``kind="ratio"`` is ``size / occupancy``. ``kind="table"`` looks the
    value up in ``values[k][n - 1]`` for ``size == sizes[k]``.
    """

    kind: str = "ratio"
    sizes: tuple[float, ...] = ()
    values: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "ratio":
            if self.sizes or self.values:
                raise InvalidGameError("ratio utility takes no parameters")
            return
        if self.kind != "table":
            raise InvalidGameError(f"unknown utility kind {self.kind!r}")
        object.__setattr__(self, "sizes", _as_vector(self.sizes))
        object.__setattr__(self, "values", _as_matrix(self.values))
        if len(self.sizes) == 0 or len(self.sizes) != len(self.values):
            raise InvalidGameError("utility table needs one row per size")
        widths = {len(row) for row in self.values}
        if len(widths) != 1 or 0 in widths:
            raise InvalidGameError("utility table rows must share a nonzero length")
        order = np.argsort(self.sizes)
        sizes = np.asarray(self.sizes)[order]
        table = np.asarray(self.values)[order]
        if np.any(np.diff(sizes) <= 0):
            raise InvalidGameError("utility table sizes must be distinct")
        if np.any(np.diff(table, axis=0) <= 0):
            raise InvalidGameError("utility must increase strictly with size")
        if np.any(np.diff(table, axis=1) > 0):
            raise InvalidGameError("utility must not increase with occupancy")

    @property
    def max_occupancy(self) -> int | None:
        return len(self.values[0]) if self.kind == "table" else None

    def __call__(self, size: float, occupancy: int) -> float:
        return utility(self, size, occupancy)

    def grid(self, sizes: np.ndarray, max_occupancy: int) -> np.ndarray:
        """Return ``U[..., c]`` for every size in ``sizes`` and ``c`` in ``0..max_occupancy``.

        Column 0 is NaN: nobody collects utility from an empty table.
        """
        sizes = np.asarray(sizes, dtype=float)
        out = np.full(sizes.shape + (max_occupancy + 1,), np.nan)
        occ = np.arange(1, max_occupancy + 1)
        if self.kind == "ratio":
            out[..., 1:] = sizes[..., None] / occ
            return out
        for idx in np.ndindex(sizes.shape):
            out[idx][1:] = [utility(self, sizes[idx], int(c)) for c in occ]
        return out


RATIO = UtilityRule()


def utility(rule: UtilityRule, size: float, occupancy: int) -> float:
    """Utility of one occupant of a table of ``size`` shared by ``occupancy`` customers."""
    if occupancy < 1:
        raise DomainError("utility is undefined for an empty table")
    if size < 0:
        raise DomainError(f"table size must be nonnegative, got {size}")
    if rule.kind == "ratio":
        return float(size) / occupancy
    matches = [k for k, s in enumerate(rule.sizes) if abs(s - size) <= UTILITY_TOL]
    if not matches:
        raise DomainError(f"size {size} is not covered by the utility table")
    row = rule.values[matches[0]]
    if occupancy > len(row):
        raise DomainError(f"occupancy {occupancy} is not covered by the utility table")
    return float(row[occupancy - 1])


@dataclass(frozen=True)
class GameSpec:
    """Full definition of a table-selection game.

    ``table_sizes[j][l]`` is the size of table ``j`` in state ``l`` and
    ``signal_model[s][l]`` is the probability of signal ``s`` in state ``l``.
    """

    num_customers: int
    table_sizes: tuple[tuple[float, ...], ...]
    prior: tuple[float, ...]
    signal_model: tuple[tuple[float, ...], ...]
    utility: UtilityRule = field(default=RATIO)

    def __post_init__(self) -> None:
        object.__setattr__(self, "table_sizes", _as_matrix(self.table_sizes))
        object.__setattr__(self, "prior", _as_vector(self.prior))
        object.__setattr__(self, "signal_model", _as_matrix(self.signal_model))
        if isinstance(self.num_customers, bool) or int(self.num_customers) != self.num_customers:
            raise InvalidGameError("num_customers must be an integer")
        object.__setattr__(self, "num_customers", int(self.num_customers))
        if self.num_customers < 1:
            raise InvalidGameError("num_customers must be positive")
        _check_distribution(self.prior, "prior")
        num_states = len(self.prior)
        if not self.table_sizes:
            raise InvalidGameError("the game needs at least one table")
        for j, row in enumerate(self.table_sizes):
            if len(row) != num_states:
                raise InvalidGameError(f"table {j} has {len(row)} sizes for {num_states} states")
            if any(r < 0 or not np.isfinite(r) for r in row):
                raise InvalidGameError(f"table {j} has a negative size")
        if not self.signal_model:
            raise InvalidGameError("the signal alphabet is empty")
        for s, row in enumerate(self.signal_model):
            if len(row) != num_states:
                raise InvalidGameError(f"signal {s} has {len(row)} likelihoods for {num_states} states")
        f = np.asarray(self.signal_model)
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise InvalidGameError("signal model has a negative entry")
        for l in range(num_states):
            if abs(f[:, l].sum() - 1.0) > PROB_TOL:
                raise InvalidGameError(f"signal model column for state {l} does not sum to 1")
        limit = self.utility.max_occupancy
        if limit is not None:
            if limit < self.num_customers:
                raise InvalidGameError("utility table does not cover every occupancy")
            for size in np.unique(self.sizes):
                utility(self.utility, float(size), 1)

    @property
    def num_tables(self) -> int:
        return len(self.table_sizes)

    @property
    def num_states(self) -> int:
        return len(self.prior)

    @property
    def num_signals(self) -> int:
        return len(self.signal_model)

    @cached_property
    def sizes(self) -> np.ndarray:
        """Table sizes as a ``(K, L)`` array."""
        return np.asarray(self.table_sizes, dtype=float)

    @cached_property
    def prior_array(self) -> np.ndarray:
        return np.asarray(self.prior, dtype=float)

    @cached_property
    def likelihood(self) -> np.ndarray:
        """Signal model as an ``(S, L)`` array."""
        return np.asarray(self.signal_model, dtype=float)

    @cached_property
    def log_likelihood(self) -> np.ndarray:
        return safe_log(self.likelihood)

    @cached_property
    def utility_grid(self) -> np.ndarray:
        """``U[j, l, c]`` for table ``j`` in state ``l`` with final occupancy ``c``."""
        return self.utility.grid(self.sizes, self.num_customers)

    def replace(self, **changes) -> GameSpec:
        fields = dict(
            num_customers=self.num_customers,
            table_sizes=self.table_sizes,
            prior=self.prior,
            signal_model=self.signal_model,
            utility=self.utility,
        )
        fields.update(changes)
        return GameSpec(**fields)


def binary_signal_model(p: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Two-state, two-signal model where the signal matches the state with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidGameError(f"signal quality must lie in [0, 1], got {p}")
    return ((p, 1.0 - p), (1.0 - p, p))


def mirrored_spec(num_customers: int, p: float, r: float, large: float = 100.0) -> GameSpec:
    """Two tables of size ``large`` and ``r * large`` whose roles swap with the state.

    In state 0 table 0 is the large one, in state 1 table 1 is. The prior is
    uniform and signals follow :func:`binary_signal_model`.
    """
    if not 0.0 <= r <= 1.0:
        raise InvalidGameError(f"size ratio must lie in [0, 1], got {r}")
    small = r * large
    return GameSpec(
        num_customers=num_customers,
        table_sizes=((large, small), (small, large)),
        prior=(0.5, 0.5),
        signal_model=binary_signal_model(p),
    )


@dataclass(frozen=True)
class Belief:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _as_vector(self.probs))
        arr = np.asarray(self.probs)
        if arr.size == 0 or np.any(arr < 0) or abs(arr.sum() - 1.0) > PROB_TOL:
            raise DomainError(f"not a probability vector: {self.probs}")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> Belief:
        return cls(tuple(arr.tolist()))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def __len__(self) -> int:
        return len(self.probs)


def _normalize(weights: np.ndarray, what: str) -> np.ndarray:
    total = weights.sum()
    if not total > 0:
        raise ImpossibleObservationError(f"{what} has zero probability under every state")
    out = weights / total
    # clamp the rounding residue so the vector passes the 1e-12 check exactly
    out[np.argmax(out)] += 1.0 - out.sum()
    return out


def safe_log(values: np.ndarray) -> np.ndarray:
    """Elementwise log with ``log(0) = -inf`` and no warning."""
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(values, dtype=float))


def shift_log(log_weights: np.ndarray, what: str) -> np.ndarray:
    """Shift log weights so their maximum is 0."""
    top = np.max(log_weights)
    if top == -np.inf:
        raise ImpossibleObservationError(f"{what} has zero probability under every state")
    return log_weights - top


def normalize_log(log_weights: np.ndarray, what: str) -> np.ndarray:
    """Probability vector proportional to ``exp(log_weights)``."""
    return _normalize(np.exp(shift_log(log_weights, what)), what)


def _signal_column(spec: GameSpec, signal: int) -> np.ndarray:
    if not 0 <= signal < spec.num_signals:
        raise DomainError(f"signal {signal} is not in the alphabet 0..{spec.num_signals - 1}")
    return spec.likelihood[signal]


@dataclass(frozen=True)
class SignalHistory:
    """Revealed signals with their per-state likelihood up to normalization.

    ``log_stat`` holds ``sum(log f(s | l))`` over the signals, shifted so its
    largest entry is 0; ``sufficient_stat`` is the same vector in linear
    scale, normalized to sum to 1. Working in logs keeps states with tiny
    but nonzero likelihood from flushing to zero in long histories.
    """

    signals: tuple[int, ...]
    log_stat: tuple[float, ...]

    @classmethod
    def empty(cls, spec: GameSpec) -> SignalHistory:
        return cls((), (0.0,) * spec.num_states)

    @classmethod
    def from_signals(cls, signals: Iterable[int], spec: GameSpec) -> SignalHistory:
        history = cls.empty(spec)
        for s in signals:
            history = history.extend(s, spec)
        return history

    @property
    def sufficient_stat(self) -> tuple[float, ...]:
        return tuple(normalize_log(np.asarray(self.log_stat), "signal history").tolist())

    def extend(self, signal: int, spec: GameSpec) -> SignalHistory:
        _signal_column(spec, signal)
        log_stat = shift_log(
            np.asarray(self.log_stat) + spec.log_likelihood[signal],
            f"signal history {self.signals + (signal,)}",
        )
        return SignalHistory(self.signals + (int(signal),), tuple(log_stat.tolist()))

    def __len__(self) -> int:
        return len(self.signals)


def belief_update(prior: Belief, signal: int, spec: GameSpec) -> Belief:
    """Posterior after observing one more conditionally independent signal."""
    weights = prior.as_array() * _signal_column(spec, signal)
    return Belief.from_array(_normalize(weights, f"signal {signal}"))


def belief_from_history(
    g0: Belief,
    history: SignalHistory,
    own_signal: int | None,
    spec: GameSpec,
) -> Belief:
    """Posterior over states given the revealed history and, optionally, one's own signal."""
    if own_signal is None and not history.signals:
        return g0
    log_weights = safe_log(g0.as_array()) + np.asarray(history.log_stat)
    if own_signal is not None:
        log_weights = log_weights + safe_log(_signal_column(spec, own_signal))
    return Belief.from_array(normalize_log(log_weights, f"signals {history.signals} / {own_signal}"))


def prior_belief(spec: GameSpec) -> Belief:
    return Belief(spec.prior)
