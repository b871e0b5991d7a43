"""YAML configuration files for games and experiments.

Example::

    game:
      customers: 3
      sizes: [[100, 40], [40, 100]]   # sizes[table][state]
      prior: [0.5, 0.5]               # optional, uniform by default
      signal: {binary_p: 0.9}         # or {matrix: [[...], ...]} as matrix[signal][state]
      utility: ratio                  # or {table: {sizes: [...], values: [[...], ...]}}
    experiment:
      trials: 100000
      seed: 7
      p: [0.5, 0.7, 0.9]
      r: [0.1, 0.4]
      deviation: {customer: 2, p_mis: [0, 0.5, 1]}

``game: {mirrored: {customers: 3, p: 0.9, r: 0.4}}`` is shorthand for the
two-table game whose large table swaps with the state. Customers in files
are numbered from 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import yaml

from crgame.core import GameSpec, UtilityRule, binary_signal_model, mirrored_spec
from crgame.errors import CRGError, InvalidGameError


class ConfigError(CRGError, ValueError):
    """A configuration document is malformed; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: str = "", line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        field_name = f"{path}: " if path else ""
        super().__init__(f"{where}{field_name}{message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class ExperimentSettings:
    trials: int = 0
    seed: int = 0
    p_grid: tuple[float, ...] = ()
    r_grid: tuple[float, ...] = ()
    deviation_customer: int | None = None
    p_mis: tuple[float, ...] = ()
    method: str | None = None


@dataclass(frozen=True)
class Config:
    game: GameSpec
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    binary_p: float | None = None


def _line_index(node: yaml.Node, prefix: str = "", out: dict[str, int] | None = None) -> dict[str, int]:
    out = {} if out is None else out
    out.setdefault(prefix, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = f"{prefix}.{key.value}" if prefix else str(key.value)
            out[path] = key.start_mark.line + 1
            _line_index(value, path, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_index(item, f"{prefix}[{i}]", out)
    return out


class _Reader:
    def __init__(self, lines: dict[str, int]):
        self.lines = lines

    def error(self, path: str, message: str) -> ConfigError:
        probe = path
        while probe and probe not in self.lines:
            probe = probe.rpartition(".")[0]
        return ConfigError(message, path, self.lines.get(probe))

    def mapping(self, value: Any, path: str, allowed: set[str]) -> dict:
        if not isinstance(value, dict):
            raise self.error(path, "expected a mapping")
        extra = sorted(set(map(str, value)) - allowed)
        if extra:
            raise self.error(f"{path}.{extra[0]}", f"unknown field (allowed: {', '.join(sorted(allowed))})")
        return value

    def require(self, section: dict, key: str, path: str) -> Any:
        if key not in section:
            raise self.error(path, f"missing required field '{key}'")
        return section[key]

    def integer(self, value: Any, path: str, minimum: int = 0) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(path, f"expected an integer, got {value!r}")
        if value < minimum:
            raise self.error(path, f"must be at least {minimum}")
        return value

    def number(self, value: Any, path: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        return float(value)

    def numbers(self, value: Any, path: str) -> tuple[float, ...]:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return (float(value),)
        if not isinstance(value, list) or not value:
            raise self.error(path, "expected a nonempty list of numbers")
        return tuple(self.number(v, f"{path}[{i}]") for i, v in enumerate(value))

    def matrix(self, value: Any, path: str) -> tuple[tuple[float, ...], ...]:
        if not isinstance(value, list) or not value:
            raise self.error(path, "expected a nonempty list of rows")
        rows = []
        for i, row in enumerate(value):
            if not isinstance(row, list):
                raise self.error(f"{path}[{i}]", "expected a list of numbers")
            rows.append(self.numbers(row, f"{path}[{i}]"))
        return tuple(rows)


_GAME_FIELDS = {"customers", "tables", "states", "sizes", "prior", "signal", "utility", "mirrored"}


def _parse_game(reader: _Reader, raw: Any) -> tuple[GameSpec, float | None]:
    game = reader.mapping(raw, "game", _GAME_FIELDS)
    if "mirrored" in game:
        mirrored = reader.mapping(game["mirrored"], "game.mirrored", {"customers", "p", "r"})
        n = reader.integer(reader.require(mirrored, "customers", "game.mirrored"), "game.mirrored.customers", 1)
        p = reader.number(reader.require(mirrored, "p", "game.mirrored"), "game.mirrored.p")
        r = reader.number(reader.require(mirrored, "r", "game.mirrored"), "game.mirrored.r")
        if not 0 <= p <= 1:
            raise reader.error("game.mirrored.p", "signal quality must lie in [0, 1]")
        if not 0 <= r <= 1:
            raise reader.error("game.mirrored.r", "size ratio must lie in [0, 1]")
        if len(game) > 1:
            raise reader.error("game.mirrored", "mirrored shorthand excludes other game fields")
        return mirrored_spec(n, p, r), p

    n = reader.integer(reader.require(game, "customers", "game"), "game.customers", 1)
    sizes = reader.matrix(reader.require(game, "sizes", "game"), "game.sizes")
    num_states = len(sizes[0])
    if any(len(row) != num_states for row in sizes):
        raise reader.error("game.sizes", "every table needs one size per state")
    if "tables" in game and reader.integer(game["tables"], "game.tables", 1) != len(sizes):
        raise reader.error("game.tables", f"does not match the {len(sizes)} rows of sizes")
    if "states" in game and reader.integer(game["states"], "game.states", 1) != num_states:
        raise reader.error("game.states", f"does not match the {num_states} columns of sizes")
    if "prior" in game:
        prior = reader.numbers(game["prior"], "game.prior")
        if len(prior) != num_states:
            raise reader.error("game.prior", f"needs {num_states} entries")
    else:
        prior = (1.0 / num_states,) * num_states

    binary_p = None
    signal = reader.mapping(reader.require(game, "signal", "game"), "game.signal", {"binary_p", "matrix"})
    if len(signal) != 1:
        raise reader.error("game.signal", "give exactly one of binary_p or matrix")
    if "binary_p" in signal:
        binary_p = reader.number(signal["binary_p"], "game.signal.binary_p")
        if num_states != 2:
            raise reader.error("game.signal.binary_p", "binary shorthand needs exactly two states")
        if not 0 <= binary_p <= 1:
            raise reader.error("game.signal.binary_p", "must lie in [0, 1]")
        model = binary_signal_model(binary_p)
    else:
        model = reader.matrix(signal["matrix"], "game.signal.matrix")

    rule = UtilityRule()
    raw_rule = game.get("utility", "ratio")
    if raw_rule != "ratio":
        wrapper = reader.mapping(raw_rule, "game.utility", {"table"})
        table = reader.mapping(reader.require(wrapper, "table", "game.utility"), "game.utility.table", {"sizes", "values"})
        try:
            rule = UtilityRule(
                "table",
                reader.numbers(reader.require(table, "sizes", "game.utility.table"), "game.utility.table.sizes"),
                reader.matrix(reader.require(table, "values", "game.utility.table"), "game.utility.table.values"),
            )
        except InvalidGameError as exc:
            raise reader.error("game.utility", str(exc)) from exc

    try:
        spec = GameSpec(n, sizes, prior, model, rule)
    except (InvalidGameError, ValueError) as exc:
        raise reader.error(_blame(str(exc)), str(exc)) from exc
    return spec, binary_p


def _blame(message: str) -> str:
    for keyword, path in (
        ("prior", "game.prior"),
        ("signal", "game.signal"),
        ("utility", "game.utility"),
        ("customers", "game.customers"),
    ):
        if keyword in message:
            return path
    return "game.sizes"


_EXPERIMENT_FIELDS = {"trials", "seed", "p", "r", "deviation", "method"}


def _parse_experiment(reader: _Reader, raw: Any, n: int) -> ExperimentSettings:
    exp = reader.mapping(raw, "experiment", _EXPERIMENT_FIELDS)
    trials = reader.integer(exp.get("trials", 0), "experiment.trials", 0)
    seed = reader.integer(exp.get("seed", 0), "experiment.seed", 0)
    if seed >= 2**64:
        raise reader.error("experiment.seed", "must fit in 64 bits")
    p_grid = reader.numbers(exp["p"], "experiment.p") if "p" in exp else ()
    if any(not 0.5 <= p <= 1 for p in p_grid):
        raise reader.error("experiment.p", "signal qualities must lie in [0.5, 1]")
    r_grid = reader.numbers(exp["r"], "experiment.r") if "r" in exp else ()
    if any(not 0 <= r <= 1 for r in r_grid):
        raise reader.error("experiment.r", "size ratios must lie in [0, 1]")
    method = exp.get("method")
    if method not in (None, "exact", "monte-carlo"):
        raise reader.error("experiment.method", "must be 'exact' or 'monte-carlo'")
    customer, p_mis = None, ()
    if "deviation" in exp:
        dev = reader.mapping(exp["deviation"], "experiment.deviation", {"customer", "p_mis"})
        customer = reader.integer(reader.require(dev, "customer", "experiment.deviation"), "experiment.deviation.customer", 1)
        if customer > n:
            raise reader.error("experiment.deviation.customer", f"game has only {n} customers")
        p_mis = reader.numbers(reader.require(dev, "p_mis", "experiment.deviation"), "experiment.deviation.p_mis")
        if any(not 0 <= q <= 1 for q in p_mis):
            raise reader.error("experiment.deviation.p_mis", "miss probabilities must lie in [0, 1]")
        customer -= 1
    return ExperimentSettings(trials, seed, p_grid, r_grid, customer, p_mis, method)


def parse_config(text: str) -> Config:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ConfigError(f"invalid YAML: {exc.problem}", "", line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if node is None:
        raise ConfigError("empty configuration", "game")
    reader = _Reader(_line_index(node))
    top = reader.mapping(data, "", {"game", "experiment"})
    spec, binary_p = _parse_game(reader, reader.require(top, "game", "game"))
    experiment = ExperimentSettings()
    if "experiment" in top:
        experiment = _parse_experiment(reader, top["experiment"], spec.num_customers)
    return Config(spec, experiment, binary_p)


def load_config(path: str) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def game_to_dict(spec: GameSpec) -> dict:
    out: dict[str, Any] = {
        "customers": spec.num_customers,
        "sizes": [list(row) for row in spec.table_sizes],
        "prior": list(spec.prior),
        "signal": {"matrix": [list(row) for row in spec.signal_model]},
    }
    if spec.utility.kind == "ratio":
        out["utility"] = "ratio"
    else:
        out["utility"] = {"table": {"sizes": list(spec.utility.sizes), "values": [list(r) for r in spec.utility.values]}}
    return out


def dump_config(config: Config) -> str:
    doc: dict[str, Any] = {"game": game_to_dict(config.game)}
    exp = config.experiment
    if exp != ExperimentSettings():
        section: dict[str, Any] = {"trials": exp.trials, "seed": exp.seed}
        if exp.p_grid:
            section["p"] = list(exp.p_grid)
        if exp.r_grid:
            section["r"] = list(exp.r_grid)
        if exp.method:
            section["method"] = exp.method
        if exp.deviation_customer is not None:
            section["deviation"] = {"customer": exp.deviation_customer + 1, "p_mis": list(exp.p_mis)}
        doc["experiment"] = section
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
