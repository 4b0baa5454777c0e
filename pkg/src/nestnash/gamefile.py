"""Strict JSON formats for games and strategy profiles.

One file format, three modes: ``finite`` (explicit states, partitions,
payoff table), ``types`` (product type space with a joint distribution,
expanded to states), and ``continuous`` (finite states, box actions,
polynomial payoffs).  Parsing is strict: unknown fields, missing
fields, wrong shapes, and wrong primitive types are all rejected with
a message naming the offending location.  Nothing is inferred
silently; a file that parses differently tomorrow is a bug today.
"""

from __future__ import annotations

import json
from typing import Any

from .discretize import CompactGameSpec, Poly
from .game import (
    GameFormatError,
    InformationPartition,
    NestedGame,
    PayoffTensor,
    StateSpace,
    StrategyProfile,
    from_type_space,
)

FORMAT_VERSION = 1
MODES = ("finite", "types", "continuous")


class SchemaError(GameFormatError):
    """A game or profile file violates the declared format."""


class LoadedGame:
    """Parse result: exactly one of ``game`` and ``compact`` is set."""

    def __init__(
        self,
        mode: str,
        game: NestedGame | None = None,
        compact: CompactGameSpec | None = None,
    ):
        self.mode = mode
        self.game = game
        self.compact = compact


def _expect_object(value: Any, where: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"{where} must be an object")
    return value


def _expect_list(value: Any, where: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"{where} must be an array")
    return value


def _expect_string(value: Any, where: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where} must be a string")
    return value


def _expect_number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where} must be a number")
    return float(value)


def _expect_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{where} must be an integer")
    return value


def _check_fields(obj: dict, where: str, required: set[str], optional: set[str]):
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"{where}: unknown field {key!r}")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{where}: missing field {key!r}")


def _parse_header(obj: dict, where: str) -> str:
    version = obj.get("version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"{where}: version must be {FORMAT_VERSION}")
    mode = _expect_string(obj.get("mode"), f"{where}.mode")
    if mode not in MODES:
        raise SchemaError(f"{where}.mode must be one of {', '.join(MODES)}")
    return mode


def _parse_states(entries: Any) -> tuple[tuple[str, ...], dict[str, float]]:
    rows = _expect_list(entries, "states")
    if not rows:
        raise SchemaError("states must be nonempty")
    ids: list[str] = []
    prior: dict[str, float] = {}
    for k, row in enumerate(rows):
        where = f"states[{k}]"
        row = _expect_object(row, where)
        _check_fields(row, where, {"id", "prob"}, set())
        sid = _expect_string(row["id"], f"{where}.id")
        if sid in prior:
            raise SchemaError(f"{where}: duplicate state id {sid!r}")
        ids.append(sid)
        prior[sid] = _expect_number(row["prob"], f"{where}.prob")
    return tuple(ids), prior


def _parse_player_keyed(obj: Any, n: int, where: str) -> list[Any]:
    table = _expect_object(obj, where)
    expected = {str(i) for i in range(1, n + 1)}
    if set(table.keys()) != expected:
        raise SchemaError(
            f"{where} must have exactly the keys "
            + ", ".join(repr(str(i)) for i in range(1, n + 1))
        )
    return [table[str(i)] for i in range(1, n + 1)]


def _parse_partitions(
    obj: Any, n: int, states: tuple[str, ...]
) -> tuple[InformationPartition, ...]:
    rows = _parse_player_keyed(obj, n, "partitions")
    out = []
    state_set = set(states)
    for i, row in enumerate(rows, start=1):
        where = f"partitions.{i}"
        row = _expect_object(row, where)
        if set(row.keys()) != state_set:
            raise SchemaError(f"{where} must map every state id exactly once")
        atom_of = {}
        for s in states:
            atom_of[s] = _expect_string(row[s], f"{where}.{s}")
        out.append(InformationPartition(player=i, atom_of=atom_of))
    return tuple(out)


def _parse_actions(obj: Any, n: int) -> tuple[tuple[str, ...], ...]:
    rows = _parse_player_keyed(obj, n, "actions")
    out = []
    for i, row in enumerate(rows, start=1):
        labels = _expect_list(row, f"actions.{i}")
        if not labels:
            raise SchemaError(f"actions.{i} must be nonempty")
        seen = []
        for k, label in enumerate(labels):
            label = _expect_string(label, f"actions.{i}[{k}]")
            if label in seen:
                raise SchemaError(f"actions.{i}: duplicate action {label!r}")
            seen.append(label)
        out.append(tuple(seen))
    return tuple(out)


def _count_players(obj: dict, where: str) -> int:
    table = _expect_object(obj.get("partitions"), f"{where}.partitions")
    n = len(table)
    if n < 2:
        raise SchemaError(f"{where}.partitions must list at least two players")
    return n


def _parse_finite(obj: dict) -> LoadedGame:
    _check_fields(
        obj,
        "game",
        {"version", "mode", "states", "partitions", "actions", "payoffs"},
        {"player_priors"},
    )
    states, prior = _parse_states(obj["states"])
    n = _count_players(obj, "game")
    partitions = _parse_partitions(obj["partitions"], n, states)
    actions = _parse_actions(obj["actions"], n)

    player_priors = None
    if "player_priors" in obj:
        rows = _parse_player_keyed(obj["player_priors"], n, "player_priors")
        player_priors = {}
        for i, row in enumerate(rows, start=1):
            where = f"player_priors.{i}"
            row = _expect_object(row, where)
            if set(row.keys()) != set(states):
                raise SchemaError(f"{where} must map every state id exactly once")
            player_priors[i] = {
                s: _expect_number(row[s], f"{where}.{s}") for s in states
            }

    entries = _expect_list(obj["payoffs"], "payoffs")
    values: dict = {}
    for k, entry in enumerate(entries):
        where = f"payoffs[{k}]"
        entry = _expect_object(entry, where)
        _check_fields(entry, where, {"state", "profile", "values"}, set())
        s = _expect_string(entry["state"], f"{where}.state")
        if s not in prior:
            raise SchemaError(f"{where}: unknown state {s!r}")
        prof_row = _expect_list(entry["profile"], f"{where}.profile")
        if len(prof_row) != n:
            raise SchemaError(f"{where}.profile must list {n} actions")
        prof = []
        for i, label in enumerate(prof_row, start=1):
            label = _expect_string(label, f"{where}.profile[{i - 1}]")
            if label not in actions[i - 1]:
                raise SchemaError(
                    f"{where}: action {label!r} not in player {i}'s action set"
                )
            prof.append(label)
        vals_row = _expect_list(entry["values"], f"{where}.values")
        if len(vals_row) != n:
            raise SchemaError(f"{where}.values must list {n} numbers")
        vals = tuple(
            _expect_number(v, f"{where}.values[{j}]") for j, v in enumerate(vals_row)
        )
        key = (s, tuple(prof))
        if key in values:
            raise SchemaError(f"{where}: duplicate payoff entry for {key!r}")
        values[key] = vals

    game = NestedGame(
        space=StateSpace(states=states, prior=prior, player_priors=player_priors),
        partitions=partitions,
        payoffs=PayoffTensor(actions=actions, values=values),
    )
    return LoadedGame(mode="finite", game=game)


def _parse_types(obj: dict) -> LoadedGame:
    _check_fields(
        obj,
        "game",
        {"version", "mode", "types", "joint", "payoffs"},
        {"actions"},
    )
    type_rows = _expect_list(obj["types"], "types")
    if len(type_rows) < 2:
        raise SchemaError("types must list at least two players")
    n = len(type_rows)
    type_sets = []
    for i, row in enumerate(type_rows, start=1):
        labels = _expect_list(row, f"types[{i - 1}]")
        if not labels:
            raise SchemaError(f"types[{i - 1}] must be nonempty")
        parsed = []
        for k, label in enumerate(labels):
            label = _expect_string(label, f"types[{i - 1}][{k}]")
            if label in parsed:
                raise SchemaError(f"types[{i - 1}]: duplicate type {label!r}")
            parsed.append(label)
        type_sets.append(tuple(parsed))

    def parse_type_profile(row: Any, where: str) -> tuple[str, ...]:
        row = _expect_list(row, where)
        if len(row) != n:
            raise SchemaError(f"{where} must list {n} types")
        out = []
        for i, label in enumerate(row):
            label = _expect_string(label, f"{where}[{i}]")
            if label not in type_sets[i]:
                raise SchemaError(
                    f"{where}: type {label!r} not in player {i + 1}'s type set"
                )
            out.append(label)
        return tuple(out)

    joint = {}
    for k, entry in enumerate(_expect_list(obj["joint"], "joint")):
        where = f"joint[{k}]"
        entry = _expect_object(entry, where)
        _check_fields(entry, where, {"types", "prob"}, set())
        tp = parse_type_profile(entry["types"], f"{where}.types")
        if tp in joint:
            raise SchemaError(f"{where}: duplicate joint entry for {tp!r}")
        joint[tp] = _expect_number(entry["prob"], f"{where}.prob")

    actions = None
    if "actions" in obj:
        action_rows = _expect_list(obj["actions"], "actions")
        if len(action_rows) != n:
            raise SchemaError(f"actions must list {n} players")
        actions = []
        for i, row in enumerate(action_rows, start=1):
            labels = _expect_list(row, f"actions[{i - 1}]")
            if not labels:
                raise SchemaError(f"actions[{i - 1}] must be nonempty")
            parsed = []
            for k, label in enumerate(labels):
                label = _expect_string(label, f"actions[{i - 1}][{k}]")
                if label in parsed:
                    raise SchemaError(
                        f"actions[{i - 1}]: duplicate action {label!r}"
                    )
                parsed.append(label)
            actions.append(tuple(parsed))

    payoffs = {}
    for k, entry in enumerate(_expect_list(obj["payoffs"], "payoffs")):
        where = f"payoffs[{k}]"
        entry = _expect_object(entry, where)
        _check_fields(entry, where, {"types", "profile", "values"}, set())
        tp = parse_type_profile(entry["types"], f"{where}.types")
        prof_row = _expect_list(entry["profile"], f"{where}.profile")
        if len(prof_row) != n:
            raise SchemaError(f"{where}.profile must list {n} actions")
        prof = tuple(
            _expect_string(a, f"{where}.profile[{i}]")
            for i, a in enumerate(prof_row)
        )
        vals_row = _expect_list(entry["values"], f"{where}.values")
        if len(vals_row) != n:
            raise SchemaError(f"{where}.values must list {n} numbers")
        vals = tuple(
            _expect_number(v, f"{where}.values[{j}]") for j, v in enumerate(vals_row)
        )
        key = (tp, prof)
        if key in payoffs:
            raise SchemaError(f"{where}: duplicate payoff entry for {key!r}")
        payoffs[key] = vals

    game = from_type_space(type_sets, joint, payoffs, actions=actions)
    return LoadedGame(mode="types", game=game)


def _parse_continuous(obj: dict) -> LoadedGame:
    _check_fields(
        obj,
        "game",
        {"version", "mode", "states", "partitions", "boxes", "lipschitz", "payoffs"},
        {"payoff_cap"},
    )
    states, prior = _parse_states(obj["states"])
    n = _count_players(obj, "game")
    partitions = _parse_partitions(obj["partitions"], n, states)
    box_rows = _parse_player_keyed(obj["boxes"], n, "boxes")
    box_dims = tuple(
        _expect_int(row, f"boxes.{i}") for i, row in enumerate(box_rows, start=1)
    )
    if any(d < 1 for d in box_dims):
        raise SchemaError("boxes: every dimension must be at least 1")
    lipschitz = _expect_number(obj["lipschitz"], "lipschitz")
    payoff_cap = None
    if "payoff_cap" in obj:
        payoff_cap = _expect_number(obj["payoff_cap"], "payoff_cap")
    total_dim = sum(box_dims)

    payoffs: dict[tuple[str, int], Poly] = {}
    for k, entry in enumerate(_expect_list(obj["payoffs"], "payoffs")):
        where = f"payoffs[{k}]"
        entry = _expect_object(entry, where)
        _check_fields(entry, where, {"state", "player", "monomials"}, set())
        s = _expect_string(entry["state"], f"{where}.state")
        if s not in prior:
            raise SchemaError(f"{where}: unknown state {s!r}")
        player = _expect_int(entry["player"], f"{where}.player")
        if not 1 <= player <= n:
            raise SchemaError(f"{where}.player must be between 1 and {n}")
        monomials = []
        for m, mono in enumerate(_expect_list(entry["monomials"], f"{where}.monomials")):
            mwhere = f"{where}.monomials[{m}]"
            mono = _expect_object(mono, mwhere)
            _check_fields(mono, mwhere, {"coef", "exponents"}, set())
            coef = _expect_number(mono["coef"], f"{mwhere}.coef")
            exps_row = _expect_list(mono["exponents"], f"{mwhere}.exponents")
            if len(exps_row) != total_dim:
                raise SchemaError(
                    f"{mwhere}.exponents must list {total_dim} integers"
                )
            exps = tuple(
                _expect_int(e, f"{mwhere}.exponents[{j}]")
                for j, e in enumerate(exps_row)
            )
            if any(e < 0 for e in exps):
                raise SchemaError(f"{mwhere}.exponents must be nonnegative")
            monomials.append((coef, exps))
        key = (s, player)
        if key in payoffs:
            raise SchemaError(f"{where}: duplicate polynomial for {key!r}")
        payoffs[key] = tuple(monomials)

    for s in states:
        for i in range(1, n + 1):
            if (s, i) not in payoffs:
                raise SchemaError(
                    f"payoffs: missing polynomial for state {s!r}, player {i}"
                )

    compact = CompactGameSpec(
        space=StateSpace(states=states, prior=prior),
        partitions=partitions,
        box_dims=box_dims,
        payoffs=payoffs,
        lipschitz=lipschitz,
        payoff_cap=payoff_cap,
    )
    return LoadedGame(mode="continuous", compact=compact)


def parse_game(obj: Any) -> LoadedGame:
    obj = _expect_object(obj, "game")
    mode = _parse_header(obj, "game")
    if mode == "finite":
        return _parse_finite(obj)
    if mode == "types":
        return _parse_types(obj)
    return _parse_continuous(obj)


def load_game(path: str) -> LoadedGame:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as err:
            raise SchemaError(f"not valid JSON: {err}") from err
    return parse_game(obj)


def parse_profile(obj: Any) -> StrategyProfile:
    obj = _expect_object(obj, "profile")
    _check_fields(obj, "profile", {"version", "field_level", "strategies"}, set())
    if obj.get("version") != FORMAT_VERSION:
        raise SchemaError(f"profile: version must be {FORMAT_VERSION}")
    level = _expect_string(obj["field_level"], "profile.field_level")
    if level not in ("original", "coarse"):
        raise SchemaError("profile.field_level must be 'original' or 'coarse'")
    table = _expect_object(obj["strategies"], "profile.strategies")
    strategies: dict = {}
    for player_key, atoms in table.items():
        try:
            player = int(player_key)
        except ValueError:
            raise SchemaError(
                f"profile.strategies: player key {player_key!r} is not an integer"
            ) from None
        if player < 1 or str(player) != player_key:
            raise SchemaError(
                f"profile.strategies: bad player key {player_key!r}"
            )
        atoms = _expect_object(atoms, f"profile.strategies.{player}")
        per_atom = {}
        for atom, dist in atoms.items():
            dist = _expect_object(
                dist, f"profile.strategies.{player}.{atom}"
            )
            per_atom[atom] = {
                a: _expect_number(p, f"profile.strategies.{player}.{atom}.{a}")
                for a, p in dist.items()
            }
        strategies[player] = per_atom
    return StrategyProfile(strategies=strategies, field_level=level)


def load_profile(path: str) -> StrategyProfile:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = json.load(handle)
        except json.JSONDecodeError as err:
            raise SchemaError(f"not valid JSON: {err}") from err
    return parse_profile(obj)


def profile_to_json(profile: StrategyProfile) -> dict:
    """Report-ready form with string keys and insertion order preserved."""
    strategies = {}
    for player in sorted(profile.strategies):
        per_atom = {}
        for atom, dist in profile.strategies[player].items():
            per_atom[_key_string(atom)] = {
                _key_string(a): float(p) for a, p in dist.items()
            }
        strategies[str(player)] = per_atom
    return {
        "version": FORMAT_VERSION,
        "field_level": profile.field_level,
        "strategies": strategies,
    }


def _key_string(value: Any) -> str:
    return value if isinstance(value, str) else repr(value)
