"""Finite Bayesian games with nested information.

A game couples an explicit finite state space with one information
partition per player and a dense payoff tensor over states and joint
action profiles.  Player 1 is the most informed: validity requires each
player's partition to refine the next player's.  Strategies are maps
from partition atoms to mixed actions, so they are measurable with
respect to the owning player's information by construction.

All container types are immutable after construction and every
operation is a pure function.  Validation never raises; it returns a
report listing violations so callers can surface all problems at once.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable

State = Hashable
Atom = Hashable
Action = Hashable

# Ingested probability masses must normalize this tightly.
MASS_TOL = 1e-12
# Slack for float quantities derived from valid inputs (expectations, regrets).
DERIVED_TOL = 1e-9


class GameFormatError(ValueError):
    """A structural problem that makes the requested computation impossible."""


class InvalidGameError(ValueError):
    """An operation that requires a valid game received an invalid one."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__(
            "invalid game: " + "; ".join(v.message for v in report.violations)
        )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class StateSpace:
    """Ordered finite state space with a common prior.

    ``player_priors`` optionally overrides the common prior per player,
    which models players holding inconsistent beliefs.  Every payoff and
    regret computed for player i then uses player i's own prior.
    """

    states: tuple[State, ...]
    prior: dict[State, float]
    player_priors: dict[int, dict[State, float]] | None = None

    def prior_for(self, player: int) -> Mapping[State, float]:
        if self.player_priors and player in self.player_priors:
            return self.player_priors[player]
        return self.prior

    def mass(self, states: Iterable[State], player: int) -> float:
        p = self.prior_for(player)
        return math.fsum(p[s] for s in states)


@dataclass(frozen=True)
class InformationPartition:
    """A player's information, given as the atom containing each state."""

    player: int
    atom_of: dict[State, Atom]

    @cached_property
    def atoms(self) -> dict[Atom, tuple[State, ...]]:
        """Atoms keyed by id, states in insertion order of ``atom_of``."""
        grouped: dict[Atom, list[State]] = {}
        for state, atom in self.atom_of.items():
            grouped.setdefault(atom, []).append(state)
        return {a: tuple(ss) for a, ss in grouped.items()}


@dataclass(frozen=True)
class PayoffTensor:
    """Dense payoffs: (state, joint action profile) -> one value per player."""

    actions: tuple[tuple[Action, ...], ...]
    values: dict[tuple[State, tuple[Action, ...]], tuple[float, ...]]

    @property
    def num_players(self) -> int:
        return len(self.actions)

    def profiles(self) -> Iterable[tuple[Action, ...]]:
        """All joint action profiles, in deterministic product order."""
        return itertools.product(*self.actions)

    def payoff(self, state: State, profile: tuple[Action, ...], player: int) -> float:
        return self.values[(state, profile)][player - 1]


@dataclass(frozen=True)
class NestedGame:
    space: StateSpace
    partitions: tuple[InformationPartition, ...]
    payoffs: PayoffTensor

    @property
    def n(self) -> int:
        return len(self.partitions)

    def partition_for(self, player: int) -> InformationPartition:
        return self.partitions[player - 1]

    def prior_for(self, player: int) -> Mapping[State, float]:
        return self.space.prior_for(player)

    def actions_for(self, player: int) -> tuple[Action, ...]:
        return self.payoffs.actions[player - 1]


@dataclass(frozen=True)
class StrategyProfile:
    """Per player: partition atom -> probability distribution over actions.

    ``field_level`` records which partition family the atom ids refer to:
    ``"original"`` for the game's own partitions, ``"coarse"`` for the
    derived coarse partitions of a belief hierarchy.
    """

    strategies: dict[int, dict[Atom, dict[Action, float]]]
    field_level: str = "original"

    def distribution(self, player: int, atom: Atom) -> dict[Action, float]:
        try:
            return self.strategies[player][atom]
        except KeyError:
            raise GameFormatError(
                f"player {player} has no strategy for atom {atom!r}"
            ) from None


@dataclass(frozen=True)
class PayoffClasses:
    """Distinct per-state payoff matrices, enumerated over the state order.

    Two states belong to the same class when their full payoff matrices
    (all players, all action profiles) are identical.  ``index_of`` maps
    every state to its class; ``representatives`` holds the first state
    seen in each class.
    """

    count: int
    index_of: dict[State, int]
    representatives: tuple[State, ...]


def refines(fine: InformationPartition, coarse: InformationPartition) -> bool:
    """True when every atom of ``fine`` lies inside a single atom of ``coarse``.

    Both partitions must cover the same state set; a mismatch is a usage
    error, not a refinement failure.
    """
    if set(fine.atom_of) != set(coarse.atom_of):
        raise GameFormatError("refines: partitions cover different state sets")
    seen: dict[Atom, Atom] = {}
    for state, atom in fine.atom_of.items():
        parent = coarse.atom_of[state]
        if atom in seen:
            if seen[atom] != parent:
                return False
        else:
            seen[atom] = parent
    return True


def _refinement_witness(
    fine: InformationPartition, coarse: InformationPartition
) -> tuple[State, State] | None:
    """A pair of states in one fine atom but different coarse atoms, if any."""
    first: dict[Atom, State] = {}
    for state, atom in fine.atom_of.items():
        if atom in first:
            if coarse.atom_of[first[atom]] != coarse.atom_of[state]:
                return (first[atom], state)
        else:
            first[atom] = state
    return None


def _check_prior(
    violations: list[Violation],
    label: str,
    prior: Mapping[State, float],
    states: tuple[State, ...],
) -> None:
    missing = [s for s in states if s not in prior]
    extra = [s for s in prior if s not in set(states)]
    if missing:
        violations.append(
            Violation("prior", f"{label} missing mass for state {missing[0]!r}")
        )
    if extra:
        violations.append(
            Violation("prior", f"{label} assigns mass to unknown state {extra[0]!r}")
        )
    if missing or extra:
        return
    for s in states:
        v = prior[s]
        if not math.isfinite(v) or v < 0:
            violations.append(
                Violation("prior", f"{label} has invalid mass {v!r} at state {s!r}")
            )
            return
    total = math.fsum(prior[s] for s in states)
    if abs(total - 1.0) > MASS_TOL:
        violations.append(Violation("prior", f"{label} sums to {total:.12g}"))


def validate_game(game: NestedGame) -> ValidationReport:
    """Structural and semantic validation; returns all violations found."""
    v: list[Violation] = []
    states = game.space.states
    if len(set(states)) != len(states):
        v.append(Violation("states", "duplicate state ids"))
        return ValidationReport(tuple(v))
    if game.n < 2:
        v.append(Violation("players", f"need at least 2 players, got {game.n}"))
    if len(game.payoffs.actions) != game.n:
        v.append(
            Violation(
                "actions",
                f"payoff tensor covers {len(game.payoffs.actions)} players, "
                f"game has {game.n}",
            )
        )
        return ValidationReport(tuple(v))

    _check_prior(v, "prior", game.space.prior, states)
    if game.space.player_priors:
        for player, prior in game.space.player_priors.items():
            if not (1 <= player <= game.n):
                v.append(Violation("prior", f"prior given for unknown player {player}"))
                continue
            _check_prior(v, f"player {player} prior", prior, states)

    state_set = set(states)
    for idx, part in enumerate(game.partitions, start=1):
        if part.player != idx:
            v.append(
                Violation(
                    "partition",
                    f"partition at position {idx} is labeled player {part.player}",
                )
            )
        covered = set(part.atom_of)
        for s in states:
            if s not in covered:
                v.append(
                    Violation(
                        "partition", f"player {idx} partition misses state {s!r}"
                    )
                )
                break
        for s in part.atom_of:
            if s not in state_set:
                v.append(
                    Violation(
                        "partition",
                        f"player {idx} partition covers unknown state {s!r}",
                    )
                )
                break

    for i, acts in enumerate(game.payoffs.actions, start=1):
        if len(acts) == 0:
            v.append(Violation("actions", f"player {i} has no actions"))
        if len(set(acts)) != len(acts):
            v.append(Violation("actions", f"player {i} has duplicate action labels"))

    if any(x.code in ("partition", "actions") for x in v):
        return ValidationReport(tuple(v))

    # Payoff tensor completeness and finiteness.
    expected = len(states)
    for acts in game.payoffs.actions:
        expected *= len(acts)
    if len(game.payoffs.values) != expected:
        v.append(
            Violation(
                "payoffs",
                f"payoff tensor has {len(game.payoffs.values)} entries, "
                f"expected {expected}",
            )
        )
    for (s, prof), vals in game.payoffs.values.items():
        if s not in state_set:
            v.append(Violation("payoffs", f"payoff entry for unknown state {s!r}"))
            break
        if len(vals) != game.n:
            v.append(
                Violation(
                    "payoffs",
                    f"payoff entry at ({s!r}, {prof!r}) has {len(vals)} values",
                )
            )
            break
        if any(not math.isfinite(x) for x in vals):
            v.append(
                Violation("payoffs", f"non-finite payoff at ({s!r}, {prof!r})")
            )
            break

    # Nestedness: player i's information refines player i+1's.
    for i in range(1, game.n):
        fine, coarse = game.partitions[i - 1], game.partitions[i]
        witness = _refinement_witness(fine, coarse)
        if witness is not None:
            v.append(
                Violation(
                    "nestedness",
                    f"nestedness fails at player {i}: states {witness[0]!r} and "
                    f"{witness[1]!r} share player {i}'s atom but not "
                    f"player {i + 1}'s",
                )
            )
    return ValidationReport(tuple(v))


def payoff_bound(game: NestedGame) -> float:
    """Sup-norm bound on payoffs, floored at 1 so budget formulas stay sane."""
    top = max(
        (abs(x) for vals in game.payoffs.values.values() for x in vals), default=0.0
    )
    return max(1.0, top)


def payoff_classes(game: NestedGame) -> PayoffClasses:
    """Enumerate distinct per-state payoff matrices in state order."""
    profiles = tuple(game.payoffs.profiles())
    index_of: dict[State, int] = {}
    reps: list[State] = []
    keys: dict[tuple, int] = {}
    for s in game.space.states:
        key = tuple(game.payoffs.values[(s, prof)] for prof in profiles)
        if key not in keys:
            keys[key] = len(reps)
            reps.append(s)
        index_of[s] = keys[key]
    return PayoffClasses(count=len(reps), index_of=index_of, representatives=tuple(reps))


def _state_cell(
    game: NestedGame, profile: StrategyProfile, state: State, player: int
) -> float:
    """Expected payoff to ``player`` at ``state`` under the product measure."""
    dists = [
        profile.distribution(j, game.partitions[j - 1].atom_of[state])
        for j in range(1, game.n + 1)
    ]
    terms = []
    for prof in game.payoffs.profiles():
        p = 1.0
        for j, a in enumerate(prof):
            p *= dists[j].get(a, 0.0)
            if p == 0.0:
                break
        if p != 0.0:
            terms.append(p * game.payoffs.values[(state, prof)][player - 1])
    return math.fsum(terms)


def expected_payoff(game: NestedGame, profile: StrategyProfile) -> tuple[float, ...]:
    """Ex-ante expected payoff vector; player i's entry uses player i's prior."""
    out = []
    for i in range(1, game.n + 1):
        prior = game.prior_for(i)
        out.append(
            math.fsum(
                prior[s] * _state_cell(game, profile, s, i)
                for s in game.space.states
                if prior[s] > 0.0
            )
        )
    return tuple(out)


def conditional_payoff(
    game: NestedGame,
    profile: StrategyProfile,
    player: int,
    partition: InformationPartition | None = None,
) -> dict[Atom, float]:
    """Expected payoff to ``player`` conditional on each positive-mass atom.

    The conditioning partition defaults to the player's own information.
    Zero-mass atoms are omitted: conditional values are only defined
    almost surely.
    """
    part = partition if partition is not None else game.partition_for(player)
    prior = game.prior_for(player)
    out: dict[Atom, float] = {}
    for atom, members in part.atoms.items():
        mass = math.fsum(prior[s] for s in members)
        if mass <= 0.0:
            continue
        total = math.fsum(
            prior[s] * _state_cell(game, profile, s, player)
            for s in members
            if prior[s] > 0.0
        )
        out[atom] = total / mass
    return out


def validate_profile(game: NestedGame, profile: StrategyProfile) -> list[str]:
    """Problems preventing ``profile`` from being evaluated on ``game``.

    Coverage is required for every atom containing a state with positive
    mass under any player's prior; distributions must be over the owning
    player's actions and normalize within MASS_TOL.
    """
    problems: list[str] = []
    priors = [game.prior_for(i) for i in range(1, game.n + 1)]

    def relevant(s: State) -> bool:
        return any(p[s] > 0.0 for p in priors)

    for i in range(1, game.n + 1):
        given = profile.strategies.get(i)
        if given is None:
            problems.append(f"missing strategies for player {i}")
            continue
        part = game.partition_for(i)
        for atom, members in part.atoms.items():
            if not any(relevant(s) for s in members):
                continue
            if atom not in given:
                problems.append(f"player {i} missing atom {atom!r}")
        known = set(part.atoms)
        actions = set(game.actions_for(i))
        for atom, dist in given.items():
            if atom not in known:
                problems.append(f"player {i} has unknown atom {atom!r}")
                continue
            bad = [a for a in dist if a not in actions]
            if bad:
                problems.append(
                    f"player {i} atom {atom!r} uses unknown action {bad[0]!r}"
                )
                continue
            if any(not math.isfinite(p) or p < -MASS_TOL for p in dist.values()):
                problems.append(f"player {i} atom {atom!r} has negative mass")
                continue
            total = math.fsum(dist.values())
            if abs(total - 1.0) > MASS_TOL:
                problems.append(
                    f"player {i} atom {atom!r} distribution sums to {total:.12g}"
                )
    return problems


def from_type_space(
    type_sets: Sequence[Sequence[object]],
    joint: Mapping[tuple, float],
    payoffs: Mapping[tuple[tuple, tuple], Sequence[float]],
    actions: Sequence[Sequence[Action]] | None = None,
) -> NestedGame:
    """Build a nested game from a finite type space.

    States are the positive-mass type profiles.  Player i observes the
    types of all players i..n, so partitions are nested by construction.
    State ids and atom ids are the "|"-joined type labels, which keeps
    reports readable; labels therefore must not contain "|".

    Args:
        type_sets: per-player finite type sets (labels are stringified).
        joint: map from full type profiles to probability mass.
        payoffs: map from (type profile, action profile) to an n-vector.
        actions: per-player action labels; inferred from the payoff table
            keys (first occurrence order) when omitted.
    """
    n = len(type_sets)
    if n < 2:
        raise GameFormatError("need at least 2 players")
    labels: list[tuple[str, ...]] = []
    for i, ts in enumerate(type_sets, start=1):
        ls = tuple(str(t) for t in ts)
        if len(set(ls)) != len(ls):
            raise GameFormatError(f"player {i} has duplicate type labels")
        if any("|" in l for l in ls):
            raise GameFormatError("type labels must not contain '|'")
        labels.append(ls)

    all_profiles = list(itertools.product(*labels))
    profile_set = set(all_profiles)
    norm_joint: dict[tuple[str, ...], float] = {}
    for key, mass in joint.items():
        tkey = tuple(str(t) for t in key)
        if tkey not in profile_set:
            raise GameFormatError(f"joint table has unknown type profile {key!r}")
        if tkey in norm_joint:
            raise GameFormatError(f"joint table repeats type profile {key!r}")
        norm_joint[tkey] = float(mass)
    total = math.fsum(norm_joint.values())
    if abs(total - 1.0) > MASS_TOL:
        raise GameFormatError(f"joint not normalized: sums to {total:.12g}")
    if any(m < 0 for m in norm_joint.values()):
        raise GameFormatError("joint has negative mass")

    norm_payoffs: dict[tuple[tuple[str, ...], tuple], tuple[float, ...]] = {}
    for (tkey, akey), vals in payoffs.items():
        norm_payoffs[(tuple(str(t) for t in tkey), tuple(akey))] = tuple(
            float(x) for x in vals
        )

    if actions is None:
        seen: list[dict[Action, None]] = [dict() for _ in range(n)]
        for (_, akey) in norm_payoffs:
            for j, a in enumerate(akey):
                if j < n:
                    seen[j].setdefault(a)
        action_sets = tuple(tuple(d.keys()) for d in seen)
    else:
        if len(actions) != n:
            raise GameFormatError("actions must list one action set per player")
        action_sets = tuple(tuple(a) for a in actions)
    if any(len(a) == 0 for a in action_sets):
        raise GameFormatError("every player needs at least one action")

    live = [tp for tp in all_profiles if norm_joint.get(tp, 0.0) > 0.0]
    if not live:
        raise GameFormatError("no type profile has positive mass")

    def sid(tp: tuple[str, ...]) -> str:
        return "|".join(tp)

    states = tuple(sid(tp) for tp in live)
    prior = {sid(tp): norm_joint[tp] for tp in live}

    partitions = []
    for i in range(1, n + 1):
        atom_of = {sid(tp): "|".join(tp[i - 1 :]) for tp in live}
        partitions.append(InformationPartition(player=i, atom_of=atom_of))

    values: dict[tuple[State, tuple[Action, ...]], tuple[float, ...]] = {}
    for tp in live:
        for aprof in itertools.product(*action_sets):
            key = (tp, aprof)
            if key not in norm_payoffs:
                raise GameFormatError(
                    f"payoff table misses type profile {tp!r} with actions {aprof!r}"
                )
            vals = norm_payoffs[key]
            if len(vals) != n:
                raise GameFormatError(
                    f"payoff entry at {key!r} has {len(vals)} values, expected {n}"
                )
            values[(sid(tp), aprof)] = vals

    return NestedGame(
        space=StateSpace(states=states, prior=prior),
        partitions=tuple(partitions),
        payoffs=PayoffTensor(actions=action_sets, values=values),
    )
