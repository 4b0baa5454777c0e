"""Equilibrium search on the coarse auxiliary game.

Replacing each player's information with the coarse partition induced by
a belief hierarchy yields a finite auxiliary game whose equilibria
transfer back to the original game with a quantified regret penalty.
The auxiliary game is solved in agent form: one agent per (player,
positive-mass coarse atom), each choosing a mixed action.

Two-player zero-sum games with a common prior are solved exactly by
linear programming over behavioral strategies.  Everything else runs
iterated smoothed best response with an annealed temperature, a
fictitious play average tracked alongside, and random restarts.
Nothing downstream depends on the heuristics converging: the returned
profile always ships with its exact regret, recomputed by the
certification module, and callers decide what to do with a
non-converged result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import linprog

from . import regret as regret_mod
from .game import (
    Action,
    Atom,
    GameFormatError,
    NestedGame,
    StrategyProfile,
)
from .hierarchy import Hierarchy, check_properties


@dataclass(frozen=True)
class SolverConfig:
    target_regret: float
    max_restarts: int = 4
    max_iterations: int = 4000
    seed: int = 0


@dataclass(frozen=True)
class AuxGame:
    """The original game with information coarsened to the hierarchy's atoms.

    ``null_atoms`` lists, per player, coarse atoms carrying zero mass
    under that player's prior; they hold no incentive content and are
    pinned to a fixed pure action by the solver.
    """

    base: NestedGame
    hierarchy: Hierarchy
    coarse_game: NestedGame
    null_atoms: dict[int, tuple[Atom, ...]]


@dataclass(frozen=True)
class SolveResult:
    profile: StrategyProfile
    certified_regret: float
    iterations: int
    restarts: int
    converged: bool
    method: str


def build_auxiliary_game(game: NestedGame, hierarchy: Hierarchy) -> AuxGame:
    """Swap each player's partition for the coarse one."""
    if hierarchy.game is not game and hierarchy.game != game:
        raise GameFormatError("hierarchy was built for a different game")
    report = check_properties(game, hierarchy)
    if not report.ok:
        bad = [c for c in report.checks if not c.ok]
        raise GameFormatError(
            f"hierarchy failed its structural audit: {bad[0].name} for player "
            f"{bad[0].player}"
        )
    coarse_game = NestedGame(
        space=game.space,
        partitions=hierarchy.coarse,
        payoffs=game.payoffs,
    )
    null_atoms: dict[int, tuple[Atom, ...]] = {}
    for i in range(1, game.n + 1):
        prior = game.prior_for(i)
        nulls = [
            atom
            for atom, members in hierarchy.coarse_partition(i).atoms.items()
            if math.fsum(prior[s] for s in members) <= 0.0
        ]
        null_atoms[i] = tuple(nulls)
    return AuxGame(
        base=game,
        hierarchy=hierarchy,
        coarse_game=coarse_game,
        null_atoms=null_atoms,
    )


class AgentFormGame:
    """Agent-form expansion with a vectorized payoff engine.

    One agent per (player, positive-mass coarse atom).  The engine keeps
    the payoff tensor as an ndarray indexed by state and one axis per
    player, so a full sweep of conditional action values for every agent
    is a handful of array operations.  Agent payoffs are the player's
    prior-weighted payoff restricted to the atom; maximizing one is
    equivalent to maximizing the player's conditional payoff there, so
    best-response sets match the underlying game.
    """

    def __init__(self, aux: AuxGame):
        self.aux = aux
        game = aux.coarse_game
        self.n = game.n
        self.states = list(game.space.states)
        self.dims = tuple(len(a) for a in game.payoffs.actions)
        self.actions = game.payoffs.actions
        s_count = len(self.states)

        self.payoff = np.empty((self.n, s_count) + self.dims)
        for si, s in enumerate(self.states):
            for multi in product(*(range(d) for d in self.dims)):
                prof = tuple(self.actions[j][multi[j]] for j in range(self.n))
                vals = game.payoffs.values[(s, prof)]
                for i in range(self.n):
                    self.payoff[(i, si) + multi] = vals[i]

        self.priors = np.array(
            [
                [game.prior_for(i)[s] for s in self.states]
                for i in range(1, self.n + 1)
            ]
        )

        self.atom_ids: list[list[Atom]] = []
        self.atom_index: list[np.ndarray] = []
        self.masses: list[np.ndarray] = []
        self.positive: list[np.ndarray] = []
        for i in range(1, self.n + 1):
            part = game.partition_for(i)
            ids = list(part.atoms.keys())
            lookup = {a: r for r, a in enumerate(ids)}
            idx = np.array([lookup[part.atom_of[s]] for s in self.states])
            mass = np.zeros(len(ids))
            np.add.at(mass, idx, self.priors[i - 1])
            self.atom_ids.append(ids)
            self.atom_index.append(idx)
            self.masses.append(mass)
            self.positive.append(mass > 0.0)

        self.agents: tuple[tuple[int, Atom], ...] = tuple(
            (i, atom)
            for i in range(1, self.n + 1)
            for r, atom in enumerate(self.atom_ids[i - 1])
            if self.positive[i - 1][r]
        )
        self.scale = max(1.0, float(np.abs(self.payoff).max(initial=0.0)))

    # -- strategy containers --------------------------------------------

    def uniform_strategies(self) -> list[np.ndarray]:
        out = []
        for i in range(1, self.n + 1):
            rows = len(self.atom_ids[i - 1])
            d = self.dims[i - 1]
            x = np.full((rows, d), 1.0 / d)
            self._pin_null(i, x)
            out.append(x)
        return out

    def random_strategies(self, rng: np.random.Generator) -> list[np.ndarray]:
        out = []
        for i in range(1, self.n + 1):
            rows = len(self.atom_ids[i - 1])
            d = self.dims[i - 1]
            x = rng.dirichlet(np.ones(d), size=rows)
            self._pin_null(i, x)
            out.append(x)
        return out

    def _pin_null(self, player: int, x: np.ndarray) -> None:
        # Null atoms carry no mass; pin them to the first action so every
        # run and restart agrees on their content.
        rows = ~self.positive[player - 1]
        if rows.any():
            x[rows] = 0.0
            x[rows, 0] = 1.0

    # -- payoff engine ----------------------------------------------------

    def _state_strategies(self, strategies: list[np.ndarray]) -> list[np.ndarray]:
        return [strategies[j][self.atom_index[j]] for j in range(self.n)]

    def action_values(self, strategies: list[np.ndarray]) -> list[np.ndarray]:
        """Per player: (atoms, own actions) conditional payoff matrix.

        Rows for null atoms are zero.  Entry [g, a] is the player's
        expected payoff conditional on coarse atom g when playing a
        against the others' strategies.
        """
        per_state = self._state_strategies(strategies)
        s_count = len(self.states)
        out = []
        for i in range(self.n):
            shape = [s_count] + [1] * self.n
            prod = np.ones(shape)
            for j in range(self.n):
                if j == i:
                    continue
                view = [s_count] + [1] * self.n
                view[1 + j] = self.dims[j]
                prod = prod * per_state[j].reshape(view)
            weighted = self.payoff[i] * prod
            axes = tuple(1 + j for j in range(self.n) if j != i)
            m_states = weighted.sum(axis=axes)
            contrib = m_states * self.priors[i][:, None]
            m_atoms = np.zeros((len(self.atom_ids[i]), self.dims[i]))
            np.add.at(m_atoms, self.atom_index[i], contrib)
            pos = self.positive[i]
            m_atoms[pos] /= self.masses[i][pos, None]
            m_atoms[~pos] = 0.0
            out.append(m_atoms)
        return out

    def regret(
        self, strategies: list[np.ndarray], values: list[np.ndarray] | None = None
    ) -> float:
        """Max conditional regret over agents, up to float rounding."""
        if values is None:
            values = self.action_values(strategies)
        worst = 0.0
        for i in range(self.n):
            pos = self.positive[i]
            if not pos.any():
                continue
            best = values[i][pos].max(axis=1)
            cur = (values[i][pos] * strategies[i][pos]).sum(axis=1)
            worst = max(worst, float((best - cur).max()))
        return worst

    def player_payoffs(self, strategies: list[np.ndarray]) -> np.ndarray:
        values = self.action_values(strategies)
        out = np.zeros(self.n)
        for i in range(self.n):
            cur = (values[i] * strategies[i]).sum(axis=1)
            out[i] = float((cur * self.masses[i]).sum())
        return out

    # -- conversions --------------------------------------------------------

    def to_profile(self, strategies: list[np.ndarray]) -> StrategyProfile:
        strat: dict[int, dict[Atom, dict[Action, float]]] = {}
        for i in range(1, self.n + 1):
            table: dict[Atom, dict[Action, float]] = {}
            for r, atom in enumerate(self.atom_ids[i - 1]):
                row = strategies[i - 1][r]
                table[atom] = {
                    a: float(p) for a, p in zip(self.actions[i - 1], row)
                }
            strat[i] = table
        return StrategyProfile(strategies=strat, field_level="coarse")

    def from_profile(self, profile: StrategyProfile) -> list[np.ndarray]:
        out = []
        for i in range(1, self.n + 1):
            rows = len(self.atom_ids[i - 1])
            x = np.zeros((rows, self.dims[i - 1]))
            for r, atom in enumerate(self.atom_ids[i - 1]):
                dist = profile.distribution(i, atom)
                for c, a in enumerate(self.actions[i - 1]):
                    x[r, c] = dist.get(a, 0.0)
            out.append(x)
        return out


def to_agent_form(aux: AuxGame) -> AgentFormGame:
    return AgentFormGame(aux)


def _normalized_rows(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, None)
    totals = x.sum(axis=1, keepdims=True)
    totals[totals == 0.0] = 1.0
    return x / totals


def _softmax_rows(m: np.ndarray, tau: float) -> np.ndarray:
    z = (m - m.max(axis=1, keepdims=True)) / tau
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _pure_rows(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[np.arange(values.shape[0]), values.argmax(axis=1)] = 1.0
    return out


def _zero_sum_lp_side(kernel: np.ndarray) -> np.ndarray | None:
    """Maximizer's behavioral strategy for one side of a zero-sum game.

    ``kernel[g, a, h, b]`` is the prior-weighted payoff to the
    maximizer from own action a on own atom g against opponent action b
    on opponent atom h.  Solves: maximize sum_h v_h subject to
    v_h <= sum_{g,a} kernel[g,a,h,b] x[g,a] for all (h,b), each row of
    x a distribution.  Returns x or None when the LP fails.
    """
    own_atoms, own_dim, opp_atoms, opp_dim = kernel.shape
    nx = own_atoms * own_dim
    c = np.zeros(nx + opp_atoms)
    c[nx:] = -1.0
    flat = kernel.reshape(nx, opp_atoms * opp_dim)
    a_ub = np.zeros((opp_atoms * opp_dim, nx + opp_atoms))
    a_ub[:, :nx] = -flat.T
    for h in range(opp_atoms):
        a_ub[h * opp_dim : (h + 1) * opp_dim, nx + h] = 1.0
    a_eq = np.zeros((own_atoms, nx + opp_atoms))
    for g in range(own_atoms):
        a_eq[g, g * own_dim : (g + 1) * own_dim] = 1.0
    b_eq = np.ones(own_atoms)
    bounds = [(0.0, 1.0)] * nx + [(None, None)] * opp_atoms
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(opp_atoms * opp_dim),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        return None
    x = np.clip(res.x[:nx].reshape(own_atoms, own_dim), 0.0, None)
    return x / x.sum(axis=1, keepdims=True)


def _try_zero_sum_lp(agent_game: AgentFormGame) -> list[np.ndarray] | None:
    """Exact behavioral solve of a two-player zero-sum common-prior game."""
    if agent_game.n != 2:
        return None
    if not np.array_equal(agent_game.priors[0], agent_game.priors[1]):
        return None
    realized = agent_game.priors[0] > 0.0
    total = agent_game.payoff[0] + agent_game.payoff[1]
    if not np.allclose(
        total[realized], 0.0, atol=1e-12 * agent_game.scale, rtol=0.0
    ):
        return None

    g1, g2 = len(agent_game.atom_ids[0]), len(agent_game.atom_ids[1])
    d1, d2 = agent_game.dims
    kernel = np.zeros((g1, d1, g2, d2))
    for si in np.nonzero(realized)[0]:
        g = agent_game.atom_index[0][si]
        h = agent_game.atom_index[1][si]
        kernel[g, :, h, :] += agent_game.priors[0][si] * agent_game.payoff[0, si]

    x1 = _zero_sum_lp_side(kernel)
    x2 = _zero_sum_lp_side(-kernel.transpose(2, 3, 0, 1))
    if x1 is None or x2 is None:
        return None
    strategies = [x1, x2]
    for i in (1, 2):
        agent_game._pin_null(i, strategies[i - 1])
    return strategies


class _Tracker:
    """Best-profile bookkeeping shared by the search processes."""

    def __init__(self, target: float):
        self.margin = target * (1.0 - 1e-9)
        self.best_regret = math.inf
        self.best: list[np.ndarray] | None = None
        self.method = "none"
        self.iterations = 0

    def offer(
        self, regret_value: float, strategies: list[np.ndarray], method: str
    ) -> bool:
        if regret_value < self.best_regret:
            self.best_regret = regret_value
            self.best = [x.copy() for x in strategies]
            self.method = method
        return self.best_regret <= self.margin


def _run_regret_matching(
    agent_game: AgentFormGame,
    start: list[np.ndarray],
    tracker: _Tracker,
    max_iterations: int,
) -> bool:
    """Regret matching with a positive-part accumulator, linear averaging."""
    x = [v.copy() for v in start]
    pressure = [np.zeros_like(v) for v in x]
    average = [v.copy() for v in x]
    weight_sum = 1.0
    label = "regret-matching"
    for t in range(max_iterations):
        tracker.iterations += 1
        values = agent_game.action_values(x)
        if tracker.offer(agent_game.regret(x, values), x, label):
            return True
        for i in range(agent_game.n):
            cur = (values[i] * x[i]).sum(axis=1, keepdims=True)
            pressure[i] = np.maximum(0.0, pressure[i] + values[i] - cur)
            totals = pressure[i].sum(axis=1, keepdims=True)
            x[i] = np.where(
                totals > 0.0,
                pressure[i] / np.where(totals > 0.0, totals, 1.0),
                1.0 / agent_game.dims[i],
            )
            agent_game._pin_null(i + 1, x[i])
        w = t + 1.0
        for i in range(agent_game.n):
            average[i] = average[i] + (x[i] - average[i]) * (w / (weight_sum + w))
        weight_sum += w
        if (t + 1) % 10 == 0:
            if tracker.offer(agent_game.regret(average), average, label):
                return True
    return tracker.offer(agent_game.regret(average), average, label)


def _run_smoothed_response(
    agent_game: AgentFormGame,
    start: list[np.ndarray],
    tracker: _Tracker,
    max_iterations: int,
) -> bool:
    """Annealed smoothed best response plus a fictitious play average."""
    scale = agent_game.scale
    tau_start = 0.5 * scale
    tau_end = min(1e-4 * scale, 0.05 * max(tracker.margin, 1e-12))
    horizon = max(1, int(0.6 * max_iterations))
    decay = (tau_end / tau_start) ** (1.0 / horizon)
    current = [v.copy() for v in start]
    average = [v.copy() for v in start]
    label = "smoothed-best-response"
    for t in range(max_iterations):
        tracker.iterations += 1
        values = agent_game.action_values(current)
        if tracker.offer(agent_game.regret(current, values), current, label):
            return True
        tau = max(tau_end, tau_start * decay**t)
        current = [
            _normalized_rows(0.5 * x + 0.5 * _softmax_rows(v, tau))
            for x, v in zip(current, values)
        ]
        for i in range(agent_game.n):
            agent_game._pin_null(i + 1, current[i])

        avg_values = agent_game.action_values(average)
        if tracker.offer(agent_game.regret(average, avg_values), average, label):
            return True
        w = 1.0 / (t + 2)
        average = [
            _normalized_rows((1.0 - w) * av + w * _pure_rows(v))
            for av, v in zip(average, avg_values)
        ]
        for i in range(agent_game.n):
            agent_game._pin_null(i + 1, average[i])
    return False


def solve_nash(agent_game: AgentFormGame, config: SolverConfig) -> SolveResult:
    """Search for a low-regret profile of the auxiliary game.

    Deterministic given the seed.  Each restart runs regret matching
    first and the smoothed best-response process when that stalls,
    breaking out as soon as any candidate meets the target.  The best
    profile seen anywhere wins, and the certification module recomputes
    its exact regret; ``converged`` reports whether that certified
    number meets the target.
    """
    if config.target_regret < 0:
        raise GameFormatError("target regret must be nonnegative")

    tracker = _Tracker(config.target_regret)
    restarts_used = 0

    lp = _try_zero_sum_lp(agent_game)
    if lp is not None:
        tracker.offer(agent_game.regret(lp), lp, "zero-sum-lp")

    if tracker.best is None or tracker.best_regret > tracker.margin:
        rng = np.random.default_rng(config.seed)
        for restart in range(config.max_restarts):
            restarts_used = restart + 1
            if restart == 0:
                start = agent_game.uniform_strategies()
            else:
                start = agent_game.random_strategies(rng)
            if _run_regret_matching(
                agent_game, start, tracker, config.max_iterations
            ):
                break
            if _run_smoothed_response(
                agent_game, start, tracker, config.max_iterations
            ):
                break

    best_strategies = tracker.best
    iterations_used = tracker.iterations
    method = tracker.method

    assert best_strategies is not None
    profile = agent_game.to_profile(best_strategies)
    table = regret_mod.bayesian_regret(agent_game.aux.coarse_game, profile)
    certified = max(
        (e.regret for entries in table.values() for e in entries.values()),
        default=0.0,
    )
    return SolveResult(
        profile=profile,
        certified_regret=certified,
        iterations=iterations_used,
        restarts=restarts_used,
        converged=certified <= config.target_regret + regret_mod.CERT_SLACK,
        method=method,
    )


def lift_strategy(
    aux_profile: StrategyProfile, game: NestedGame, hierarchy: Hierarchy
) -> StrategyProfile:
    """Pull a coarse-measurable profile back to the original information.

    Each original atom sits inside exactly one coarse atom, so the lift
    just copies that atom's distribution.  The result is measurable for
    the original partitions by construction and preserves all payoffs.
    """
    if aux_profile.field_level != "coarse":
        raise GameFormatError("lift expects a coarse-level profile")
    strategies: dict[int, dict[Atom, dict[Action, float]]] = {}
    for i in range(1, game.n + 1):
        coarse = hierarchy.coarse_partition(i)
        table: dict[Atom, dict[Action, float]] = {}
        for atom, members in game.partition_for(i).atoms.items():
            parents = {coarse.atom_of[s] for s in members}
            if len(parents) != 1:
                raise GameFormatError(
                    f"player {i} atom {atom!r} straddles coarse atoms"
                )
            table[atom] = dict(aux_profile.distribution(i, parents.pop()))
        strategies[i] = table
    return StrategyProfile(strategies=strategies, field_level="original")
