"""Repeated two-player lab: a one-step game with Bernoulli states where
each player learns the opponent and its own cost from realized play.

Player 1 collects c per unit of action but pays 1 whenever player 2's state
comes up 1; player 2 pays 1 on a state mismatch.  Both minimize estimated
cost over an action grid.  The estimate combines an ensemble of opponent
predictors (action nets, own action -> opponent state probability) with a
randomly chosen residual net (cost nets, dropout on) whose contribution is
amplified while the player's mood is desperate.

Costs are minimized here; traces negate them into values before they reach
the equilibrium checkers, which maximize.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .framework import TrajectoryStats
from .measures import FiniteMeasure
from .smallnet import DropoutSample, Net

__all__ = [
    "GameConfig",
    "PlayerState",
    "env_step",
    "realized_costs",
    "estimate_cost",
    "draw_action",
    "update_networks",
    "behavior_snapshot",
    "TraceRow",
    "TwoPlayerTrace",
    "run_experiment",
]

EXPLORE_MAX = 8.0
EXPLORE_UP = 1.5
EXPLORE_DOWN = 0.9
DESPERATE_BAND = 1.0 / 9.0
CONTENT_BAND = 6.0 / 9.0


@dataclass
class GameConfig:
    """Knobs of one repeated-game run.

    c is player 1's incentive per unit of action; b1 and b2 are the best
    expectations the desperation index compares realized prospects against.
    """

    c: float = 0.3
    b1: float = 0.1
    b2: float = -0.2
    k: int = 8
    memory_len: int = 200
    recency_decay: float = 0.98
    n_games: int = 1000
    action_grid: int = 101
    seed: int = 0
    sgd_steps: int = 5
    learning_rate: float = 0.05
    batch_size: int = 32
    dropout_rate: float = 0.1
    kappa_smoothing: float = 0.9

    def validate(self) -> None:
        if not self.c > 0.0:
            raise ValueError("c must be positive")
        if self.action_grid < 2:
            raise ValueError("action-grid must be at least 2")
        if self.memory_len < 1:
            raise ValueError("memory-len must be at least 1")
        if not 0.0 < self.recency_decay < 1.0:
            raise ValueError("recency-decay must lie in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.n_games < 1:
            raise ValueError("n-games must be positive")
        if not 0.0 <= self.kappa_smoothing < 1.0:
            raise ValueError("kappa-smoothing must lie in [0, 1)")

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.action_grid)


@dataclass
class PlayerState:
    """One player's learning state.

    Memory rows are (own action, own state, opponent state, realized cost),
    newest last.  kappa_ema smooths the per-round desperation estimates;
    explore_scale multiplies the residual-net term of the cost estimate.
    """

    role: int
    action_nets: list
    cost_nets: list
    memory: deque = field(default_factory=deque)
    kappa_ema: float | None = None
    explore_scale: float = 1.0

    @classmethod
    def create(cls, role: int, config: GameConfig, rng) -> "PlayerState":
        if role not in (1, 2):
            raise ValueError(f"role {role!r} must be 1 or 2")
        action_nets = [
            Net.init((1, 16, 16, 1), rng, output_transform="sigmoid")
            for _ in range(config.k)]
        cost_nets = [
            Net.init((1, 16, 16, 1), rng, output_transform="identity",
                     dropout_rate=config.dropout_rate)
            for _ in range(config.k)]
        return cls(role=role, action_nets=action_nets, cost_nets=cost_nets,
                   memory=deque(maxlen=config.memory_len))

    @property
    def k(self) -> int:
        return len(self.cost_nets)


def env_step(a1: float, a2: float, rng):
    """Realize both states: x_i is 1 with probability a_i, independently."""
    if not (0.0 <= a1 <= 1.0 and 0.0 <= a2 <= 1.0):
        raise ValueError("actions must lie in [0, 1]")
    u = rng.random(2)
    return int(u[0] < a1), int(u[1] < a2)


def realized_costs(a1: float, a2: float, x1: int, x2: int, c: float):
    if x1 not in (0, 1) or x2 not in (0, 1):
        raise ValueError("states must be 0 or 1")
    cost1 = -c * a1 + (1.0 if x2 == 1 else 0.0)
    cost2 = 1.0 if x1 != x2 else 0.0
    return cost1, cost2


def _opponent_state_curves(player: PlayerState, actions: np.ndarray) -> np.ndarray:
    """Each action net's predicted opponent-state probability, shape (k, n)."""
    inputs = actions.reshape(-1, 1)
    return np.stack([net.forward(inputs)[:, 0] for net in player.action_nets])


def _structural_curve(player: PlayerState, actions: np.ndarray, role: int,
                      c: float) -> np.ndarray:
    """Cost estimate before the residual-net term, on an action vector."""
    hats = _opponent_state_curves(player, actions)
    if role == 1:
        return hats.mean(axis=0) - c * actions
    if role == 2:
        return (hats + actions * (1.0 - 2.0 * hats)).mean(axis=0)
    raise ValueError(f"role {role!r} must be 1 or 2")


def _residual_curve(player: PlayerState, actions: np.ndarray, net_index: int,
                    sample: DropoutSample | None) -> np.ndarray:
    return player.cost_nets[net_index].forward(
        actions.reshape(-1, 1), sample)[:, 0]


def estimate_cost(player: PlayerState, own_action: float, net_index: int,
                  dropout: DropoutSample | None, role: int, c: float,
                  scale: float | None = None) -> float:
    """Estimated cost of one action under one residual-scenario draw.

    ``scale`` overrides the player's current explore_scale (the desperation
    index is computed at scale 1 so mood reflects beliefs, not exploration).
    """
    a = np.array([float(own_action)])
    if scale is None:
        scale = player.explore_scale
    structural = _structural_curve(player, a, role, c)
    residual = _residual_curve(player, a, net_index, dropout)
    return float(structural[0] + scale * residual[0])


def _cost_curve(player: PlayerState, grid: np.ndarray, net_index: int,
                sample: DropoutSample | None, role: int, c: float,
                scale: float) -> np.ndarray:
    return (_structural_curve(player, grid, role, c)
            + scale * _residual_curve(player, grid, net_index, sample))


def draw_action(player: PlayerState, role: int, c: float, rng,
                action_grid: int = 101) -> float:
    """Pick a residual scenario, minimize the estimate over the grid.

    Ties break to the lowest grid point.
    """
    grid = np.linspace(0.0, 1.0, action_grid)
    ell = int(rng.integers(player.k))
    sample = DropoutSample.draw(player.cost_nets[ell], int(rng.integers(2 ** 63)))
    curve = _cost_curve(player, grid, ell, sample, role, c,
                        player.explore_scale)
    return float(grid[int(np.argmin(curve))])


def _kappa_estimate(player: PlayerState, role: int, c: float, b: float,
                    grid: np.ndarray, rng) -> float:
    """Fraction of residual scenarios whose best attainable value beats b.

    Scenario value is the negated grid minimum of the scale-1 cost curve.
    """
    structural = _structural_curve(player, grid, role, c)
    hits = 0
    for ell in range(player.k):
        sample = DropoutSample.draw(player.cost_nets[ell],
                                    int(rng.integers(2 ** 63)))
        curve = structural + _residual_curve(player, grid, ell, sample)
        if -float(curve.min()) > b:
            hits += 1
    return hits / player.k


def _recency_weights(n: int, decay: float) -> np.ndarray:
    w = decay ** np.arange(n - 1, -1, -1, dtype=float)
    return w / w.sum()


def update_networks(player: PlayerState, config: GameConfig, rng,
                    b: float) -> PlayerState:
    """Train both ensembles on recency-weighted memory draws, then refresh
    the desperation index and the exploration scale.

    Action nets regress own action to observed opponent state; cost nets
    regress the residual the structural estimate leaves unexplained.  A
    smoothed kappa below the lowest mood band cranks explore_scale up; one
    above the content band decays it toward 1.  Empty memory is a no-op.
    """
    if not player.memory:
        return player
    rows = list(player.memory)
    actions = np.array([r[0] for r in rows])
    opp_states = np.array([float(r[2]) for r in rows])
    costs = np.array([r[3] for r in rows])
    weights = _recency_weights(len(rows), config.recency_decay)
    batch = config.batch_size

    for _ in range(config.sgd_steps):
        for net in player.action_nets:
            idx = rng.choice(len(rows), size=batch, p=weights)
            net.train_step((actions[idx], opp_states[idx]),
                           config.learning_rate)
        picks = [rng.choice(len(rows), size=batch, p=weights)
                 for _ in player.cost_nets]
        structural = _structural_curve(
            player, actions[np.concatenate(picks)], player.role, config.c)
        for j, net in enumerate(player.cost_nets):
            picked = actions[picks[j]]
            residual = costs[picks[j]] - structural[j * batch:(j + 1) * batch]
            sample = DropoutSample.draw(net, int(rng.integers(2 ** 63)))
            net.train_step((picked, residual), config.learning_rate,
                           sample=sample)

    fresh = _kappa_estimate(player, player.role, config.c, b, config.grid(), rng)
    if player.kappa_ema is None:
        player.kappa_ema = fresh
    else:
        beta = config.kappa_smoothing
        player.kappa_ema = beta * player.kappa_ema + (1.0 - beta) * fresh
    if player.kappa_ema < DESPERATE_BAND:
        player.explore_scale = min(player.explore_scale * EXPLORE_UP, EXPLORE_MAX)
    elif player.kappa_ema > CONTENT_BAND:
        player.explore_scale = max(player.explore_scale * EXPLORE_DOWN, 1.0)
    return player


def behavior_snapshot(player: PlayerState, role: int, c: float,
                      grid: np.ndarray, rng) -> FiniteMeasure:
    """Induced action distribution right now: one grid argmin per residual
    scenario at the live explore scale, mixed uniformly over scenarios."""
    structural = _structural_curve(player, grid, role, c)
    picks = []
    for ell in range(player.k):
        sample = DropoutSample.draw(player.cost_nets[ell],
                                    int(rng.integers(2 ** 63)))
        curve = structural + player.explore_scale * _residual_curve(
            player, grid, ell, sample)
        picks.append(float(grid[int(np.argmin(curve))]))
    return FiniteMeasure((a, 1.0 / len(picks)) for a in picks)


@dataclass(frozen=True)
class TraceRow:
    game: int
    a1: float
    a2: float
    x1: int
    x2: int
    cost1: float
    cost2: float
    kappa1: float
    kappa2: float
    explore1: float
    explore2: float


@dataclass
class TwoPlayerTrace:
    rows: list
    stats: dict
    players: tuple
    seed: int


def run_experiment(config: GameConfig, players=None) -> TwoPlayerTrace:
    """Round loop: draw both actions, realize states, record, train.

    Deterministic in the seed.  ``players`` overrides the freshly
    initialized pair (handy for frozen-net fixtures); the trace carries a
    per-player TrajectoryStats whose measures live at site "action" and
    whose values follow the maximization convention (costs negated).
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    if players is None:
        p1 = PlayerState.create(1, config, rng)
        p2 = PlayerState.create(2, config, rng)
    else:
        p1, p2 = players
    grid = config.grid()
    rows = []
    stats = {1: TrajectoryStats(), 2: TrajectoryStats()}
    nan = float("nan")

    for n in range(config.n_games):
        a1 = draw_action(p1, 1, config.c, rng, config.action_grid)
        a2 = draw_action(p2, 2, config.c, rng, config.action_grid)
        x1, x2 = env_step(a1, a2, rng)
        cost1, cost2 = realized_costs(a1, a2, x1, x2, config.c)
        p1.memory.append((a1, x1, x2, cost1))
        p2.memory.append((a2, x2, x1, cost2))
        update_networks(p1, config, rng, config.b1)
        update_networks(p2, config, rng, config.b2)

        for role, player in ((1, p1), (2, p2)):
            upsilon = behavior_snapshot(player, role, config.c, grid, rng)
            # per-scenario priors sit exactly on the scenario argmin, so the
            # grid-level regret is zero by construction
            stats[role].record(n, {"action": upsilon}, regret=0.0,
                               kappa=player.kappa_ema)
        rows.append(TraceRow(
            game=n, a1=a1, a2=a2, x1=x1, x2=x2, cost1=cost1, cost2=cost2,
            kappa1=p1.kappa_ema if p1.kappa_ema is not None else nan,
            kappa2=p2.kappa_ema if p2.kappa_ema is not None else nan,
            explore1=p1.explore_scale, explore2=p2.explore_scale))

    return TwoPlayerTrace(rows=rows, stats=stats, players=(p1, p2),
                          seed=config.seed)
