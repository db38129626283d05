"""Mean-field lab: a continuum population learning a one-step game.

The population is summarized by an estimate over profile points, a profile
point being a start distribution over states together with a distribution
over (constant-action) controls.  Naive learning mixes a Dirac at the
current best response into the estimate at rate ``c``; the fictitious
variant averages the profile points first and evaluates the cost once on
the blended population.

Two cost rules ship with the lab.  The first is a quadratic interaction
with known closed form and a relaxed (mixed) equilibrium at the half-half
population; the second is a crowd-avoidance cost with no relaxed
equilibrium at all.  Both make the best response an endpoint of [0, 1], so
the induced population mean follows a scalar recursion exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .framework import AgeRecord, TrajectoryStats
from .measures import FiniteMeasure

__all__ = [
    "OneStepGame",
    "ProfilePoint",
    "PopulationEstimate",
    "MeanFieldTrace",
    "population_flow",
    "player_flow",
    "mf_cost",
    "best_response",
    "learning_step",
    "fictitious_cost",
    "run_mean_field",
    "relaxed_equilibrium_check",
]

TRANSITION_RULES = ("bernoulli", "dirac-at-action")
COST_RULES = ("example-1", "example-2", "quadratic")

# coefficient order for quadratic costs: m^2, m*a, a^2, a, m, const
EXAMPLE_1_COEFFS = (2.0, -4.0, 1.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class OneStepGame:
    """One-step population game: a transition rule plus a cost rule.

    ``transition`` is ``"bernoulli"`` (action = chance of landing in state 1
    of a binary state space) or ``"dirac-at-action"`` (the action taken is
    the state reached).  ``cost_rule`` is ``"example-1"``, ``"example-2"``
    or ``"quadratic"`` with explicit coefficients over the next-period
    population mean m and the own action a.
    """

    transition: str
    cost_rule: str
    quad_coeffs: tuple = EXAMPLE_1_COEFFS
    action_grid: int = 101

    def __post_init__(self):
        if self.transition not in TRANSITION_RULES:
            raise ValueError(f"unknown transition rule {self.transition!r}")
        if self.cost_rule not in COST_RULES:
            raise ValueError(f"unknown cost rule {self.cost_rule!r}")
        if len(self.quad_coeffs) != 6:
            raise ValueError("quadratic costs need 6 coefficients")
        if self.action_grid < 2:
            raise ValueError("action grid needs at least 2 points")

    @classmethod
    def example_1(cls) -> "OneStepGame":
        """Binary states, quadratic interaction cost with endpoint optima."""
        return cls(transition="bernoulli", cost_rule="example-1")

    @classmethod
    def example_2(cls) -> "OneStepGame":
        """Interval states, crowd-avoidance cost, no relaxed equilibrium."""
        return cls(transition="dirac-at-action", cost_rule="example-2")

    @classmethod
    def quadratic(cls, coeffs: Iterable[float],
                  transition: str = "bernoulli") -> "OneStepGame":
        return cls(transition=transition, cost_rule="quadratic",
                   quad_coeffs=tuple(float(c) for c in coeffs))

    def kernel(self, action: float) -> FiniteMeasure:
        """Next-state distribution for one agent playing ``action``."""
        a = float(action)
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"action {a!r} outside [0, 1]")
        if self.transition == "bernoulli":
            return FiniteMeasure({0: 1.0 - a, 1: a})
        return FiniteMeasure.dirac(a)


@dataclass(frozen=True)
class ProfilePoint:
    """One candidate population profile: start states and control mix."""

    mu: FiniteMeasure
    controls: FiniteMeasure

    def __post_init__(self):
        self.mu.require_probability("profile start distribution")
        self.controls.require_probability("profile control distribution")


class PopulationEstimate:
    """Finitely supported estimate over profile points.

    All profile points must share the same start distribution (the player
    knows where the population starts, not what it will do).  The estimate
    is homogeneous when every point commits the whole population to a
    single control.
    """

    __slots__ = ("gamma",)

    def __init__(self, gamma: FiniteMeasure):
        gamma.require_probability("population estimate")
        mus = {point.mu for point, _ in gamma}
        if len(mus) != 1:
            raise ValueError("profile points disagree on the start distribution")
        self.gamma = gamma

    @classmethod
    def homogeneous(cls, mu: FiniteMeasure, action: float) -> "PopulationEstimate":
        return cls(FiniteMeasure.dirac(
            ProfilePoint(mu, FiniteMeasure.dirac(float(action)))))

    @property
    def mu(self) -> FiniteMeasure:
        return self.gamma.support[0].mu

    @property
    def homogeneous_flag(self) -> bool:
        return all(len(point.controls) == 1 for point, _ in self.gamma)

    def population_mean(self) -> float:
        """Estimate-averaged mean action of the population."""
        return self.gamma.expect(lambda point: point.controls.mean())

    def blended_point(self) -> ProfilePoint:
        """Single profile point averaging the control mixes by weight."""
        controls = FiniteMeasure.mixture(
            (w, point.controls) for point, w in self.gamma)
        return ProfilePoint(self.mu, controls)


@dataclass
class MeanFieldTrace:
    """Result of a learning run: per-iteration rows plus behavior stats."""

    rows: list
    stats: TrajectoryStats
    final_gamma: PopulationEstimate
    seed: int


# -- flows ----------------------------------------------------------------


def population_flow(game: OneStepGame, xi: ProfilePoint,
                    steps: int = 1) -> list[tuple[FiniteMeasure, FiniteMeasure]]:
    """Evolve a population profile forward.

    Returns ``[(Xi_0, mu_0), ..., (Xi_steps, mu_steps)]`` where each Xi_s is
    a joint distribution over (state, control) pairs and mu_s is its state
    marginal.  Controls are constant actions, so the kernel at every step is
    the one attached to the control's action.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    joint = FiniteMeasure(
        ((x, a), wx * wa)
        for x, wx in xi.mu
        for a, wa in xi.controls)
    out = [(joint, joint.pushforward(lambda p: p[0]))]
    for _ in range(steps):
        pairs = []
        for (x, a), w in joint:
            for y, pw in game.kernel(a):
                pairs.append(((y, a), w * pw))
        joint = FiniteMeasure(pairs)
        out.append((joint, joint.pushforward(lambda p: p[0])))
    return out


def player_flow(game: OneStepGame, xi: ProfilePoint, x,
                action: float) -> FiniteMeasure:
    """Next-state distribution of one tagged agent playing ``action``.

    The shipped kernels do not read the current state or the population, so
    this is the kernel at the action; the arguments keep the general shape.
    """
    del xi, x
    return game.kernel(action)


def _population_mean_stat(game: OneStepGame, mu1: FiniteMeasure) -> float:
    # both cost rules summarize the next population by the mean of mu_1,
    # which for binary states is the weight on state 1
    return mu1.mean()


def _inner_cost(game: OneStepGame, xi: ProfilePoint, x, action: float) -> float:
    """Cost of playing ``action`` against one fully specified profile."""
    _, mu1 = population_flow(game, xi, steps=1)[1]
    m = _population_mean_stat(game, mu1)
    own = player_flow(game, xi, x, action)
    if game.cost_rule == "example-2":
        side = 1.0 if m <= 0.5 else -1.0
        return side * own.mean()
    q_mm, q_ma, q_aa, q_a, q_m, q_c = (
        EXAMPLE_1_COEFFS if game.cost_rule == "example-1" else game.quad_coeffs)
    # terminal part is linear in the own next state for both quadratic rules
    a = float(action)
    own_mean = own.mean()
    return (q_mm * m * m + q_ma * m * own_mean
            + q_aa * a * a + q_a * a + q_m * m + q_c)


def mf_cost(game: OneStepGame, gamma: PopulationEstimate, x,
            action: float) -> float:
    """Expected cost of ``action`` under the population estimate: the inner
    profile cost averaged over the estimate's profile points."""
    return gamma.gamma.expect(
        lambda point: _inner_cost(game, point, x, action))


def fictitious_cost(game: OneStepGame, gamma: PopulationEstimate, x,
                    action: float) -> float:
    """Cost of ``action`` against the estimate-blended population: the
    profile points are averaged first, the cost is evaluated once."""
    return _inner_cost(game, gamma.blended_point(), x, action)


# -- learning --------------------------------------------------------------


def best_response(game: OneStepGame, gamma: PopulationEstimate,
                  rng=None) -> float:
    """Maximizer of :func:`mf_cost` over actions.

    The shipped cost rules are convex in the action, so the endpoints of
    [0, 1] suffice; a concave quadratic falls back to the evaluation grid.
    Exact ties are broken by a fair coin from ``rng``.
    """
    coeffs = EXAMPLE_1_COEFFS if game.cost_rule == "example-1" else game.quad_coeffs
    if game.cost_rule != "example-2" and coeffs[2] < 0.0:
        candidates = np.linspace(0.0, 1.0, game.action_grid)
    else:
        candidates = (0.0, 1.0)
    values = [mf_cost(game, gamma, 0, a) for a in candidates]
    best = max(values)
    argbest = [float(a) for a, v in zip(candidates, values) if v == best]
    if len(argbest) == 1:
        return argbest[0]
    if rng is None:
        rng = np.random.default_rng(0)
    return argbest[int(rng.integers(len(argbest)))]


def learning_step(gamma: PopulationEstimate, best: float, c: float,
                  prune_tol: float = 1e-12) -> PopulationEstimate:
    """Mix a Dirac at the new best response into the estimate at rate ``c``.

    Atoms lighter than ``prune_tol`` are dropped and the mass renormalized,
    which keeps the support from growing without bound.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"learning rate {c!r} outside [0, 1]")
    fresh = ProfilePoint(gamma.mu, FiniteMeasure.dirac(float(best)))
    mixed = FiniteMeasure.mixture(
        ((c, FiniteMeasure.dirac(fresh)), (1.0 - c, gamma.gamma)))
    return PopulationEstimate(mixed.prune(prune_tol, renormalize=True))


def run_mean_field(game: OneStepGame, a0: float, c: float, n_iters: int,
                   seed: int = 0, mu0: FiniteMeasure | None = None,
                   prune_tol: float = 1e-15) -> MeanFieldTrace:
    """Iterate best response and estimate mixing from a homogeneous start.

    Each row is ``(iteration, population mean, best response, gamma atoms)``
    with atoms as (action, weight) pairs.  The default prune tolerance is
    tighter than the learning_step default so the recorded population mean
    tracks the exact scalar recursion to well below 1e-12; renormalizing
    after a 1e-12 prune would drift the mean by a few 1e-12 per step.

    The shipped cost rules ignore the start distribution, so ``mu0``
    defaults to a Dirac at state 0.
    """
    if n_iters < 1:
        raise ValueError("need at least one iteration")
    rng = np.random.default_rng(seed)
    if mu0 is None:
        mu0 = FiniteMeasure.dirac(0)
    gamma = PopulationEstimate.homogeneous(mu0, a0)
    rows = []
    stats = TrajectoryStats()
    for n in range(n_iters):
        m = gamma.population_mean()
        b = best_response(game, gamma, rng=rng)
        atoms = tuple(
            (point.controls.mean(), w) for point, w in gamma.gamma)
        rows.append((n, m, b, atoms))
        # endpoint optimization is exact, so the realized regret is zero
        stats.record(
            n, {"mf": FiniteMeasure.dirac(b)}, regret=0.0, kappa=None)
        gamma = learning_step(gamma, b, c, prune_tol=prune_tol)
    return MeanFieldTrace(rows=rows, stats=stats, final_gamma=gamma, seed=seed)


def relaxed_equilibrium_check(game: OneStepGame, xi0: FiniteMeasure,
                              tol: float = 1e-12) -> bool:
    """True when every control in the candidate population is optimal
    against the population itself (the fixed-point property of a relaxed
    equilibrium), within ``tol``."""
    xi0.require_probability("candidate control distribution")
    point = ProfilePoint(FiniteMeasure.dirac(0), xi0)
    grid = np.linspace(0.0, 1.0, game.action_grid)
    candidates = sorted(set(float(a) for a in grid) | set(
        float(a) for a in xi0.support))
    best = max(_inner_cost(game, point, 0, a) for a in candidates)
    return all(
        _inner_cost(game, point, 0, float(a)) >= best - tol
        for a in xi0.support)
