"""Core model of a game player that acts on learned estimations.

A player carries a bundle of estimated quantities: a planning horizon, a
transition kernel, a model of what everyone (itself included) will play, a
running cost and a terminal value, a prior over its own plans, and the value
it believes is attainable.  The operations here chain those pieces into path
distributions and values, derive the induced distributions over plans and
actions, and evaluate the behavioral conditions (regret, recurrence,
confidence, support) that make up the equilibrium notion, together with the
classical comparison quantities.

Values are expectations to be maximized.  Labs that minimize costs negate
before calling into this module.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

from .measures import FiniteMeasure, ScenarioSpace, resolve_metric

__all__ = [
    "Control",
    "TimeIndexedGame",
    "EstimationBundle",
    "ObservationLog",
    "AgeRecord",
    "TrajectoryStats",
    "RecurrenceReport",
    "EquilibriumValues",
    "HorizonOverflowError",
    "OpponentModelClashError",
    "MOOD_LABELS",
    "chain_distribution",
    "value_of_profile",
    "value_of_control",
    "induce_control_distribution",
    "induce_action_distribution",
    "regret_condition",
    "recurrence_check",
    "kappa",
    "mood_label",
    "kappa_condition",
    "support_condition",
    "time_consistency_residual",
    "equilibrium_condition_values",
    "lemma_continuity_probe",
]

State = Hashable
Action = Hashable
PlayerId = Hashable


class HorizonOverflowError(RuntimeError):
    """Planning horizon runs past the end of the game."""


class OpponentModelClashError(RuntimeError):
    """Opponent model assigns mass to a profile whose own slot disagrees."""


class Control:
    """A deterministic plan: an action for every (time, state) pair.

    Two controls that agree on a window of times are interchangeable for any
    value computed over that window; :meth:`truncated` produces the canonical
    representative used to quotient by that equivalence.
    """

    __slots__ = ("_decision", "_hash")

    def __init__(self, decision: Mapping[tuple[int, State], Action]):
        self._decision = dict(decision)
        self._hash = None

    def action_at(self, t: int, x: State) -> Action:
        try:
            return self._decision[(t, x)]
        except KeyError:
            raise KeyError(f"control undefined at time {t}, state {x!r}") from None

    def items(self) -> tuple:
        return tuple(self._decision.items())

    def truncated(self, t: int, horizon: int) -> "Control":
        """Restriction to decision times ``t .. t + horizon - 1``."""
        return Control({k: a for k, a in self._decision.items() if t <= k[0] < t + horizon})

    @classmethod
    def from_function(cls, game: "TimeIndexedGame", player: PlayerId,
                      fn: Callable[[int, State], Action]) -> "Control":
        """Tabulate ``fn`` over every decision point of the game, validating
        that each chosen action is available to ``player``."""
        decision = {}
        for t in range(game.horizon_bound):
            for x in game.states_at(t):
                a = fn(t, x)
                if a not in game.actions_at(t, x, player):
                    raise ValueError(f"action {a!r} unavailable at ({t}, {x!r})")
                decision[(t, x)] = a
        return cls(decision)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Control):
            return NotImplemented
        return self._decision == other._decision

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._decision.items()))
        return self._hash

    def __repr__(self) -> str:
        inside = ", ".join(f"({t}, {x!r}) -> {a!r}" for (t, x), a in sorted(
            self._decision.items(), key=lambda kv: (kv[0][0], repr(kv[0][1]))))
        return f"Control({inside})"


@dataclass(frozen=True, eq=False)
class TimeIndexedGame:
    """Finite game skeleton: states per time, actions per (time, state, player).

    ``states`` maps each time ``0 .. horizon_bound`` to a nonempty tuple of
    states; ``actions`` maps ``(t, x, player)`` to a nonempty tuple of actions
    for every decision time ``t < horizon_bound``.
    """

    horizon_bound: int
    states: Mapping[int, tuple]
    actions: Mapping[tuple, tuple]
    players: tuple

    def __post_init__(self):
        if self.horizon_bound < 0:
            raise ValueError("horizon_bound must be nonnegative")
        if not self.players:
            raise ValueError("game needs at least one player")
        for t in range(self.horizon_bound + 1):
            if not self.states.get(t):
                raise ValueError(f"no states at time {t}")
        for t in range(self.horizon_bound):
            for x in self.states[t]:
                for player in self.players:
                    if not self.actions.get((t, x, player)):
                        raise ValueError(
                            f"no actions for player {player!r} at ({t}, {x!r})")

    def states_at(self, t: int) -> tuple:
        try:
            return self.states[t]
        except KeyError:
            raise ValueError(f"no states at time {t}") from None

    def actions_at(self, t: int, x: State, player: PlayerId) -> tuple:
        try:
            return self.actions[(t, x, player)]
        except KeyError:
            raise ValueError(
                f"no actions for player {player!r} at ({t}, {x!r})") from None

    def player_slot(self, player: PlayerId) -> int:
        try:
            return self.players.index(player)
        except ValueError:
            raise ValueError(f"unknown player {player!r}") from None


@dataclass(frozen=True)
class EstimationBundle:
    """Everything a single player has estimated about the game.

    Fields are callables so that bundles can wrap tables, closed forms or
    live network ensembles alike:

    - ``horizon(t, x)``: planning depth from (t, x)
    - ``transition(t, x, joint_action)``: probability over next states
    - ``opponent_model(t, own_control)``: probability over joint control
      profiles, consistently carrying ``own_control`` in the owner's slot
    - ``transition_cost(scenario, t, x, joint_action)``: running reward
    - ``state_value(scenario, t, x)``: terminal reward at the horizon
    - ``policy_prior(scenario, t, x)``: probability over own controls
    - ``best_expectation(t, x)``: the value the player aims for
    """

    player: PlayerId
    horizon: Callable[[int, State], int]
    transition: Callable[[int, State, tuple], FiniteMeasure]
    opponent_model: Callable[[int, Control], FiniteMeasure]
    transition_cost: Callable[[Any, int, State, tuple], float]
    state_value: Callable[[Any, int, State], float]
    policy_prior: Callable[[Any, int, State], FiniteMeasure]
    best_expectation: Callable[[int, State], float]


class ObservationLog:
    """Append-only record of what a player has seen; age is the count."""

    __slots__ = ("_events",)

    def __init__(self, events: Iterable = ()):
        self._events = list(events)

    @property
    def events(self) -> tuple:
        return tuple(self._events)

    @property
    def age(self) -> int:
        return len(self._events)

    def record(self, event) -> int:
        self._events.append(event)
        return len(self._events)

    def observed(self, age: int | None = None) -> tuple:
        """Prefix of events up to ``age`` (everything seen by that age)."""
        if age is None:
            return tuple(self._events)
        if age < 0 or age > len(self._events):
            raise ValueError(f"age {age} outside recorded range")
        return tuple(self._events[:age])


@dataclass
class AgeRecord:
    """Snapshot of a player's induced behavior at one age."""

    age: int
    upsilons: Mapping[Any, FiniteMeasure]
    regret: float | None = None
    kappa: float | None = None


class TrajectoryStats:
    """Per-age snapshots collected along a run, in strictly increasing age."""

    __slots__ = ("per_age",)

    def __init__(self, records: Iterable[AgeRecord] = ()):
        self.per_age: list[AgeRecord] = []
        for rec in records:
            self.append(rec)

    def append(self, record: AgeRecord) -> None:
        if self.per_age and record.age <= self.per_age[-1].age:
            raise ValueError(
                f"ages must increase: {record.age} after {self.per_age[-1].age}")
        self.per_age.append(record)

    def record(self, age: int, upsilons: Mapping[Any, FiniteMeasure],
               regret: float | None = None, kappa: float | None = None) -> None:
        self.append(AgeRecord(age, dict(upsilons), regret, kappa))

    def ages(self) -> list[int]:
        return [rec.age for rec in self.per_age]

    def sites(self) -> tuple:
        seen: dict[Any, None] = {}
        for rec in self.per_age:
            for site in rec.upsilons:
                seen.setdefault(site)
        return tuple(seen)

    def __len__(self) -> int:
        return len(self.per_age)


@dataclass(frozen=True)
class RecurrenceReport:
    """Result of a recurrence check against a reference distribution."""

    min_distance_tail: float
    hit_ages: tuple
    distances: tuple


@dataclass(frozen=True)
class EquilibriumValues:
    """The four deviation benchmarks, distinguished by where the sup sits."""

    nash_type: float
    correlated: float
    uncertain: float
    coarse_correlated: float


# -- value computations -------------------------------------------------


def chain_distribution(game: TimeIndexedGame, bundle: EstimationBundle,
                       t: int, x: State, profile: Sequence[Control],
                       steps: int | None = None) -> FiniteMeasure:
    """Distribution over state paths from (t, x) under a joint profile.

    Chains the bundle's one-step kernels for ``horizon(t, x)`` steps (or
    ``steps`` when given, used by the time-consistency probe).  Paths are
    tuples ``(x_t, ..., x_{t+T})`` and the result is an exact enumeration.
    """
    if x not in game.states_at(t):
        raise ValueError(f"state {x!r} not available at time {t}")
    if len(profile) != len(game.players):
        raise ValueError("profile length does not match player count")
    depth = bundle.horizon(t, x) if steps is None else steps
    if depth < 0:
        raise ValueError("horizon must be nonnegative")
    if t + depth > game.horizon_bound:
        raise HorizonOverflowError("horizon overflow")
    paths: dict[tuple, float] = {(x,): 1.0}
    for s in range(t, t + depth):
        allowed = set(game.states_at(s + 1))
        nxt: dict[tuple, float] = {}
        for path, w in paths.items():
            y = path[-1]
            joint = tuple(ctrl.action_at(s, y) for ctrl in profile)
            kernel = bundle.transition(s, y, joint)
            kernel.require_probability("transition kernel")
            for z, pw in kernel:
                if z not in allowed:
                    raise ValueError(
                        f"kernel puts mass on {z!r}, not a state at time {s + 1}")
                ext = path + (z,)
                nxt[ext] = nxt.get(ext, 0.0) + w * pw
        paths = nxt
    return FiniteMeasure(paths.items())


def value_of_profile(game: TimeIndexedGame, bundle: EstimationBundle, scenario,
                     t: int, x: State, profile: Sequence[Control],
                     steps: int | None = None) -> float:
    """Expected running reward plus terminal value under a joint profile."""
    depth = bundle.horizon(t, x) if steps is None else steps
    paths = chain_distribution(game, bundle, t, x, profile, steps=depth)
    total = 0.0
    for path, w in paths:
        value = bundle.state_value(scenario, t + depth, path[-1])
        for offset in range(depth):
            s = t + offset
            y = path[offset]
            joint = tuple(ctrl.action_at(s, y) for ctrl in profile)
            value += bundle.transition_cost(scenario, s, y, joint)
        total += w * value
    return total


def value_of_control(game: TimeIndexedGame, bundle: EstimationBundle, scenario,
                     t: int, x: State, own_control: Control,
                     steps: int | None = None) -> float:
    """Value of one own plan, averaging profiles under the opponent model."""
    model = bundle.opponent_model(t, own_control)
    model.require_probability("opponent model")
    slot = game.player_slot(bundle.player)
    window = bundle.horizon(t, x)
    own_key = own_control.truncated(t, window)
    total = 0.0
    for prof, w in model:
        if prof[slot].truncated(t, window) != own_key:
            raise OpponentModelClashError("opponent model clash")
        total += w * value_of_profile(game, bundle, scenario, t, x, prof, steps=steps)
    return total


# -- induced distributions ----------------------------------------------


def induce_control_distribution(bundle: EstimationBundle, scenarios: ScenarioSpace,
                                t: int, x: State) -> FiniteMeasure:
    """Scenario-average of the policy priors, as a distribution over plans.

    Plans are identified when they agree on the planning window, so atoms are
    the truncated representatives.
    """
    window = bundle.horizon(t, x)
    parts = []
    for scenario, sw in scenarios:
        prior = bundle.policy_prior(scenario, t, x)
        prior.require_probability("policy prior")
        parts.append((sw, prior.pushforward(lambda c: c.truncated(t, window))))
    return FiniteMeasure.mixture(parts)


def induce_action_distribution(game: TimeIndexedGame, upsilon: FiniteMeasure,
                               t: int, x: State) -> FiniteMeasure:
    """Distribution over immediate actions at (t, x) induced by a plan
    distribution, i.e. the image under evaluation at (t, x)."""
    if x not in game.states_at(t):
        raise ValueError(f"state {x!r} not available at time {t}")
    upsilon.require_probability("control distribution")
    return upsilon.pushforward(lambda c: c.action_at(t, x))


# -- behavioral conditions ----------------------------------------------


def regret_condition(game: TimeIndexedGame, bundle: EstimationBundle,
                     scenarios: ScenarioSpace, t: int, x: State,
                     control_grid: Sequence[Control]) -> float:
    """Expected shortfall of the policy prior against the best plan.

    For each scenario, the best value over ``control_grid`` is compared with
    the value of each prior atom; the gaps are averaged under the prior and
    then under the scenario weights.  ``control_grid`` must cover the plans
    worth deviating to (up to window equivalence).
    """
    grid = list(control_grid)
    if not grid:
        raise ValueError("empty control grid")
    window = bundle.horizon(t, x)
    total = 0.0
    for scenario, sw in scenarios:
        cache: dict[Control, float] = {}

        def value(ctrl, _scenario=scenario, _cache=cache):
            key = ctrl.truncated(t, window)
            if key not in _cache:
                _cache[key] = value_of_control(game, bundle, _scenario, t, x, ctrl)
            return _cache[key]

        best = max(value(ctrl) for ctrl in grid)
        prior = bundle.policy_prior(scenario, t, x)
        prior.require_probability("policy prior")
        total += sw * sum(w * (best - value(ctrl)) for ctrl, w in prior)
    return total


def recurrence_check(stats: TrajectoryStats, prior_dist: FiniteMeasure,
                     metric: str, window: int, r: float = 0.0,
                     site: Any = None) -> RecurrenceReport:
    """Distances from a reference distribution along a trajectory.

    Reports the minimum distance over the trailing ``window`` ages (the
    surrogate for eventual return) and every age at which the distance is
    within ``r``.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if len(stats.per_age) < window:
        raise ValueError(
            f"window {window} exceeds the {len(stats.per_age)} recorded ages")
    if site is None:
        sites = stats.sites()
        if len(sites) != 1:
            raise ValueError(f"site must be named, stats track {len(sites)} sites")
        site = sites[0]
    dist = resolve_metric(metric)
    distances = []
    for rec in stats.per_age:
        if site not in rec.upsilons:
            raise ValueError(f"age {rec.age} has no distribution for site {site!r}")
        distances.append((rec.age, dist(prior_dist, rec.upsilons[site])))
    tail = distances[-window:]
    return RecurrenceReport(
        min_distance_tail=min(d for _, d in tail),
        hit_ages=tuple(age for age, d in distances if d <= r),
        distances=tuple(distances),
    )


def kappa(game: TimeIndexedGame, bundle: EstimationBundle,
          scenarios: ScenarioSpace, t: int, x: State) -> float:
    """Confidence index: scenario mass on which the prior's mean value
    strictly exceeds the aimed-for value."""
    aim = bundle.best_expectation(t, x)
    total = 0.0
    for scenario, sw in scenarios:
        prior = bundle.policy_prior(scenario, t, x)
        prior.require_probability("policy prior")
        mean_value = sum(
            w * value_of_control(game, bundle, scenario, t, x, ctrl)
            for ctrl, w in prior)
        if mean_value > aim:
            total += sw
    return total


MOOD_LABELS = (
    "Desperate",
    "Discouraged",
    "Doubtful",
    "Cautious",
    "Hopeful",
    "Determined",
    "Confident",
    "Optimistic",
    "Euphoric",
)


def mood_label(kappa_value: float) -> str:
    """Label for a confidence value, nine equal bins on [0, 1]."""
    k = float(kappa_value)
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"kappa {k!r} outside [0, 1]")
    return MOOD_LABELS[min(int(k * len(MOOD_LABELS)), len(MOOD_LABELS) - 1)]


def kappa_condition(stats: TrajectoryStats, threshold: float) -> bool:
    """True when the recorded confidence stays strictly above ``threshold``
    at every age."""
    if not stats.per_age:
        raise ValueError("no recorded ages")
    for rec in stats.per_age:
        if rec.kappa is None:
            raise ValueError(f"age {rec.age} has no kappa recorded")
        if not rec.kappa > threshold:
            return False
    return True


def support_condition(game: TimeIndexedGame,
                      bundles: Mapping[PlayerId, EstimationBundle],
                      upsilons: Mapping[PlayerId, FiniteMeasure],
                      t: int, x: State) -> bool:
    """True when every opponent model is supported inside the product of the
    players' induced plan distributions (the sharpened condition that brings
    the equilibrium back to a Nash-type one)."""
    windows = {}
    for player in game.players:
        if player not in bundles or player not in upsilons:
            raise ValueError(f"missing bundle or distribution for {player!r}")
        upsilons[player].require_probability("induced control distribution")
        windows[player] = bundles[player].horizon(t, x)
    canonical = {
        player: tuple(dict.fromkeys(
            ctrl.truncated(t, windows[player]) for ctrl in upsilons[player].support))
        for player in game.players
    }
    product = set(itertools.product(*(canonical[p] for p in game.players)))
    for player in game.players:
        for ctrl in upsilons[player].support:
            model = bundles[player].opponent_model(t, ctrl)
            for prof in model.support:
                key = tuple(
                    prof[slot].truncated(t, windows[other])
                    for slot, other in enumerate(game.players))
                if key not in product:
                    return False
    return True


def time_consistency_residual(game: TimeIndexedGame, bundle: EstimationBundle,
                              scenarios: ScenarioSpace, t: int, x: State,
                              horizon_cut: int) -> float:
    """Worst scenario gap between the value truncated at ``horizon_cut`` and
    the full-horizon value, both averaged under the policy prior.  Zero when
    the terminal value correctly summarizes the remaining play."""
    window = bundle.horizon(t, x)
    if not t <= horizon_cut <= t + window:
        raise ValueError(
            f"horizon cut {horizon_cut} outside [{t}, {t + window}]")
    worst = 0.0
    for scenario, _ in scenarios:
        prior = bundle.policy_prior(scenario, t, x)
        prior.require_probability("policy prior")
        full = sum(
            w * value_of_control(game, bundle, scenario, t, x, ctrl)
            for ctrl, w in prior)
        cut = sum(
            w * value_of_control(game, bundle, scenario, t, x, ctrl,
                                 steps=horizon_cut - t)
            for ctrl, w in prior)
        worst = max(worst, abs(cut - full))
    return worst


# -- comparison block ----------------------------------------------------


def equilibrium_condition_values(payoff: Callable[[tuple], float],
                                 rho: FiniteMeasure, player_slot: int,
                                 deviations: Sequence | None = None,
                                 scenarios: ScenarioSpace | None = None,
                                 scenario_payoff: Callable[[Any, tuple], float] | None = None,
                                 ) -> EquilibriumValues:
    """Evaluate the four deviation benchmarks for one player on a finite
    distribution over joint profiles.

    The benchmarks differ only in where the supremum over the player's
    deviation sits relative to the conditional and marginal integrals:
    innermost (Nash-type), inside the marginal (correlated), inside the
    scenario average with the conditional taken at the deviation (uncertain),
    or outside everything (coarse correlated).

    ``deviations`` defaults to the support of the player's marginal; for the
    uncertain benchmark deviations are restricted to that support, where the
    conditional is defined.
    """
    rho.require_probability("joint control distribution")
    profiles = rho.atoms
    sizes = {len(p) for p, _ in profiles}
    if len(sizes) != 1:
        raise ValueError("profiles must share one length")
    n = sizes.pop()
    if not 0 <= player_slot < n:
        raise ValueError(f"player slot {player_slot} outside 0..{n - 1}")

    marginal = rho.pushforward(lambda p: p[player_slot])
    conditionals = {}
    for own in marginal.support:
        conditionals[own] = FiniteMeasure(
            (p, w) for p, w in profiles if p[player_slot] == own).normalized()

    candidates = tuple(deviations) if deviations is not None else marginal.support
    if not candidates:
        raise ValueError("no deviation candidates")

    def replaced(prof: tuple, alt) -> tuple:
        return prof[:player_slot] + (alt,) + prof[player_slot + 1:]

    nash = sum(
        w * max(payoff(replaced(prof, alt)) for alt in candidates)
        for prof, w in profiles)

    correlated = sum(
        mw * max(
            sum(cw * payoff(replaced(prof, alt))
                for prof, cw in conditionals[own])
            for alt in candidates)
        for own, mw in marginal)

    coarse = max(
        sum(w * payoff(replaced(prof, alt)) for prof, w in profiles)
        for alt in candidates)

    if scenarios is None:
        scenarios = ScenarioSpace.single(None)
    if scenario_payoff is None:
        scenario_payoff = lambda _scenario, prof: payoff(prof)
    supported = [alt for alt in candidates if marginal.weight(alt) > 0.0]
    if not supported:
        raise ValueError("no deviation candidate carries marginal mass")
    uncertain = sum(
        sw * max(
            sum(cw * scenario_payoff(scenario, prof)
                for prof, cw in conditionals[alt])
            for alt in supported)
        for scenario, sw in scenarios)

    return EquilibriumValues(
        nash_type=float(nash),
        correlated=float(correlated),
        uncertain=float(uncertain),
        coarse_correlated=float(coarse),
    )


def lemma_continuity_probe(estimation_sequence: Sequence,
                           behavior_map: Callable[[Any], FiniteMeasure],
                           limit_point, metric: str = "total-variation",
                           tol: float = 1e-6) -> bool:
    """Check that behavior at the end of an estimation sequence has come
    within ``tol`` of behavior at the limit (continuity of the behavior map
    along converging estimations)."""
    seq = list(estimation_sequence)
    if not seq:
        raise ValueError("empty estimation sequence")
    dist = resolve_metric(metric)
    return dist(behavior_map(limit_point), behavior_map(seq[-1])) <= tol
