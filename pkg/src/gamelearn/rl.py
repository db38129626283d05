"""Reinforcement-learning lab: tabular fixed points, a cart-pole planner
driven by a value-network ensemble, and two readings of a bandit.

The tabular part solves the action-value fixed point under an arbitrary
stochastic continuation policy and recovers the standard Bellman equation
when that policy is greedy.  The cart-pole part plans over all action
sequences of a fixed depth by rolling the true dynamics forward and scoring
the reached states with an ensemble of small value networks; training maps
visited states to episode performance with a time-consistency penalty.
The bandit part contrasts the state perspective (arms as coordinates of an
estimated reward vector) with the action perspective (arms as constant
players) and shows they induce the same arm distribution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .framework import TrajectoryStats
from .measures import FiniteMeasure
from .smallnet import DropoutSample, Net

__all__ = [
    "TabularMDP",
    "random_mdp",
    "q_table",
    "q_value",
    "bellman_check",
    "optimal_values",
    "greedy_policy",
    "CartPoleState",
    "cartpole_step",
    "enumerate_controls",
    "ValueEnsemble",
    "rollout_tree",
    "policy_distribution",
    "EpisodeRecord",
    "train_value_ensemble",
    "CartPoleConfig",
    "CartPoleRunResult",
    "run_cartpole",
    "BanditSpec",
    "bandit_state_policy",
    "bandit_action_policy",
    "arm_induced_distributions",
    "product_reward_model",
]


# -- tabular fixed points --------------------------------------------------


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite MDP: kernel (S, A, S), rewards (S, A), discount in [0, 1)."""

    kernel: np.ndarray
    rewards: np.ndarray
    discount: float

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        rewards = np.asarray(self.rewards, dtype=float)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "rewards", rewards)
        if kernel.ndim != 3 or kernel.shape[0] != kernel.shape[2]:
            raise ValueError(f"kernel shape {kernel.shape} is not (S, A, S)")
        if rewards.shape != kernel.shape[:2]:
            raise ValueError("rewards shape does not match kernel")
        if np.any(kernel < 0.0):
            raise ValueError("kernel has negative entries")
        sums = kernel.sum(axis=2)
        if np.max(np.abs(sums - 1.0)) > 1e-12:
            raise ValueError("kernel rows must sum to one")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(
                f"spectral failure: discount {self.discount!r} must lie in "
                "[0, 1) for the fixed point to contract")

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]


def random_mdp(n_states: int, n_actions: int, discount: float, rng) -> TabularMDP:
    """Random dense MDP with uniform(0, 1) rewards."""
    raw = rng.random((n_states, n_actions, n_states)) + 1e-3
    kernel = raw / raw.sum(axis=2, keepdims=True)
    rewards = rng.random((n_states, n_actions))
    return TabularMDP(kernel, rewards, discount)


def _policy_matrix(mdp: TabularMDP, policy) -> np.ndarray:
    s, a = mdp.n_states, mdp.n_actions
    if len(policy) != s:
        raise ValueError("policy must give a distribution for every state")
    g = np.zeros((s, s * a))
    for y, dist in enumerate(policy):
        dist.require_probability(f"policy at state {y}")
        for action, w in dist:
            if not 0 <= action < a:
                raise ValueError(f"policy at state {y} uses unknown action {action!r}")
            g[y, y * a + action] = w
    return g


def q_table(mdp: TabularMDP, policy) -> np.ndarray:
    """Action values under a continuation policy, by direct linear solve.

    Solves ``Q = F + discount * P @ (policy-average of Q)`` exactly; the
    policy is a sequence of distributions over action indices, one per state.
    """
    s, a = mdp.n_states, mdp.n_actions
    g = _policy_matrix(mdp, policy)
    p_flat = mdp.kernel.reshape(s * a, s)
    system = np.eye(s * a) - mdp.discount * (p_flat @ g)
    q = np.linalg.solve(system, mdp.rewards.reshape(s * a))
    return q.reshape(s, a)


def q_value(mdp: TabularMDP, policy, x: int, a: int) -> float:
    return float(q_table(mdp, policy)[x, a])


def bellman_check(mdp: TabularMDP, values) -> float:
    """Max-norm residual of the standard optimality equation at ``values``."""
    v = np.asarray(values, dtype=float)
    if v.shape != (mdp.n_states,):
        raise ValueError("values must give one number per state")
    backed = np.max(mdp.rewards + mdp.discount * (mdp.kernel @ v), axis=1)
    return float(np.max(np.abs(v - backed)))


def optimal_values(mdp: TabularMDP) -> np.ndarray:
    """Optimal state values via policy iteration (exact policy evaluation,
    greedy improvement), which terminates finitely."""
    s = mdp.n_states
    actions = np.argmax(mdp.rewards, axis=1)
    while True:
        p_pi = mdp.kernel[np.arange(s), actions]
        f_pi = mdp.rewards[np.arange(s), actions]
        v = np.linalg.solve(np.eye(s) - mdp.discount * p_pi, f_pi)
        q = mdp.rewards + mdp.discount * (mdp.kernel @ v)
        improved = np.argmax(q, axis=1)
        if np.array_equal(improved, actions):
            return v
        actions = improved


def greedy_policy(mdp: TabularMDP, values) -> list:
    """Dirac policy on the greedy action at each state (lowest index wins)."""
    v = np.asarray(values, dtype=float)
    q = mdp.rewards + mdp.discount * (mdp.kernel @ v)
    return [FiniteMeasure.dirac(int(a)) for a in np.argmax(q, axis=1)]


# -- cart-pole dynamics ----------------------------------------------------

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
POLE_HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * POLE_HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
X_THRESHOLD = 2.4
THETA_THRESHOLD = 12.0 * math.pi / 180.0


@dataclass(frozen=True)
class CartPoleState:
    position: float
    velocity: float
    angle: float
    angular_velocity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.position, self.velocity,
                         self.angle, self.angular_velocity])

    @classmethod
    def from_array(cls, arr) -> "CartPoleState":
        p, v, th, om = (float(u) for u in arr)
        return cls(p, v, th, om)

    @property
    def terminal(self) -> bool:
        return abs(self.position) > X_THRESHOLD or abs(self.angle) > THETA_THRESHOLD


def _step_batch(states: np.ndarray, actions) -> np.ndarray:
    """Euler step of the standard cart-pole dynamics on (n, 4) states."""
    x, v, th, om = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    force = FORCE_MAG * (2.0 * np.asarray(actions, dtype=float) - 1.0)
    sin, cos = np.sin(th), np.cos(th)
    temp = (force + POLE_MASS_LENGTH * om * om * sin) / TOTAL_MASS
    alpha = (GRAVITY * sin - cos * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS))
    acc = temp - POLE_MASS_LENGTH * alpha * cos / TOTAL_MASS
    out = np.empty_like(states)
    out[:, 0] = x + TAU * v
    out[:, 1] = v + TAU * acc
    out[:, 2] = th + TAU * om
    out[:, 3] = om + TAU * alpha
    return out


def _terminal_mask(states: np.ndarray) -> np.ndarray:
    return (np.abs(states[:, 0]) > X_THRESHOLD) | \
        (np.abs(states[:, 2]) > THETA_THRESHOLD)


def cartpole_step(state: CartPoleState, action: int):
    """One step of the true dynamics.

    Returns ``(next_state, reward, terminal)`` with reward 1 for every step
    that leaves the pole within bounds.  Stepping a terminal state is an
    error.
    """
    if action not in (0, 1):
        raise ValueError(f"action {action!r} must be 0 or 1")
    if state.terminal:
        raise ValueError("cannot step a terminal state")
    nxt = CartPoleState.from_array(
        _step_batch(state.as_array()[None, :], action)[0])
    terminal = nxt.terminal
    return nxt, (0.0 if terminal else 1.0), terminal


def enumerate_controls(t_horizon: int) -> list:
    """All binary action sequences of the given depth, in lexicographic
    order with the first action as the most significant bit."""
    if t_horizon < 1:
        raise ValueError("horizon must be positive")
    if t_horizon > 16:
        raise ValueError(f"horizon {t_horizon} too deep to enumerate")
    return [
        tuple((k >> (t_horizon - 1 - j)) & 1 for j in range(t_horizon))
        for k in range(2 ** t_horizon)]


def rollout_tree(x0, t_horizon: int):
    """Deterministic rollout of every action sequence from one state.

    Returns ``(states, alive)``: the state reached by each of the 2**T
    sequences (row k matches :func:`enumerate_controls` index k) and whether
    the pole stayed within bounds the whole way.
    """
    states = np.asarray(x0, dtype=float).reshape(1, 4)
    alive = ~_terminal_mask(states)
    for _ in range(t_horizon):
        n = states.shape[0]
        doubled = np.repeat(states, 2, axis=0)
        acts = np.tile(np.array([0.0, 1.0]), n)
        nxt = _step_batch(doubled, acts)
        alive = np.repeat(alive, 2) & ~_terminal_mask(nxt)
        states = nxt
    return states, alive


# -- the value-ensemble planner --------------------------------------------


@dataclass
class ValueEnsemble:
    """Ensemble of state-value networks scoring states in [0, 100]."""

    nets: list
    t_horizon: int = 8

    @classmethod
    def create(cls, k_phi: int, rng, t_horizon: int = 8,
               layer_dims=(4, 32, 32, 1), dropout_rate: float = 0.1,
               ) -> "ValueEnsemble":
        if k_phi < 1:
            raise ValueError("need at least one value net")
        nets = [
            Net.init(layer_dims, rng, output_transform="affine",
                     out_lo=0.0, out_hi=100.0, dropout_rate=dropout_rate)
            for _ in range(k_phi)]
        return cls(nets=nets, t_horizon=t_horizon)

    @property
    def k_phi(self) -> int:
        return len(self.nets)

    def draw_scenario(self, rng):
        """One estimation scenario: a net index plus a dropout draw for it."""
        ell = int(rng.integers(len(self.nets)))
        sample = DropoutSample.draw(self.nets[ell], int(rng.integers(2 ** 63)))
        return ell, sample


def _sequence_values(ensemble: ValueEnsemble, states, alive, ell: int,
                     sample: DropoutSample | None) -> np.ndarray:
    """Planner score of every action sequence: the value network at the
    reached state, zero for sequences that lost the pole on the way."""
    values = np.zeros(states.shape[0])
    if np.any(alive):
        values[alive] = ensemble.nets[ell].forward(states[alive], sample)[:, 0]
    return values


def _softmax_weights(values: np.ndarray, temperature_divisor: float) -> np.ndarray:
    z = values / temperature_divisor
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def policy_distribution(ensemble: ValueEnsemble, x, scenario,
                        temperature_divisor: float = 25.0) -> FiniteMeasure:
    """Softmax plan distribution at one state under one scenario.

    ``scenario`` is ``(net index, dropout sample)``.  Sequence k of
    :func:`enumerate_controls` gets weight proportional to
    ``exp(J_k / temperature_divisor)`` where J_k is the scenario's value of
    the state reached by sequence k (zero if the pole falls en route).
    """
    ell, sample = scenario
    states, alive = rollout_tree(x, ensemble.t_horizon)
    values = _sequence_values(ensemble, states, alive, ell, sample)
    weights = _softmax_weights(values, temperature_divisor)
    controls = enumerate_controls(ensemble.t_horizon)
    return FiniteMeasure(zip(controls, weights))


@dataclass
class EpisodeRecord:
    """States visited (terminal state excluded) and the episode score."""

    states: np.ndarray
    score: int


def train_value_ensemble(ensemble: ValueEnsemble, episodes, rng,
                         best_score: int | None = None,
                         learning_rate: float = 0.01, batch_size: int = 64,
                         score_cap: int = 500, aux_weight: float = 0.1,
                         aux_pairs: int = 16) -> None:
    """One training pass per net on performance-labelled states.

    Each net draws its own batch, half from top-quartile episodes and half
    from bottom-quartile ones; every state of an episode is labelled
    ``100 * (score / best + score / cap) / 2``.  A time-consistency term
    with weight ``aux_weight`` pulls the value of a state toward the net's
    current value of the state reached ``t_horizon`` steps later, treated
    as a constant target.
    """
    episodes = list(episodes)
    if len(episodes) < 2:
        raise ValueError("need at least two episodes to train")
    scores = np.array([ep.score for ep in episodes], dtype=float)
    if best_score is None:
        best_score = int(scores.max())
    best = max(float(best_score), 1.0)
    top = np.flatnonzero(scores >= np.percentile(scores, 75))
    bottom = np.flatnonzero(scores <= np.percentile(scores, 25))
    half = max(batch_size // 2, 1)
    horizon = ensemble.t_horizon

    for net in ensemble.nets:
        xs, ys = [], []
        for pool in (top, bottom):
            picks = pool[rng.integers(len(pool), size=half)]
            for idx in picks:
                ep = episodes[idx]
                xs.append(ep.states[rng.integers(len(ep.states))])
                ys.append(100.0 * 0.5 * (ep.score / best + ep.score / score_cap))
        n_main = len(xs)
        n_aux = 0
        long_enough = [ep for ep in episodes if len(ep.states) > horizon]
        if aux_pairs > 0 and long_enough:
            starts, anchors = [], []
            for _ in range(aux_pairs):
                ep = long_enough[rng.integers(len(long_enough))]
                t = int(rng.integers(len(ep.states) - horizon))
                starts.append(ep.states[t])
                anchors.append(ep.states[t + horizon])
            # the anchor value is a constant target, not differentiated through
            anchor_vals = net.forward(np.asarray(anchors))[:, 0]
            xs.extend(starts)
            ys.extend(float(v) for v in anchor_vals)
            n_aux = len(starts)
        weights = np.concatenate([
            np.full(n_main, 1.0 / n_main),
            np.full(n_aux, aux_weight / n_aux) if n_aux else np.empty(0)])
        sample = None
        if net.dropout_rate > 0.0:
            sample = DropoutSample.draw(net, int(rng.integers(2 ** 63)))
        net.train_step((np.asarray(xs), np.asarray(ys)), learning_rate,
                       sample_weights=weights, sample=sample)


@dataclass
class CartPoleConfig:
    k_phi: int = 8
    episodes: int = 1000
    t_horizon: int = 8
    seed: int = 0
    max_steps: int = 500
    # the [0,100] affine output scales output-layer gradients by the
    # range width, so the usable step size is far below the one the
    # small unit-range nets take; 1e-2 visibly saturates the sigmoid
    learning_rate: float = 0.001
    batch_size: int = 64
    dropout_rate: float = 0.1
    # raw exp(J) with J in [0,100]: differences of a few value units
    # dominate the sample, which is what makes the scheme take off.
    # float64 handles exp(100) comfortably and the softmax subtracts
    # the max anyway, so no rescaling is needed for stability.
    temperature_divisor: float = 1.0
    memory_len: int = 200
    greedy: bool = False
    # no-information baseline: sample controls uniformly, never
    # consulting the value nets (all-equal values induce exactly this)
    uniform_policy: bool = False
    record_stats: bool = True
    # optional early exit once the trailing 100-episode mean reaches
    # the target, for callers that only need the threshold crossing
    stop_at_ma: float | None = None

    def validate(self) -> None:
        if self.k_phi < 1:
            raise ValueError("k-phi must be positive")
        if self.episodes < 1:
            raise ValueError("episodes must be positive")
        if not 1 <= self.t_horizon <= 16:
            raise ValueError("t-horizon must lie in 1..16")
        if self.max_steps < 1:
            raise ValueError("max-steps must be positive")


@dataclass
class CartPoleRunResult:
    scores: list
    stats: TrajectoryStats
    ensemble: ValueEnsemble
    seed: int


def run_cartpole(config: CartPoleConfig) -> CartPoleRunResult:
    """Episode loop: plan with a fresh scenario every step, take the first
    action of a sampled sequence, retrain the ensemble after each episode."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    ensemble = ValueEnsemble.create(
        config.k_phi, rng, t_horizon=config.t_horizon,
        dropout_rate=config.dropout_rate)
    n_controls = 2 ** config.t_horizon
    first_action_bit = config.t_horizon - 1

    reference = np.zeros(4)
    ref_states, ref_alive = rollout_tree(reference, config.t_horizon)
    first_action_one = (
        np.arange(n_controls) >> first_action_bit) & 1 == 1

    memory: list[EpisodeRecord] = []
    scores: list[int] = []
    best_so_far = 0
    stats = TrajectoryStats()

    for episode in range(config.episodes):
        state = rng.uniform(-0.05, 0.05, size=4)
        visited = [state.copy()]
        score = 0
        for _ in range(config.max_steps):
            if config.uniform_policy:
                pick = int(rng.integers(n_controls))
            else:
                ell, sample = ensemble.draw_scenario(rng)
                tree_states, tree_alive = rollout_tree(
                    state, config.t_horizon)
                values = _sequence_values(ensemble, tree_states, tree_alive,
                                          ell, sample)
                weights = _softmax_weights(values, config.temperature_divisor)
                if config.greedy:
                    pick = int(np.argmax(weights))
                else:
                    pick = int(rng.choice(n_controls, p=weights))
            action = (pick >> first_action_bit) & 1
            state = _step_batch(state[None, :], action)[0]
            if _terminal_mask(state[None, :])[0]:
                break
            score += 1
            visited.append(state.copy())
        scores.append(score)

        best_so_far = max(best_so_far, score)
        memory.append(EpisodeRecord(states=np.asarray(visited), score=score))
        if len(memory) > config.memory_len:
            memory.pop(0)

        if config.record_stats:
            mixed = np.zeros(n_controls)
            regret = 0.0
            for ell in range(ensemble.k_phi):
                sample = DropoutSample.draw(
                    ensemble.nets[ell], int(rng.integers(2 ** 63)))
                values = _sequence_values(ensemble, ref_states, ref_alive,
                                          ell, sample)
                weights = _softmax_weights(values, config.temperature_divisor)
                mixed += weights / ensemble.k_phi
                regret += (values.max() - float(weights @ values)) / ensemble.k_phi
            gamma = FiniteMeasure({
                0: float(mixed[~first_action_one].sum()),
                1: float(mixed[first_action_one].sum())})
            stats.record(episode, {"start": gamma}, regret=regret, kappa=None)

        if len(memory) >= 2 and not config.uniform_policy:
            train_value_ensemble(
                ensemble, memory, rng, best_score=best_so_far,
                learning_rate=config.learning_rate,
                batch_size=config.batch_size, score_cap=config.max_steps)

        if (config.stop_at_ma is not None and len(scores) >= 100
                and float(np.mean(scores[-100:])) >= config.stop_at_ma):
            break

    return CartPoleRunResult(scores=scores, stats=stats, ensemble=ensemble,
                             seed=config.seed)


# -- bandits ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BanditSpec:
    """A k-armed bandit with finitely supported arm reward laws.

    ``noise_width`` is the half-width of the uniform perturbation the
    planner adds to each estimated arm value; ``perspective`` records which
    reading of the bandit a run uses.
    """

    arms: int
    rewards: tuple
    noise_width: float = 0.0
    perspective: str = "state"

    def __post_init__(self):
        if self.arms < 1:
            raise ValueError("need at least one arm")
        if len(self.rewards) != self.arms:
            raise ValueError("need one reward law per arm")
        for law in self.rewards:
            law.require_probability("arm reward law")
        if self.noise_width < 0.0:
            raise ValueError("noise width must be nonnegative")
        if self.perspective not in ("state", "action"):
            raise ValueError(f"unknown perspective {self.perspective!r}")

    @classmethod
    def bernoulli(cls, means, noise_width: float = 0.0,
                  perspective: str = "state") -> "BanditSpec":
        laws = tuple(
            FiniteMeasure({0.0: 1.0 - float(m), 1.0: float(m)}) for m in means)
        return cls(arms=len(laws), rewards=laws, noise_width=noise_width,
                   perspective=perspective)

    def means(self) -> np.ndarray:
        return np.array([law.mean() for law in self.rewards])


def _two_arm_first_prob(mu0: float, mu1: float, delta: float) -> float:
    """P(arm 0 wins) when two arm values get iid uniform(-delta, delta)
    noise: the survival function of a triangular difference."""
    gap = mu1 - mu0
    width = 2.0 * delta
    if gap <= -width:
        return 1.0
    if gap >= width:
        return 0.0
    if gap <= 0.0:
        return 1.0 - (width + gap) ** 2 / (2.0 * width * width)
    return (width - gap) ** 2 / (2.0 * width * width)


def _argmax_distribution(means: np.ndarray, delta: float, n_scenarios: int,
                         rng) -> FiniteMeasure:
    k = means.shape[0]
    if delta == 0.0 or k == 1:
        return FiniteMeasure.dirac(int(np.argmax(means)))
    if k == 2:
        p = _two_arm_first_prob(float(means[0]), float(means[1]), delta)
        return FiniteMeasure({0: p, 1: 1.0 - p})
    if n_scenarios < 1:
        raise ValueError("need at least one scenario draw")
    if rng is None:
        rng = np.random.default_rng(0)
    draws = means + rng.uniform(-delta, delta, size=(n_scenarios, k))
    counts = np.bincount(np.argmax(draws, axis=1), minlength=k)
    return FiniteMeasure(
        (arm, counts[arm] / n_scenarios) for arm in range(k))


def bandit_state_policy(spec: BanditSpec, mu_hat, delta_f: float | None = None,
                        n_scenarios: int = 200_000, rng=None) -> FiniteMeasure:
    """Arm distribution in the state perspective: the probability each arm
    maximizes the estimated value plus its uniform noise.

    Exact (triangular difference) for two arms, scenario sampling beyond.
    """
    mu = np.asarray(mu_hat, dtype=float)
    if mu.shape != (spec.arms,):
        raise ValueError("mu_hat must give one estimate per arm")
    delta = spec.noise_width if delta_f is None else float(delta_f)
    return _argmax_distribution(mu, delta, n_scenarios, rng)


def bandit_action_policy(spec: BanditSpec, gamma_hat: FiniteMeasure,
                         delta_f: float | None = None,
                         n_scenarios: int = 200_000, rng=None) -> FiniteMeasure:
    """Arm distribution in the action perspective: arms are constant players
    and ``gamma_hat`` is a distribution over joint reward profiles; an arm's
    estimated value is the expectation of its coordinate."""
    gamma_hat.require_probability("reward profile model")
    means = np.zeros(spec.arms)
    for profile, w in gamma_hat:
        if len(profile) != spec.arms:
            raise ValueError("profile length does not match arm count")
        means += w * np.asarray(profile, dtype=float)
    delta = spec.noise_width if delta_f is None else float(delta_f)
    return _argmax_distribution(means, delta, n_scenarios, rng)


def arm_induced_distributions(spec: BanditSpec) -> tuple:
    """Induced action distribution of each arm: arms are constant players,
    so each one's behavior is exactly its reward law."""
    return tuple(spec.rewards)


def product_reward_model(spec: BanditSpec) -> FiniteMeasure:
    """Joint reward-profile model with independent arms: the product of the
    arm laws, as a measure over reward tuples."""
    atoms = [((), 1.0)]
    for law in spec.rewards:
        atoms = [
            (prefix + (value,), w * lw)
            for prefix, w in atoms for value, lw in law]
    return FiniteMeasure(atoms)
