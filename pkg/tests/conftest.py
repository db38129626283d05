"""Shared fixtures: a one-step two-player game with Bernoulli states.

Player 1 earns c per unit of its action and loses 1 when player 2's state
comes up 1, so the value of a joint profile (a1, a2) is c*a1 - a2.  Most
framework tests run on this game because every quantity has a closed form.
"""

import numpy as np
import pytest

from gamelearn.framework import Control, EstimationBundle, TimeIndexedGame
from gamelearn.measures import FiniteMeasure

START = "start"
OUTCOMES = ((0, 0), (0, 1), (1, 0), (1, 1))


def one_step_game(p1_actions, p2_actions):
    states = {0: (START,), 1: OUTCOMES}
    actions = {
        (0, START, 1): tuple(p1_actions),
        (0, START, 2): tuple(p2_actions),
    }
    return TimeIndexedGame(horizon_bound=1, states=states, actions=actions,
                           players=(1, 2))


def bernoulli_kernel(t, x, joint):
    a1, a2 = joint
    return FiniteMeasure({
        (0, 0): (1.0 - a1) * (1.0 - a2),
        (0, 1): (1.0 - a1) * a2,
        (1, 0): a1 * (1.0 - a2),
        (1, 1): a1 * a2,
    })


def ctrl(action):
    """A one-step plan: play ``action`` at the start state."""
    return Control({(0, START): action})


def player1_bundle(opponent_model, policy_prior=None, c=0.3,
                   best_expectation=0.0, state_value=None,
                   transition_cost=None):
    """Player 1's beliefs on the one-step game.

    Reward convention: running reward c*a1, terminal value -1 when the
    opponent's state is 1, so a profile (a1, a2) is worth c*a1 - a2.
    """
    if state_value is None:
        state_value = lambda sc, t, x: -1.0 if x[1] == 1 else 0.0
    if transition_cost is None:
        transition_cost = lambda sc, t, x, joint: c * joint[0]
    if policy_prior is None:
        policy_prior = lambda sc, t, x: FiniteMeasure.dirac(ctrl(1.0))
    return EstimationBundle(
        player=1,
        horizon=lambda t, x: 1,
        transition=bernoulli_kernel,
        opponent_model=opponent_model,
        transition_cost=transition_cost,
        state_value=state_value,
        policy_prior=policy_prior,
        best_expectation=lambda t, x: best_expectation,
    )


def dirac_model(opponent_action):
    """Opponent model: player 2 surely plays ``opponent_action``."""
    def model(t, own):
        return FiniteMeasure.dirac((own, ctrl(opponent_action)))
    return model


def mixed_model(opponent_dist):
    """Opponent model from a distribution over player 2's actions."""
    def model(t, own):
        return FiniteMeasure(
            ((own, ctrl(b)), w) for b, w in opponent_dist)
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(0)
