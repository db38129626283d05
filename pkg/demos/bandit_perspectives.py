"""One bandit, two readings, same arm distribution.

State reading: arms are moves of a single player whose estimates carry
uniform value noise.  Action reading: arms are constant players and the
model is a product law over reward profiles.  Both give the probability
that each arm's perturbed estimate is the largest.
"""

import numpy as np

from gamelearn.measures import FiniteMeasure
from gamelearn.rl import (BanditSpec, bandit_action_policy,
                          bandit_state_policy, product_reward_model)


def spec_for(means, width):
    return BanditSpec(arms=len(means),
                      rewards=tuple(FiniteMeasure.dirac(m) for m in means),
                      noise_width=width)


def main():
    means = (0.5, 0.6)
    print(f"estimates {means}")
    print(f"{'noise':>6} {'P(arm 1)':>10} {'monte carlo':>12}")
    rng = np.random.default_rng(0)
    for width in (0.05, 0.1, 0.2, 0.5, 1.0):
        law = bandit_state_policy(spec_for(means, width), means)
        draws = np.array(means) + rng.uniform(-width, width, size=(200_000, 2))
        mc = np.mean(draws[:, 0] > draws[:, 1])
        print(f"{width:6.2f} {law.weight(0):10.5f} {mc:12.5f}")

    # the action reading sees the same bandit through a product profile model
    spec = spec_for((0.2, 0.5, 0.8), 0.4)
    state_view = bandit_state_policy(spec, (0.2, 0.5, 0.8),
                                     rng=np.random.default_rng(7))
    action_view = bandit_action_policy(spec, product_reward_model(spec),
                                       rng=np.random.default_rng(7))
    print("\nthree arms, noise 0.4:")
    for arm in range(3):
        print(f"  arm {arm}: state {state_view.weight(arm):.5f}  "
              f"action {action_view.weight(arm):.5f}")


if __name__ == "__main__":
    main()
