"""Receding-horizon cartpole with a value-net ensemble.

Every step scores all 2^T action sequences through the true dynamics,
caps them with a sampled value net, and softmaxes; only the first action
of the drawn sequence is executed.  Training stops once the trailing
100-episode average clears 150.
"""

import numpy as np

from gamelearn.rl import CartPoleConfig, run_cartpole


def trailing_average(scores, width=100):
    window = scores[-width:]
    return sum(window) / len(window)


def main():
    baseline = run_cartpole(CartPoleConfig(
        seed=0, episodes=20, uniform_policy=True, record_stats=False))
    print(f"uniform-policy baseline over 20 episodes: "
          f"{np.mean(baseline.scores):.1f}")

    result = run_cartpole(CartPoleConfig(
        seed=0, episodes=300, stop_at_ma=150.0, record_stats=False))
    scores = result.scores
    print(f"trained for {len(scores)} episodes")
    for start in range(0, len(scores), 25):
        block = scores[start:start + 25]
        print(f"  episodes {start:3d}-{start + len(block) - 1:3d}: "
              f"mean {np.mean(block):6.1f}  max {max(block)}")
    print(f"final trailing-100 average: {trailing_average(scores):.1f}")


if __name__ == "__main__":
    main()
