"""Two dropout-net players, two moods of the same repeated game.

With full incentive and a modest benchmark both players converge to all-in.
With the default knobs player 1 keeps crossing 1/2: exploration widens
whenever the estimated prospects fall short of its best expectation.
"""

import numpy as np

from gamelearn.twoplayer import GameConfig, run_experiment

ROUNDS = 300


def summarize(label, config):
    trace = run_experiment(config)
    rows = trace.rows
    tail = rows[-100:]
    a1 = np.array([r.a1 for r in rows])
    frac_high = np.mean([(r.a1 > 0.9) and (r.a2 > 0.9) for r in tail])
    flags = a1 > 0.5
    crossings = int(np.sum(flags[1:] != flags[:-1]))
    print(f"== {label} ==")
    print(f"  last-100 fraction with both actions > 0.9: {frac_high:.2f}")
    print(f"  crossings of a1 over 1/2: {crossings}")
    print(f"  final round: a1={rows[-1].a1:.2f} a2={rows[-1].a2:.2f} "
          f"kappa1={rows[-1].kappa1:.2f} explore1={rows[-1].explore1:.2f}")


def main():
    summarize("all-in regime (c=1, B1=0)",
              GameConfig(c=1.0, b1=0.0, n_games=ROUNDS, seed=0))
    summarize("oscillating regime (defaults)",
              GameConfig(n_games=ROUNDS, seed=0))


if __name__ == "__main__":
    main()
