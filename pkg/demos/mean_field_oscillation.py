"""Best-response learning in the one-step crowd game never settles down.

The population mean follows a simple scalar recursion that jumps across 1/2
forever, so the induced action keeps flipping between the two endpoints.
No candidate population on the standard grid is a fixed point, even though
the long-run average of the oscillation is one.
"""

import numpy as np

from gamelearn.meanfield import (OneStepGame, ProfilePoint, PopulationEstimate,
                                 relaxed_equilibrium_check, run_mean_field)
from gamelearn.measures import FiniteMeasure


def main():
    for name, game in [("smooth cost", OneStepGame.example_1()),
                       ("discontinuous cost", OneStepGame.example_2())]:
        trace = run_mean_field(game, a0=0.9, c=0.3, n_iters=400, seed=0)
        print(f"== {name} ==")
        for n, m, b, _ in trace.rows[:8]:
            print(f"  iter {n:3d}  population mean {m:.6f}  best response {b:.0f}")
        tail = [b for _, _, b, _ in trace.rows[-300:]]
        print(f"  ... last 300 responses: {tail.count(0.0)} zeros, "
              f"{tail.count(1.0)} ones")

    game = OneStepGame.example_1()
    grid = np.linspace(0.0, 1.0, 101)
    fixed = [a for a in grid
             if relaxed_equilibrium_check(game, FiniteMeasure.dirac(float(a)))]
    print(f"\nhomogeneous fixed points on the 101-point grid: {fixed or 'none'}")

    # the time average of the oscillation, however, is self-consistent
    half = FiniteMeasure({0.0: 0.5, 1.0: 0.5})
    print("half-half mixture is a relaxed equilibrium:",
          relaxed_equilibrium_check(game, half))


if __name__ == "__main__":
    main()
