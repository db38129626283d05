"""The four deviation benchmarks, separated on matching pennies.

The benchmarks differ only in where the supremum over one player's
deviation sits.  Innermost gives the harshest test (Nash-type); outermost
the weakest (coarse correlated).  On a product distribution the uncertain
benchmark collapses onto the correlated one.
"""

import numpy as np

from gamelearn.framework import equilibrium_condition_values
from gamelearn.measures import FiniteMeasure

PROFILES = [(i, j) for i in range(2) for j in range(2)]


def matching_pennies(profile):
    return 1.0 if profile[0] == profile[1] else -1.0


def show(label, payoff, rho, slot=0):
    values = equilibrium_condition_values(payoff, rho, slot)
    print(f"== {label} (player {slot + 1}) ==")
    print(f"  nash-type          {values.nash_type: .4f}")
    print(f"  correlated         {values.correlated: .4f}")
    print(f"  uncertain          {values.uncertain: .4f}")
    print(f"  coarse correlated  {values.coarse_correlated: .4f}")


def main():
    uniform = FiniteMeasure.uniform(PROFILES)
    show("matching pennies, uniform joint play", matching_pennies, uniform)

    # correlation the players cannot see coordinates on the diagonal
    diagonal = FiniteMeasure({(0, 0): 0.5, (1, 1): 0.5})
    show("matching pennies, diagonal correlation", matching_pennies, diagonal)

    rng = np.random.default_rng(4)
    table = {p: float(rng.normal()) for p in PROFILES}
    rho = FiniteMeasure(zip(PROFILES, rng.dirichlet(np.ones(4))))
    show("random game, random joint law", lambda p: table[p], rho)
    print("\ncoarse correlated never exceeds correlated: the deviation is"
          "\nchosen before seeing the recommendation, not after")


if __name__ == "__main__":
    main()
