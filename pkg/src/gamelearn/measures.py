"""Finitely supported measures and the distances used by the behavior checks.

Everything downstream (scenario weighting, induced action distributions,
population estimates) is built from :class:`FiniteMeasure`, a nonnegative
measure with finitely many atoms.  Atoms are keyed by arbitrary hashable
points, so a measure over measures (needed for population estimates) works
out of the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Hashable, Iterable, Iterator

__all__ = [
    "FiniteMeasure",
    "ScenarioSpace",
    "total_variation",
    "wasserstein1_unit",
    "DISTRIBUTION_METRICS",
    "resolve_metric",
]

Point = Hashable

PROBABILITY_TOL = 1e-9


class FiniteMeasure:
    """A nonnegative measure with finite support.

    Parameters
    ----------
    atoms : iterable of (point, weight) pairs, or a mapping point -> weight
        Duplicate points are merged by summing their weights.  Atoms with
        weight exactly zero are dropped, negative weights are rejected.

    Instances are immutable; all arithmetic returns new measures.  Insertion
    order of first occurrence is preserved, which keeps every downstream
    iteration deterministic.
    """

    __slots__ = ("_atoms", "_hash")

    def __init__(self, atoms: Iterable[tuple[Point, float]] | dict = ()):
        if isinstance(atoms, dict):
            atoms = atoms.items()
        merged: dict[Point, float] = {}
        for point, weight in atoms:
            w = float(weight)
            if w < 0.0:
                raise ValueError(f"negative weight {w!r} at point {point!r}")
            if w == 0.0:
                continue
            merged[point] = merged.get(point, 0.0) + w
        self._atoms = merged
        self._hash = None

    # -- constructors -------------------------------------------------

    @classmethod
    def dirac(cls, point: Point) -> "FiniteMeasure":
        """Unit mass at a single point."""
        return cls(((point, 1.0),))

    @classmethod
    def uniform(cls, points: Iterable[Point]) -> "FiniteMeasure":
        """Equal weights over distinct points, normalized to mass one."""
        pts = list(points)
        if not pts:
            raise ValueError("uniform measure needs at least one point")
        w = 1.0 / len(pts)
        return cls((p, w) for p in pts)

    @classmethod
    def mixture(cls, components: Iterable[tuple[float, "FiniteMeasure"]]) -> "FiniteMeasure":
        """Weighted sum ``sum_i w_i * mu_i`` of finitely many measures."""
        pairs = []
        for coeff, measure in components:
            c = float(coeff)
            if c < 0.0:
                raise ValueError(f"negative mixture coefficient {c!r}")
            if c == 0.0:
                continue
            pairs.extend((p, c * w) for p, w in measure.atoms)
        return cls(pairs)

    # -- basic queries ------------------------------------------------

    @property
    def atoms(self) -> tuple[tuple[Point, float], ...]:
        return tuple(self._atoms.items())

    @property
    def support(self) -> tuple[Point, ...]:
        return tuple(self._atoms.keys())

    @property
    def total_mass(self) -> float:
        return float(sum(self._atoms.values()))

    def weight(self, point: Point) -> float:
        return self._atoms.get(point, 0.0)

    def __len__(self) -> int:
        return len(self._atoms)

    def __iter__(self) -> Iterator[tuple[Point, float]]:
        return iter(self._atoms.items())

    def __repr__(self) -> str:
        inside = ", ".join(f"{p!r}: {w!r}" for p, w in self._atoms.items())
        return f"FiniteMeasure({{{inside}}})"

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, FiniteMeasure):
            return NotImplemented
        return self._atoms == other._atoms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._atoms.items()))
        return self._hash

    # -- probability handling ------------------------------------------

    def is_probability(self, tol: float = PROBABILITY_TOL) -> bool:
        return abs(self.total_mass - 1.0) <= tol

    def require_probability(self, what: str = "measure", tol: float = PROBABILITY_TOL) -> "FiniteMeasure":
        """Raise unless total mass is 1 within ``tol``.  Returns self."""
        mass = self.total_mass
        if abs(mass - 1.0) > tol:
            raise ValueError(f"{what} is not normalized: total mass {mass!r}")
        return self

    def normalized(self) -> "FiniteMeasure":
        mass = self.total_mass
        if mass <= 0.0:
            raise ValueError("cannot normalize a measure with zero mass")
        return FiniteMeasure((p, w / mass) for p, w in self._atoms.items())

    def scaled(self, factor: float) -> "FiniteMeasure":
        return FiniteMeasure((p, w * factor) for p, w in self._atoms.items())

    def prune(self, threshold: float, renormalize: bool = True) -> "FiniteMeasure":
        """Drop atoms lighter than ``threshold``; optionally rescale the
        survivors so the total mass is unchanged."""
        kept = FiniteMeasure((p, w) for p, w in self._atoms.items() if w >= threshold)
        if renormalize and len(kept):
            lost = self.total_mass - kept.total_mass
            if lost != 0.0:
                return kept.scaled(self.total_mass / kept.total_mass)
        return kept

    # -- transforms ----------------------------------------------------

    def pushforward(self, fn: Callable[[Point], Point]) -> "FiniteMeasure":
        """Image measure under ``fn``; collapsed points merge their weights."""
        return FiniteMeasure((fn(p), w) for p, w in self._atoms.items())

    def expect(self, fn: Callable[[Point], float]) -> float:
        """Integral of ``fn`` against the measure."""
        return float(sum(w * fn(p) for p, w in self._atoms.items()))

    def mean(self) -> float:
        """Integral of the identity; points must be numeric."""
        return float(sum(w * p for p, w in self._atoms.items()))

    def allclose(self, other: "FiniteMeasure", tol: float = 1e-9) -> bool:
        points = set(self._atoms) | set(other._atoms)
        return all(abs(self.weight(p) - other.weight(p)) <= tol for p in points)


@dataclass(frozen=True)
class ScenarioSpace:
    """A finite weighted set of scenario identifiers.

    Scenarios stand in for the sources of estimation randomness (which
    ensemble member answered, which dropout mask was drawn).  Weights are a
    probability vector.
    """

    scenarios: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.scenarios) != len(self.weights):
            raise ValueError("scenario and weight counts differ")
        if not self.scenarios:
            raise ValueError("scenario space is empty")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("scenario weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > PROBABILITY_TOL:
            raise ValueError("scenario weights must sum to one")

    @classmethod
    def uniform(cls, scenarios: Iterable) -> "ScenarioSpace":
        items = tuple(scenarios)
        if not items:
            raise ValueError("scenario space is empty")
        return cls(items, (1.0 / len(items),) * len(items))

    @classmethod
    def single(cls, scenario) -> "ScenarioSpace":
        return cls((scenario,), (1.0,))

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self) -> Iterator[tuple[Any, float]]:
        return iter(zip(self.scenarios, self.weights))

    def as_measure(self) -> FiniteMeasure:
        return FiniteMeasure(zip(self.scenarios, self.weights))


# -- distances ---------------------------------------------------------


def total_variation(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """Total variation distance, half the l1 gap over the union support."""
    points = set(mu.support) | set(nu.support)
    return 0.5 * sum(abs(mu.weight(p) - nu.weight(p)) for p in points)


def wasserstein1_unit(mu: FiniteMeasure, nu: FiniteMeasure) -> float:
    """Wasserstein-1 distance for measures supported on [0, 1].

    Both measures must be probabilities with numeric points in [0, 1]; the
    distance is the integral of the CDF gap, computed exactly on the sorted
    union support.
    """
    mu.require_probability("first argument")
    nu.require_probability("second argument")
    points = sorted(set(mu.support) | set(nu.support))
    for p in points:
        q = float(p)
        if q < 0.0 or q > 1.0:
            raise ValueError(f"point {p!r} outside [0, 1]")
    dist = 0.0
    cdf_gap = 0.0
    prev = None
    for p in points:
        q = float(p)
        if prev is not None:
            dist += abs(cdf_gap) * (q - prev)
        cdf_gap += mu.weight(p) - nu.weight(p)
        prev = q
    return dist


DISTRIBUTION_METRICS = {
    "total-variation": total_variation,
    "wasserstein-1-on-[0,1]": wasserstein1_unit,
}


def resolve_metric(metric: str) -> Callable[[FiniteMeasure, FiniteMeasure], float]:
    try:
        return DISTRIBUTION_METRICS[metric]
    except KeyError:
        known = ", ".join(sorted(DISTRIBUTION_METRICS))
        raise ValueError(f"unknown metric {metric!r} (known: {known})") from None
