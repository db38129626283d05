"""Learning players in games: finitely supported behavior distributions,
observable equilibrium conditions, and seeded experiment labs (repeated
two-player play, one-step mean-field populations, planning-based cart-pole
control, bandits in two perspectives)."""

__version__ = "0.1.0"

from .framework import (
    AgeRecord,
    Control,
    EquilibriumValues,
    EstimationBundle,
    HorizonOverflowError,
    MOOD_LABELS,
    ObservationLog,
    OpponentModelClashError,
    RecurrenceReport,
    TimeIndexedGame,
    TrajectoryStats,
    chain_distribution,
    equilibrium_condition_values,
    induce_action_distribution,
    induce_control_distribution,
    kappa,
    kappa_condition,
    lemma_continuity_probe,
    mood_label,
    recurrence_check,
    regret_condition,
    support_condition,
    time_consistency_residual,
    value_of_control,
    value_of_profile,
)
from .measures import (
    DISTRIBUTION_METRICS,
    FiniteMeasure,
    ScenarioSpace,
    resolve_metric,
    total_variation,
    wasserstein1_unit,
)
from .smallnet import DivergenceError, DropoutSample, Net

__all__ = [
    "__version__",
    "AgeRecord",
    "Control",
    "DISTRIBUTION_METRICS",
    "DivergenceError",
    "DropoutSample",
    "EquilibriumValues",
    "EstimationBundle",
    "FiniteMeasure",
    "HorizonOverflowError",
    "MOOD_LABELS",
    "Net",
    "ObservationLog",
    "OpponentModelClashError",
    "RecurrenceReport",
    "ScenarioSpace",
    "TimeIndexedGame",
    "TrajectoryStats",
    "chain_distribution",
    "equilibrium_condition_values",
    "induce_action_distribution",
    "induce_control_distribution",
    "kappa",
    "kappa_condition",
    "lemma_continuity_probe",
    "mood_label",
    "recurrence_check",
    "regret_condition",
    "resolve_metric",
    "support_condition",
    "time_consistency_residual",
    "total_variation",
    "value_of_control",
    "value_of_profile",
    "wasserstein1_unit",
]
