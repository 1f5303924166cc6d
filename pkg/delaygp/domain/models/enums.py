from enum import Enum


class DelayKind(str, Enum):
    """Computation delay model enumeration."""

    CONSTANT = "constant"
    LINEAR = "linear"
    QUADRATIC = "quadratic"


class DeletionKind(str, Enum):
    """Training data deletion strategy enumeration."""

    OLDEST_FIRST = "oldest-first"
    NONE = "none"
    CUSTOM = "custom"


class ExperimentKind(str, Enum):
    """Experiment enumeration."""

    DELAY_SWEEP = "delay-sweep"
    DATASET_SWEEP = "dataset-sweep"
    ONLINE_TRIGGER = "online-trigger"
    TRADEOFF_SWEEP = "tradeoff-sweep"

    @property
    def is_bound_certified(self) -> bool:
        """Check if the experiment relies on Δ̄ < 1/(2 L_f)."""
        return self in (ExperimentKind.ONLINE_TRIGGER, ExperimentKind.TRADEOFF_SWEEP)
