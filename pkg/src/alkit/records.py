"""Per-round experiment records.

A ``RoundMetrics`` is the unit appended to a results log after every
completed round. The canonical on-disk record contains only deterministic
fields so that two runs with the same config and seed produce bit-identical
logs; wall-clock timings are kept on the object for diagnostics but are
serialized to a sidecar file and excluded from equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Key order of the canonical record. Fixed so serialization is byte-stable.
_RECORD_KEYS = (
    "round",
    "strategy",
    "seed",
    "labeled_size",
    "test_accuracy",
    "test_top5_accuracy",
    "best_val_accuracy",
    "imbalance_ratio",
    "imbalance_empty_class",
    "entropy",
    "class_counts",
)


@dataclass
class RoundMetrics:
    """Everything measured at the end of one active-learning round."""

    round: int
    strategy: str
    seed: int
    labeled_size: int
    test_accuracy: float
    test_top5_accuracy: float | None  # only populated when C >= 5
    best_val_accuracy: float
    imbalance_ratio: float
    imbalance_empty_class: bool
    entropy: float
    class_counts: list[int]
    # Diagnostic only: never part of the canonical record or of equality.
    train_seconds: float | None = field(default=None, compare=False)
    select_seconds: float | None = field(default=None, compare=False)

    def to_record(self) -> dict:
        """Canonical, deterministic dict (timings excluded)."""
        return {k: getattr(self, k) for k in _RECORD_KEYS}

    @classmethod
    def from_record(cls, record: dict) -> "RoundMetrics":
        return cls(**{k: record[k] for k in _RECORD_KEYS})

    def timing_record(self) -> dict:
        return {
            "round": self.round,
            "train_seconds": self.train_seconds,
            "select_seconds": self.select_seconds,
        }
