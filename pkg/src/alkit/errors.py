"""Exception hierarchy shared across the toolkit.

Every error a caller is expected to handle has its own class; the CLI maps
them onto stable exit codes (see ``alkit.cli``).
"""


class AlkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(AlkitError):
    """Invalid experiment configuration or config file."""


class FormatError(AlkitError):
    """Malformed file header or unsupported on-disk format."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IntegrityError(AlkitError):
    """Declared metadata disagrees with the payload actually present."""


class SequencingError(AlkitError):
    """Results-log append with a non-consecutive round index."""


class SpecError(AlkitError):
    """Synthetic pool specification is internally inconsistent."""


class BudgetError(AlkitError):
    """A selection or seeding request exceeds the available unlabeled pool."""


class ShapeError(AlkitError):
    """Array dimensions do not match the classifier or pool."""


class WeightingError(AlkitError):
    """Inverse-frequency class weighting requested with an absent class."""


class DivergenceError(AlkitError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, learning_rate: float):
        super().__init__(
            f"non-finite training loss at epoch {epoch} (lr={learning_rate:g})"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


class InitializationError(AlkitError):
    """A strategy that needs labeled anchors was started without any."""


class StrategyContractViolation(AlkitError):
    """A strategy returned indices that break the query contract."""


class UndefinedMetricError(AlkitError):
    """Class-distribution metric requested on an empty distribution."""


class AggregationError(AlkitError):
    """Result logs with mismatched round grids cannot be aggregated."""


class CheckpointMismatch(ConfigError):
    """Checkpoint was produced by a different configuration."""
