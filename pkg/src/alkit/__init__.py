"""Feature-space active learning on frozen embeddings.

Batch query strategies (boundary-distance, uncertainty, coreset,
gradient-embedding, and balancing baselines), a linear-head trainer, and a
deterministic multi-round benchmark simulator with checkpoint/resume.
"""

from .errors import AlkitError
from .feature_io import ResultsLog, append_round, read_array, write_array
from .geometry import BoundaryScores, boundary_scores, dcsdb, ddb, pairwise_boundary_distance
from .linear_head import (
    CosineSchedule,
    LinearHead,
    StepSchedule,
    TrainConfig,
    TrainResult,
    class_weights,
    logits,
    predict,
    train,
)
from .pool import (
    ClassDistribution,
    PoolState,
    class_histogram,
    commit_query,
    entropy,
    imbalance_ratio,
    seed_initial,
    split,
)
from .records import RoundMetrics
from .simulator import ExperimentResult, aggregate, run_experiment, run_single
from .strategies import STRATEGIES, QueryResult, StrategyConfig, select
from .synth import SynthSpec, generate, longtail_counts

__version__ = "0.1.0"

__all__ = [
    "AlkitError",
    "BoundaryScores",
    "ClassDistribution",
    "CosineSchedule",
    "ExperimentResult",
    "LinearHead",
    "PoolState",
    "QueryResult",
    "ResultsLog",
    "RoundMetrics",
    "STRATEGIES",
    "StepSchedule",
    "StrategyConfig",
    "SynthSpec",
    "TrainConfig",
    "TrainResult",
    "aggregate",
    "append_round",
    "boundary_scores",
    "class_histogram",
    "class_weights",
    "commit_query",
    "dcsdb",
    "ddb",
    "entropy",
    "generate",
    "imbalance_ratio",
    "logits",
    "longtail_counts",
    "pairwise_boundary_distance",
    "predict",
    "read_array",
    "run_experiment",
    "run_single",
    "seed_initial",
    "select",
    "split",
    "train",
    "write_array",
]
