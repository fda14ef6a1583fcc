"""Experiment configuration: JSON document, dotted-key overrides, hashing.

One config document drives a whole experiment. Sections:

``data``
    Either a synthetic pool (``source: "synth"``, fields of ``SynthSpec``
    plus ``test_per_class`` for a balanced held-out test block drawn from
    the same class means) or files (``source: "files"`` with ``features``/
    ``labels`` paths and a ``test_frac`` carved at split time).
``pool``
    ``val_frac``, ``initial_size`` (the seed pool), ``budget`` per round,
    ``rounds``.
``train``
    ``TrainConfig`` fields; ``schedule`` is ``{"kind": "cosine", "t_max": N}``
    or ``{"kind": "step", "factor": f, "every_n_epochs": N}`` or null.
``strategy``
    ``name`` (one strategy or a list to sweep), ``partitions``,
    ``pooled_dim``, optional ``seed``.
``run``
    ``seeds`` (list), ``out_dir``.

Command-line overrides use dotted keys (``pool.budget=300``) and must
reference keys that already exist in the document.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError
from .linear_head import CosineSchedule, StepSchedule, TrainConfig
from .strategies import StrategyConfig
from .synth import SynthSpec


@dataclass(frozen=True)
class SynthSource:
    spec: SynthSpec
    test_per_class: int = 200


@dataclass(frozen=True)
class FilesSource:
    features: str
    labels: str
    test_frac: float = 0.1


@dataclass(frozen=True)
class PoolConfig:
    val_frac: float = 0.01
    initial_size: int = 500
    budget: int = 500
    rounds: int = 5

    def validate(self) -> None:
        if not 0.0 < self.val_frac < 1.0:
            raise ConfigError("pool.val_frac must be in (0, 1)")
        if self.initial_size < 1 or self.budget < 1 or self.rounds < 1:
            raise ConfigError("pool.initial_size, budget, rounds must be positive")


@dataclass
class ExperimentConfig:
    data: SynthSource | FilesSource
    pool: PoolConfig
    train: TrainConfig
    strategies: list[StrategyConfig]
    seeds: list[int]
    out_dir: str = "out"

    def validate(self) -> None:
        self.pool.validate()
        self.train.validate()
        if not self.strategies:
            raise ConfigError("at least one strategy required")
        for s in self.strategies:
            s.validate()
        if not self.seeds:
            raise ConfigError("run.seeds must be non-empty")

    def check_pool_capacity(self, train_pool_size: int) -> None:
        needed = self.pool.initial_size + self.pool.rounds * self.pool.budget
        if needed > train_pool_size:
            raise ConfigError(
                f"initial_size + rounds*budget = {needed} exceeds the "
                f"train pool of {train_pool_size} samples"
            )


# ---------------------------------------------------------------------------
# parsing


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing config key {where}.{key}")
    return section[key]


def _schedule_from_dict(doc: dict | None):
    if doc is None:
        return None
    kind = _require(doc, "kind", "train.schedule")
    if kind == "cosine":
        return CosineSchedule(t_max=int(_require(doc, "t_max", "train.schedule")))
    if kind == "step":
        return StepSchedule(
            factor=float(_require(doc, "factor", "train.schedule")),
            every_n_epochs=int(_require(doc, "every_n_epochs", "train.schedule")),
        )
    raise ConfigError(f"unknown schedule kind {kind!r}")


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        data_doc = dict(_require(doc, "data", "<root>"))
        source = data_doc.pop("source", "synth")
        if source == "synth":
            test_per_class = int(data_doc.pop("test_per_class", 200))
            data = SynthSource(SynthSpec(**data_doc), test_per_class)
        elif source == "files":
            data = FilesSource(**data_doc)
        else:
            raise ConfigError(f"unknown data source {source!r}")

        pool = PoolConfig(**doc.get("pool", {}))

        train_doc = dict(doc.get("train", {}))
        train_doc["schedule"] = _schedule_from_dict(train_doc.get("schedule"))
        train = TrainConfig(**train_doc)

        strat_doc = dict(doc.get("strategy", {"name": "random"}))
        names = strat_doc.pop("name", "random")
        if isinstance(names, str):
            names = [names]
        strategies = [StrategyConfig(name=n, **strat_doc) for n in names]

        run_doc = doc.get("run", {})
        seeds = [int(s) for s in run_doc.get("seeds", [0])]
        out_dir = str(run_doc.get("out_dir", "out"))
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}")
    cfg = ExperimentConfig(data, pool, train, strategies, seeds, out_dir)
    cfg.validate()
    return cfg


def load_config(path: str | Path, overrides: list[str] = ()) -> ExperimentConfig:
    """Parse a JSON config file and apply ``key.path=value`` overrides."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    for item in overrides:
        apply_override(doc, item)
    return config_from_dict(doc)


def apply_override(doc: dict, item: str) -> None:
    """Apply one ``dotted.key=value`` override in place.

    The key must already exist; values parse as JSON with a plain-string
    fallback.
    """
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    node = doc
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"override references unknown config key {key!r}")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"override references unknown config key {key!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node[parts[-1]] = value


# ---------------------------------------------------------------------------
# hashing (checkpoint compatibility)


def resolved_dict(cfg: ExperimentConfig, strategy: StrategyConfig, seed: int) -> dict:
    """Canonical dict of everything that determines one seed-run's output."""
    doc = {
        "data": asdict(cfg.data),
        "pool": asdict(cfg.pool),
        "train": asdict(cfg.train),
        "strategy": asdict(strategy),
        "seed": seed,
    }
    return doc


def config_hash(cfg: ExperimentConfig, strategy: StrategyConfig, seed: int) -> str:
    blob = json.dumps(resolved_dict(cfg, strategy, seed), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def diff_summary(stored: dict, current: dict, prefix: str = "") -> list[str]:
    """Human-readable key-level differences between two config dicts."""
    lines: list[str] = []
    keys = sorted(set(stored) | set(current))
    for key in keys:
        path = f"{prefix}{key}"
        a, b = stored.get(key, "<absent>"), current.get(key, "<absent>")
        if isinstance(a, dict) and isinstance(b, dict):
            lines.extend(diff_summary(a, b, prefix=path + "."))
        elif a != b:
            lines.append(f"{path}: checkpoint={a!r} current={b!r}")
    return lines
