"""Multi-round active-learning simulation.

One seed-run is: split the pool, annotate a random initial set, then loop
``train head -> log metrics -> query a batch -> commit labels`` for K
rounds (K+1 logged rounds including round 0). All randomness derives from
the run seed through four named sub-streams, so runs are bit-reproducible
and every strategy sweep shares the same splits, initial pool, and
per-round training seeds:

    stream 0  validation/test splitting
    stream 1  initial pool draw
    stream 2  training (re-derived per round: [seed, 2, round, train.seed])
    stream 3  strategy randomness (stateful across rounds; checkpointed)

A checkpoint is written after every commit; resuming reproduces the exact
byte content an uninterrupted run would have produced.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import feature_io, pool as pool_mod, synth
from .config import (
    ExperimentConfig,
    FilesSource,
    SynthSource,
    config_hash,
    diff_summary,
    resolved_dict,
)
from .errors import AggregationError, AlkitError, CheckpointMismatch, ConfigError
from .linear_head import LinearHead, logits, train
from .pool import PoolState, class_histogram, entropy, imbalance_ratio
from .records import RoundMetrics
from .strategies import StrategyConfig, select

_SPLIT, _INIT, _TRAIN, _STRATEGY = 0, 1, 2, 3

CHECKPOINT_NAME = "checkpoint.json"
LOG_NAME = "log.aljsonl"
TIMES_NAME = "times.jsonl"


def _stream(seed: int, tag: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, *map(int, extra)]))


def build_dataset(data_cfg) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Materialize (features, labels, fixed_test_idx or None).

    Synthetic pools get a balanced test block sampled from the same class
    means but fresh noise streams, mirroring the convention of evaluating a
    long-tailed train set against its original balanced test split. File
    pools return no fixed test indices; the caller carves ``test_frac``.
    """
    if isinstance(data_cfg, SynthSource):
        spec = data_cfg.spec
        features, labels, _ = synth.generate(spec)
        means = synth.class_means(spec)
        test_counts = [data_cfg.test_per_class] * spec.num_classes
        test_f, test_y = synth.sample_classes(
            means,
            test_counts,
            spec.noise_sigma,
            spec.seed,
            stream_offset=2 + spec.num_classes,
        )
        all_f = np.vstack([features, test_f])
        all_y = np.concatenate([labels, test_y])
        test_idx = np.arange(len(labels), len(all_y), dtype=np.int64)
        return all_f, all_y, test_idx
    if isinstance(data_cfg, FilesSource):
        _check_files_exist(data_cfg)
        features = feature_io.read_array(data_cfg.features)
        labels = feature_io.read_array(data_cfg.labels)
        if features.ndim != 2 or labels.ndim != 1 or len(features) != len(labels):
            raise ConfigError("features must be 2-D and labels 1-D of equal length")
        return features, labels.astype(np.int64), None
    raise ConfigError(f"unknown data source {type(data_cfg).__name__}")


def _check_files_exist(data_cfg: FilesSource) -> None:
    missing = [p for p in (data_cfg.features, data_cfg.labels) if not Path(p).exists()]
    if missing:
        raise ConfigError("missing data files: " + ", ".join(missing))


def _build_pool(cfg: ExperimentConfig, features, labels, fixed_test_idx, seed: int) -> PoolState:
    split_rng = _stream(seed, _SPLIT)
    n = len(labels)
    if fixed_test_idx is None:
        test_frac = cfg.data.test_frac
        n_test = int(round(test_frac * n))
        if not 0 < n_test < n:
            raise ConfigError(f"test_frac={test_frac} yields an unusable test split")
        test_idx = np.sort(split_rng.choice(n, size=n_test, replace=False))
    else:
        test_idx = fixed_test_idx
    return pool_mod.split(n, labels, cfg.pool.val_frac, test_idx, split_rng)


def _topk_accuracy(head: LinearHead, X, y, k: int) -> float:
    z = logits(head, np.asarray(X, dtype=np.float64))
    top = np.argsort(-z, axis=1, kind="stable")[:, :k]
    return float(np.mean((top == np.asarray(y)[:, None]).any(axis=1)))


@dataclass
class SeedRunResult:
    strategy: str
    seed: int
    records: list[RoundMetrics]
    log_path: Path


@dataclass
class ExperimentResult:
    runs: list[SeedRunResult]
    failures: dict[tuple[str, int], AlkitError]

    def logs_for(self, strategy: str) -> list[list[RoundMetrics]]:
        return [r.records for r in self.runs if r.strategy == strategy]


def run_dir(out_dir: str | Path, strategy: str, seed: int) -> Path:
    return Path(out_dir) / strategy / f"seed_{seed}"


def run_single(
    cfg: ExperimentConfig,
    strategy: StrategyConfig,
    seed: int,
    resume: bool = False,
    _stop_before_round: int | None = None,
) -> SeedRunResult:
    """Execute (or resume) one seed-run and return its records.

    ``_stop_before_round`` simulates an interruption: the run exits right
    before training that round, after its checkpoint was written.
    """
    cfg.validate()
    features, labels, fixed_test = build_dataset(cfg.data)
    state = _build_pool(cfg, features, labels, fixed_test, seed)
    cfg.check_pool_capacity(len(state.unlabeled))

    directory = run_dir(cfg.out_dir, strategy.name, seed)
    directory.mkdir(parents=True, exist_ok=True)
    log = feature_io.ResultsLog(directory / LOG_NAME)
    times_path = directory / TIMES_NAME
    ckpt_path = directory / CHECKPOINT_NAME
    expected_hash = config_hash(cfg, strategy, seed)

    strategy_rng = _stream(seed, _STRATEGY)
    K, b = cfg.pool.rounds, cfg.pool.budget

    if resume and ckpt_path.exists():
        ckpt = feature_io.read_checkpoint(ckpt_path)
        if ckpt.get("cfg_hash") != expected_hash:
            diffs = diff_summary(
                ckpt.get("config", {}), resolved_dict(cfg, strategy, seed)
            )
            raise CheckpointMismatch(
                "checkpoint belongs to a different configuration:\n  "
                + "\n  ".join(diffs or ["<hash mismatch>"])
            )
        state.labeled = [int(i) for i in ckpt["labeled"]]
        state.unlabeled = np.setdiff1d(state.unlabeled, np.asarray(state.labeled, np.int64))
        state.round = int(ckpt["round"])
        strategy_rng.bit_generator.state = ckpt["strategy_rng_state"]
        log.truncate_to_valid()
        start_round = state.round
    else:
        pool_mod.seed_initial(state, cfg.pool.initial_size, _stream(seed, _INIT))
        if log.path.exists():
            log.path.unlink()
        if times_path.exists():
            times_path.unlink()
        start_round = 0

    existing = {m.round: m for m in log.read()}
    if existing and max(existing) == K and len(existing) == K + 1:
        return SeedRunResult(strategy.name, seed, log.read(), log.path)

    val_X = features[state.val_idx]
    val_y = state.val_labels()
    test_X = features[state.test_idx]
    test_y = state.test_labels()
    records: list[RoundMetrics] = [existing[r] for r in sorted(existing) if r < start_round]

    for k in range(start_round, K + 1):
        if _stop_before_round is not None and k == _stop_before_round:
            return SeedRunResult(strategy.name, seed, records, log.path)
        train_seed = int(_stream_train_seed(seed, k, cfg.train.seed))
        round_cfg = dataclasses.replace(cfg.train, seed=train_seed)
        t0 = time.perf_counter()
        result = train(
            features[state.labeled_indices()],
            state.labeled_labels(),
            val_X,
            val_y,
            round_cfg,
            num_classes=state.num_classes,
        )
        train_seconds = time.perf_counter() - t0
        head = result.head

        dist, counts = class_histogram(state)
        ratio, empty_flag = imbalance_ratio(dist)
        metrics = RoundMetrics(
            round=k,
            strategy=strategy.name,
            seed=seed,
            labeled_size=len(state.labeled),
            test_accuracy=_topk_accuracy(head, test_X, test_y, 1),
            test_top5_accuracy=(
                _topk_accuracy(head, test_X, test_y, 5) if state.num_classes >= 5 else None
            ),
            best_val_accuracy=result.best_val_accuracy,
            imbalance_ratio=ratio,
            imbalance_empty_class=empty_flag,
            entropy=entropy(dist),
            class_counts=[int(c) for c in counts],
            train_seconds=train_seconds,
        )

        select_seconds = None
        if k < K:
            t0 = time.perf_counter()
            query = select(state, head, features, b, strategy, strategy_rng)
            select_seconds = time.perf_counter() - t0
            metrics.select_seconds = select_seconds

        if k in existing:
            if existing[k] != metrics:
                raise CheckpointMismatch(
                    f"resumed round {k} disagrees with the logged record"
                )
        else:
            feature_io.append_round(log, metrics)
            with open(times_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(metrics.timing_record()) + "\n")
        records.append(metrics)

        if k < K:
            pool_mod.commit_query(state, query, expected_size=b)
            feature_io.write_checkpoint(
                ckpt_path,
                {
                    "cfg_hash": expected_hash,
                    "config": resolved_dict(cfg, strategy, seed),
                    "seed": seed,
                    "round": state.round,
                    "labeled": list(state.labeled),
                    "strategy_rng_state": strategy_rng.bit_generator.state,
                },
            )

    return SeedRunResult(strategy.name, seed, records, log.path)


def _stream_train_seed(seed: int, round_k: int, base_train_seed: int) -> int:
    ss = np.random.SeedSequence([int(seed), _TRAIN, int(round_k), int(base_train_seed)])
    return int(ss.generate_state(1)[0])


def train_pool_size(cfg: ExperimentConfig, n_total: int, n_test: int) -> int:
    """Size of the AL train pool after the test and validation carves."""
    candidates = n_total - n_test
    n_val = int(round(cfg.pool.val_frac * candidates))
    return candidates - n_val


def _check_capacity_upfront(cfg: ExperimentConfig) -> None:
    if isinstance(cfg.data, SynthSource):
        spec = cfg.data.spec
        counts = synth.longtail_counts(
            spec.num_classes, spec.max_per_class, spec.imbalance_ratio
        )
        n_pool = sum(counts)
        n_test = cfg.data.test_per_class * spec.num_classes
        cfg.check_pool_capacity(train_pool_size(cfg, n_pool + n_test, n_test))
    elif isinstance(cfg.data, FilesSource):
        _check_files_exist(cfg.data)
        labels = feature_io.read_array(cfg.data.labels)
        n = len(labels)
        n_test = int(round(cfg.data.test_frac * n))
        cfg.check_pool_capacity(train_pool_size(cfg, n, n_test))


def run_experiment(cfg: ExperimentConfig, resume: bool = False, jobs: int = 1) -> ExperimentResult:
    """Run every configured (strategy, seed) pair.

    A strategy-contract violation aborts only its own seed-run; the rest
    continue and the failure is reported in the result. An infeasible
    budget refuses the whole experiment before any work.
    """
    cfg.validate()
    _check_capacity_upfront(cfg)
    tasks = [(strat, seed) for strat in cfg.strategies for seed in cfg.seeds]
    runs: list[SeedRunResult] = []
    failures: dict[tuple[str, int], AlkitError] = {}

    def _one(strat: StrategyConfig, seed: int):
        return run_single(cfg, strat, seed, resume=resume)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as ex:
            futures = {ex.submit(_one, s, sd): (s.name, sd) for s, sd in tasks}
            for fut, key in futures.items():
                try:
                    runs.append(fut.result())
                except ConfigError:
                    raise  # a bad config refuses the experiment outright
                except AlkitError as exc:
                    failures[key] = exc
    else:
        for strat, seed in tasks:
            try:
                runs.append(_one(strat, seed))
            except ConfigError:
                raise
            except AlkitError as exc:
                failures[(strat.name, seed)] = exc
    return ExperimentResult(runs, failures)


# ---------------------------------------------------------------------------
# aggregation


def aggregate(logs: list[list[RoundMetrics]]) -> list[dict]:
    """Per-round mean and 95% normal-approximation CI across seed-runs.

    Returns rows ``{round, metric, mean, ci_low, ci_high, strategy,
    n_seeds}`` for accuracy, imbalance ratio, and entropy (plus top-5
    accuracy when logged). With a single run the CI is undefined and
    reported as None.
    """
    if not logs:
        raise AggregationError("no logs to aggregate")
    rounds = [m.round for m in logs[0]]
    strategy = logs[0][0].strategy if logs[0] else "<empty>"
    for records in logs:
        if [m.round for m in records] != rounds:
            raise AggregationError("logs cover different round grids")
    metrics = ["test_accuracy", "imbalance_ratio", "entropy"]
    if logs[0] and logs[0][0].test_top5_accuracy is not None:
        metrics.insert(1, "test_top5_accuracy")
    m = len(logs)
    rows = []
    for i, rnd in enumerate(rounds):
        for name in metrics:
            values = np.asarray([getattr(records[i], name) for records in logs], dtype=np.float64)
            mean = float(values.mean())
            if m > 1:
                half = 1.96 * float(values.std(ddof=1)) / np.sqrt(m)
                lo, hi = mean - half, mean + half
            else:
                lo = hi = None
            rows.append(
                {
                    "round": rnd,
                    "metric": name,
                    "mean": mean,
                    "ci_low": lo,
                    "ci_high": hi,
                    "strategy": strategy,
                    "n_seeds": m,
                }
            )
    return rows


def resume_run(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Continue an interrupted experiment; finished runs are no-ops."""
    return run_experiment(cfg, resume=True, jobs=jobs)
