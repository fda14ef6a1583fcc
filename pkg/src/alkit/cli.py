"""Command-line entry point.

Thin shell over the library: every subcommand delegates to functions that
are importable and tested directly, so a CLI-driven run and a library-driven
run of the same config produce identical artifacts.

Exit codes: 0 success, 2 config error, 3 data error, 4 strategy-contract
violation, 5 training divergence. All errors print one machine-parseable
line to stderr: ``ERROR[<kind>]: <message>``.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import feature_io, pool as pool_mod, simulator, synth
from .config import ExperimentConfig, SynthSource, load_config
from .errors import (
    AlkitError,
    BudgetError,
    ConfigError,
    DivergenceError,
    FormatError,
    IntegrityError,
    SpecError,
    StrategyContractViolation,
)
from .geometry import boundary_scores
from .linear_head import train
from .records import RoundMetrics

_EXIT_CODES = (
    (ConfigError, 2, "config"),
    (SpecError, 2, "config"),
    (StrategyContractViolation, 4, "strategy-contract"),
    (DivergenceError, 5, "divergence"),
    (FormatError, 3, "data"),
    (IntegrityError, 3, "data"),
    (BudgetError, 3, "data"),
    (AlkitError, 3, "data"),
)


def _classify(exc: Exception) -> tuple[int, str]:
    for etype, code, kind in _EXIT_CODES:
        if isinstance(exc, etype):
            return code, kind
    return 1, "internal"


def _fail(exc: Exception) -> "SystemExit":
    # First stderr line is the machine-parseable one; any multi-line detail
    # (e.g. a config diff) follows unprefixed.
    code, kind = _classify(exc)
    first, _, rest = str(exc).partition("\n")
    click.echo(f"ERROR[{kind}]: {first}", err=True)
    if rest:
        click.echo(rest, err=True)
    return SystemExit(code)


def _fail_runs(failures: dict) -> "SystemExit":
    codes = set()
    for (name, seed), exc in failures.items():
        code, kind = _classify(exc)
        codes.add(code)
        click.echo(f"ERROR[{kind}]: {name} seed={seed}: {exc}", err=True)
    if 4 in codes:
        return SystemExit(4)
    if 5 in codes:
        return SystemExit(5)
    return SystemExit(3)


@click.group()
def main() -> None:
    """Feature-space active-learning toolkit."""


def _common_options(fn):
    fn = click.option("--config", "config_path", required=True, type=click.Path())(fn)
    fn = click.option("--set", "overrides", multiple=True, help="dotted.key=value override")(fn)
    fn = click.option("--out", "out_dir", default=None, help="output directory override")(fn)
    fn = click.option("--seeds", default=None, help="comma-separated seed list override")(fn)
    fn = click.option("--strategy", default=None, help="strategy name override")(fn)
    return fn


def _load(config_path, overrides, out_dir, seeds, strategy) -> ExperimentConfig:
    overrides = list(overrides)
    if out_dir is not None:
        overrides.append(f"run.out_dir={out_dir}")
    if seeds is not None:
        overrides.append(f"run.seeds=[{seeds}]")
    if strategy is not None:
        overrides.append(f"strategy.name={strategy}")
    return load_config(config_path, overrides)


# ---------------------------------------------------------------------------


@main.command("synth")
@_common_options
def cmd_synth(config_path, overrides, out_dir, seeds, strategy) -> None:
    """Generate the configured synthetic pool as array files plus a manifest."""
    try:
        cfg = _load(config_path, overrides, out_dir, seeds, strategy)
        if not isinstance(cfg.data, SynthSource):
            raise ConfigError("synth subcommand requires data.source = synth")
        spec = cfg.data.spec
        features, labels, _ = synth.generate(spec)
        counts = synth.longtail_counts(
            spec.num_classes, spec.max_per_class, spec.imbalance_ratio
        )
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        feature_io.write_array(out / "features.alfeat", features)
        feature_io.write_array(out / "labels.alfeat", labels)
        manifest = {
            "spec": {
                "num_classes": spec.num_classes,
                "feature_dim": spec.feature_dim,
                "max_per_class": spec.max_per_class,
                "imbalance_ratio": spec.imbalance_ratio,
                "class_separation": spec.class_separation,
                "noise_sigma": spec.noise_sigma,
                "seed": spec.seed,
            },
            "counts": counts,
            "n_total": int(sum(counts)),
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )
        click.echo(f"wrote {out / 'features.alfeat'} ({sum(counts)} x {spec.feature_dim})")
    except AlkitError as exc:
        raise _fail(exc)


@main.command("run")
@_common_options
@click.option("--jobs", default=1, type=int, help="parallel seed-runs")
def cmd_run(config_path, overrides, out_dir, seeds, strategy, jobs) -> None:
    """Run the configured experiment for every strategy and seed."""
    try:
        cfg = _load(config_path, overrides, out_dir, seeds, strategy)
        result = simulator.run_experiment(cfg, jobs=jobs)
        for run in result.runs:
            click.echo(f"{run.strategy} seed={run.seed}: {len(run.records)} rounds -> {run.log_path}")
        if result.failures:
            raise _fail_runs(result.failures)
    except AlkitError as exc:
        raise _fail(exc)


@main.command("resume")
@_common_options
@click.option("--jobs", default=1, type=int, help="parallel seed-runs")
def cmd_resume(config_path, overrides, out_dir, seeds, strategy, jobs) -> None:
    """Continue an interrupted experiment from its checkpoints."""
    try:
        cfg = _load(config_path, overrides, out_dir, seeds, strategy)
        result = simulator.run_experiment(cfg, resume=True, jobs=jobs)
        for run in result.runs:
            click.echo(f"{run.strategy} seed={run.seed}: complete ({len(run.records)} rounds)")
        if result.failures:
            raise _fail_runs(result.failures)
    except AlkitError as exc:
        raise _fail(exc)


# ---------------------------------------------------------------------------
# reporting


def collect_logs(log_dir: str | Path) -> dict[str, list[list[RoundMetrics]]]:
    """Read every results log under ``log_dir``, grouped by strategy name."""
    paths = sorted(Path(log_dir).rglob("*.aljsonl"))
    grouped: dict[str, list[list[RoundMetrics]]] = {}
    for path in paths:
        records = feature_io.ResultsLog(path).read()
        if records:
            grouped.setdefault(records[0].strategy, []).append(records)
    if not grouped:
        raise ConfigError(f"no result logs found under {log_dir}")
    return grouped


def write_report(log_dir: str | Path, out_dir: str | Path) -> dict[str, Path]:
    """Emit summary, histogram, and entropy CSVs for all logs in a directory."""
    grouped = collect_logs(log_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary_path = out / "summary.csv"
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "metric", "mean", "ci_low", "ci_high", "strategy", "n_seeds"])
        for name in sorted(grouped):
            for row in simulator.aggregate(grouped[name]):
                writer.writerow(
                    [
                        row["round"],
                        row["metric"],
                        f"{row['mean']:.10g}",
                        "" if row["ci_low"] is None else f"{row['ci_low']:.10g}",
                        "" if row["ci_high"] is None else f"{row['ci_high']:.10g}",
                        row["strategy"],
                        row["n_seeds"],
                    ]
                )

    hist_path = out / "histograms.csv"
    with open(hist_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        num_classes = len(next(iter(grouped.values()))[0][0].class_counts)
        writer.writerow(["strategy", "round"] + [f"p{i}" for i in range(num_classes)])
        for name in sorted(grouped):
            logs = grouped[name]
            for i, rnd in enumerate([m.round for m in logs[0]]):
                sorted_props = np.stack(
                    [
                        np.sort(np.asarray(records[i].class_counts, dtype=np.float64))
                        / records[i].labeled_size
                        for records in logs
                    ]
                )
                mean_props = sorted_props.mean(axis=0)
                writer.writerow([name, rnd] + [f"{p:.10g}" for p in mean_props])

    entropy_path = out / "entropy.csv"
    with open(entropy_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "round", "mean", "ci_low", "ci_high", "n_seeds"])
        for name in sorted(grouped):
            for row in simulator.aggregate(grouped[name]):
                if row["metric"] != "entropy":
                    continue
                writer.writerow(
                    [
                        name,
                        row["round"],
                        f"{row['mean']:.10g}",
                        "" if row["ci_low"] is None else f"{row['ci_low']:.10g}",
                        "" if row["ci_high"] is None else f"{row['ci_high']:.10g}",
                        row["n_seeds"],
                    ]
                )
    return {"summary": summary_path, "histograms": hist_path, "entropy": entropy_path}


@main.command("report")
@click.option("--logs", "log_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", default=None, help="report directory (default: logs dir)")
def cmd_report(log_dir, out_dir) -> None:
    """Aggregate result logs into summary/histogram/entropy CSV tables."""
    try:
        paths = write_report(log_dir, out_dir or log_dir)
        for kind, path in paths.items():
            click.echo(f"{kind}: {path}")
    except AlkitError as exc:
        raise _fail(exc)


# ---------------------------------------------------------------------------
# inspection


@main.command("inspect")
@_common_options
@click.option("--limit", default=100000, type=int, help="refuse pools larger than this")
def cmd_inspect(config_path, overrides, out_dir, seeds, strategy, limit) -> None:
    """Train a round-0 head and dump boundary distances for the unlabeled pool."""
    try:
        cfg = _load(config_path, overrides, out_dir, seeds, strategy)
        seed = cfg.seeds[0]
        features, labels, fixed_test = simulator.build_dataset(cfg.data)
        state = simulator._build_pool(cfg, features, labels, fixed_test, seed)
        pool_mod.seed_initial(
            state, cfg.pool.initial_size, simulator._stream(seed, simulator._INIT)
        )
        if len(state.unlabeled) > limit:
            raise ConfigError(
                f"unlabeled pool of {len(state.unlabeled)} exceeds inspect limit {limit}"
            )
        result = train(
            features[state.labeled_indices()],
            state.labeled_labels(),
            features[state.val_idx],
            state.val_labels(),
            cfg.train,
            num_classes=state.num_classes,
        )
        scores = boundary_scores(result.head, features[state.unlabeled])
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "boundary_scores.csv"
        C = state.num_classes
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "ddb"] + [f"dcsdb_{c}" for c in range(C)])
            for i, idx in enumerate(state.unlabeled):
                writer.writerow(
                    [int(idx), f"{scores.ddb[i]:.10g}"]
                    + [f"{scores.dcsdb[i, c]:.10g}" for c in range(C)]
                )
        for c in range(C):
            col = scores.dcsdb[:, c]
            pos = int(np.argmin(col))
            click.echo(
                f"class {c}: min dcsdb {col[pos]:.6g} at index {int(state.unlabeled[pos])}"
            )
        click.echo(f"wrote {path}")
    except AlkitError as exc:
        raise _fail(exc)


if __name__ == "__main__":
    main()
