"""Run outputs and report aggregation.

A finished run directory holds three files: ``curves.csv`` (one row per
repetition and cycle), ``summary.json`` (per-regime AULC and cost totals),
and ``manifest.json`` (config hash, engine version, timestamps).  The CSV
and JSON layouts are versioned; curve CSV bytes are a pure function of the
experiment config and dataset, which is what makes replay checks possible.

Report modes aggregate one or more run directories into a delimited table
(CSV), a gnuplot-friendly columnar text file (.dat), and a rendered figure.
This module owns the tables; figures live in plotting.
"""

import csv
import hashlib
import io
import json

import numpy as np

from dataclasses import asdict, dataclass

from .data import Dataset
from .errors import FormatError, ValidationError
from .harness import ExperimentConfig, LearningCurve, aulc, pick_frequencies

CURVE_COLUMNS = (
    "repetition",
    "cycle",
    "labeled_size",
    "accuracy",
    "picked_strategy",
    "retrain_count",
    "processed_instances",
)

SUMMARY_FORMAT_VERSION = 1
MANIFEST_FORMAT_VERSION = 1


def _stderr(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return 0.0
    return float(arr.std(ddof=1) / np.sqrt(arr.size))


def write_curves_csv(path, curves) -> None:
    """One row per (repetition, cycle); byte-stable for fixed inputs."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for curve in curves:
            for c in range(curve.accuracies.size):
                writer.writerow(
                    [
                        curve.repetition,
                        c,
                        int(curve.labeled_sizes[c]),
                        repr(float(curve.accuracies[c])),
                        curve.picked_strategy[c],
                        int(curve.retrain_counts[c]),
                        int(curve.processed_instances[c]),
                    ]
                )


def read_curves_csv(path) -> list:
    """Inverse of write_curves_csv (picked index sets are not stored)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty curve file") from None
        if tuple(header) != CURVE_COLUMNS:
            raise FormatError(
                f"{path}: unexpected curve columns {header!r}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CURVE_COLUMNS):
                raise FormatError(f"{path}:{lineno}: wrong field count")
            try:
                rows.append(
                    (
                        int(row[0]),
                        int(row[1]),
                        int(row[2]),
                        float(row[3]),
                        row[4],
                        int(row[5]),
                        int(row[6]),
                    )
                )
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    by_rep = {}
    for rep, cycle, size, acc, pick, retrains, processed in rows:
        by_rep.setdefault(rep, []).append(
            (cycle, size, acc, pick, retrains, processed)
        )
    curves = []
    for rep in sorted(by_rep):
        entries = sorted(by_rep[rep])
        cycles = [e[0] for e in entries]
        if cycles != list(range(len(entries))):
            raise FormatError(
                f"{path}: repetition {rep} has non-contiguous cycles"
            )
        curves.append(
            LearningCurve(
                repetition=rep,
                accuracies=np.array([e[2] for e in entries]),
                labeled_sizes=np.array([e[1] for e in entries], dtype=np.int64),
                picked_strategy=[e[3] for e in entries],
                picked_indices=[np.empty(0, dtype=np.int64)] * len(entries),
                retrain_counts=np.array([e[4] for e in entries], dtype=np.int64),
                processed_instances=np.array(
                    [e[5] for e in entries], dtype=np.int64
                ),
            )
        )
    if not curves:
        raise FormatError(f"{path}: no curve rows")
    return curves


def _available_regimes(n_cycles: int):
    return ("full", "low", "mid", "high") if n_cycles >= 20 else ("full",)


def cost_formula(cfg: ExperimentConfig) -> str:
    """Human-readable per-cycle processed-instance formula for the selector."""
    b = cfg.b
    if cfg.selector == "boss":
        t_hat = cfg.boss.batches_per_strategy
        return (
            f"{t_hat} * {len(cfg.boss.strategies)} * (labeled_size + {b}) "
            "instances per cycle"
        )
    if cfg.selector == "cdo":
        return (
            f"{cfg.cdo.m} * ({b} * labeled_size + {b * (b + 1) // 2}) "
            "instances per cycle"
        )
    if cfg.selector == "sas-batch":
        return (
            f"({cfg.sas.anneal_steps} + {cfg.sas.greedy_steps}) * "
            f"(labeled_size + {b}) instances per cycle"
        )
    return "no selection retraining"


def summarize(cfg: ExperimentConfig, curves) -> dict:
    """Aggregate curves into the summary.json payload."""
    if not curves:
        raise ValidationError("no curves to summarize")
    acc = np.stack([c.accuracies for c in curves])
    aulc_block = {}
    for regime in _available_regimes(cfg.cycles):
        vals = [aulc(c.accuracies, regime) for c in curves]
        aulc_block[regime] = {
            "mean": float(np.mean(vals)),
            "stderr": _stderr(vals),
        }
    has_picks = all(
        all(p != "" for p in c.picked_strategy[1:]) for c in curves
    )
    return {
        "format_version": SUMMARY_FORMAT_VERSION,
        "name": cfg.name,
        "selector": cfg.selector,
        "b": cfg.b,
        "cycles": cfg.cycles,
        "repetitions": len(curves),
        "master_seed": cfg.master_seed,
        "aulc": aulc_block,
        "initial_accuracy": {
            "mean": float(acc[:, 0].mean()),
            "stderr": _stderr(acc[:, 0]),
        },
        "final_accuracy": {
            "mean": float(acc[:, -1].mean()),
            "stderr": _stderr(acc[:, -1]),
        },
        "cost": {
            "formula": cost_formula(cfg),
            "total_retrains_mean": float(
                np.mean([c.retrain_counts.sum() for c in curves])
            ),
            "total_processed_instances_mean": float(
                np.mean([c.processed_instances.sum() for c in curves])
            ),
        },
        "has_pick_records": bool(has_picks),
    }


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from None


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain JSON-ready mapping of the config (tuples become lists)."""

    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    return clean(asdict(cfg))


def config_hash(config_dict: dict) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON encoding.

    Key order of the input mapping does not affect the digest.
    """
    canonical = json.dumps(
        config_dict, sort_keys=True, separators=(",", ":"), ensure_ascii=True
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dataset_fingerprint(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(dataset.name.encode("utf-8"))
    h.update(np.int64(dataset.num_classes).tobytes())
    h.update(dataset.labels.astype("<i4").tobytes())
    h.update(dataset.features.astype("<f4").tobytes())
    return h.hexdigest()


def build_manifest(
    cfg: ExperimentConfig,
    dataset: Dataset,
    output_paths,
    started: float,
    finished: float,
    engine_version: str,
) -> dict:
    cfg_dict = config_to_dict(cfg)
    return {
        "format_version": MANIFEST_FORMAT_VERSION,
        "engine_version": engine_version,
        "config": cfg_dict,
        "config_sha256": config_hash(cfg_dict),
        "dataset": {
            "name": dataset.name,
            "instances": dataset.n,
            "dim": dataset.dim,
            "num_classes": dataset.num_classes,
            "sha256": dataset_fingerprint(dataset),
        },
        "outputs": sorted(str(p) for p in output_paths),
        "started_unix": started,
        "finished_unix": finished,
    }


@dataclass
class RunData:
    """One loaded run directory: identity, summary payload, curves."""

    name: str
    summary: dict
    curves: list

    @property
    def cycles(self) -> int:
        return int(self.summary["cycles"])

    @property
    def accuracy_matrix(self) -> np.ndarray:
        return np.stack([c.accuracies for c in self.curves])


def load_run(run_dir) -> RunData:
    """Load summary.json and curves.csv from a finished run directory."""
    import os

    summary_path = os.path.join(str(run_dir), "summary.json")
    curves_path = os.path.join(str(run_dir), "curves.csv")
    for path in (summary_path, curves_path):
        if not os.path.exists(path):
            raise ValidationError(
                f"{run_dir}: not a run directory (missing {os.path.basename(path)})"
            )
    summary = read_json(summary_path)
    if summary.get("format_version") != SUMMARY_FORMAT_VERSION:
        raise FormatError(
            f"{summary_path}: unsupported summary format_version "
            f"{summary.get('format_version')!r}"
        )
    curves = read_curves_csv(curves_path)
    name = summary.get("name") or os.path.basename(os.path.normpath(str(run_dir)))
    return RunData(name=name, summary=summary, curves=curves)


def check_runs_compatible(runs) -> None:
    """Report inputs must share the cycle count and batch size."""
    if not runs:
        raise ValidationError("no run directories given")
    first = runs[0].summary
    for run in runs[1:]:
        for key in ("cycles", "b"):
            if run.summary.get(key) != first.get(key):
                raise ValidationError(
                    f"runs {runs[0].name} and {run.name} disagree on {key}: "
                    f"{first.get(key)} vs {run.summary.get(key)}"
                )


def curves_table(runs):
    """Mean learning curve with standard errors, one block per run."""
    header = ("run", "cycle", "labeled_size", "mean_accuracy", "stderr")
    rows = []
    for run in runs:
        acc = run.accuracy_matrix
        sizes = runs_labeled_sizes(run)
        for c in range(acc.shape[1]):
            rows.append(
                (
                    run.name,
                    c,
                    int(sizes[c]),
                    float(acc[:, c].mean()),
                    _stderr(acc[:, c]),
                )
            )
    return header, rows


def runs_labeled_sizes(run: RunData) -> np.ndarray:
    return run.curves[0].labeled_sizes


def relative_table(runs):
    """Accuracy difference against the random-selector run, per cycle.

    The baseline is the mean curve of the (single) run whose selector is
    ``random``; every run, including the baseline itself, is reported as
    per-repetition differences against that mean.
    """
    baselines = [r for r in runs if r.summary.get("selector") == "random"]
    if not baselines:
        raise ValidationError(
            "relative mode requires a run with selector=random among inputs"
        )
    base = baselines[0].accuracy_matrix.mean(axis=0)
    header = ("run", "cycle", "mean_delta", "stderr")
    rows = []
    for run in runs:
        delta = run.accuracy_matrix - base[None, :]
        for c in range(delta.shape[1]):
            rows.append(
                (run.name, c, float(delta[:, c].mean()), _stderr(delta[:, c]))
            )
    return header, rows


def aulc_table(runs):
    header = ("run", "regime", "mean", "stderr")
    rows = []
    for run in runs:
        for regime in _available_regimes(run.cycles):
            vals = [aulc(c.accuracies, regime) for c in run.curves]
            rows.append((run.name, regime, float(np.mean(vals)), _stderr(vals)))
    return header, rows


def picks_table(runs):
    """Per-cycle pick frequencies; every input run must carry pick records."""
    header = ("run", "cycle", "strategy", "frequency")
    rows = []
    for run in runs:
        if not run.summary.get("has_pick_records", False):
            raise ValidationError(
                f"run {run.name} has no pick records; picks mode needs oracle runs"
            )
        strategies, freq = pick_frequencies(run.curves)
        for c in range(freq.shape[0]):
            for s, strategy in enumerate(strategies):
                rows.append((run.name, c + 1, strategy, float(freq[c, s])))
    return header, rows


def format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def write_table_dat(path, header, rows) -> None:
    """Whitespace-separated columns with a comment header.

    Rows are grouped into gnuplot index blocks (separated by two blank
    lines) whenever the value in the first column changes; string cells
    have spaces replaced by underscores so columns stay aligned.
    """
    buf = io.StringIO()
    buf.write("# " + " ".join(header) + "\n")
    prev_key = None
    for row in rows:
        if prev_key is not None and row[0] != prev_key:
            buf.write("\n\n")
        prev_key = row[0]
        cells = [format_cell(v).replace(" ", "_") for v in row]
        buf.write(" ".join(cells) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())
