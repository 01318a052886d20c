"""Command-line interface: run experiments, aggregate reports, make data.

Subcommands:
    run     execute an experiment from a TOML config (plus optional preset)
    report  aggregate finished run directories into tables, plot data, and
            rendered figures
    synth   generate a synthetic feature file

Output locations resolve in this order: explicit --out flag, the
BOSSAL_OUT environment variable, then ./bossal-out.  Exit codes: 0 on
success, 1 on runtime failure, 2 on invalid input or config.
"""

import argparse
import os
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .baselines import CdoConfig, SasConfig
from .boss import BossConfig
from .data import (
    SyntheticSpec,
    generate_synthetic,
    load_feature_file,
    write_feature_file,
)
from .errors import FormatError, ValidationError
from .harness import ExperimentConfig, run_experiment
from .model import TrainConfig
from .plotting import PLOTTERS
from .reports import (
    aulc_table,
    build_manifest,
    check_runs_compatible,
    curves_table,
    load_run,
    picks_table,
    relative_table,
    summarize,
    write_curves_csv,
    write_json,
    write_table_csv,
    write_table_dat,
)

# Named bundles: the oracle budget ladder plus the hand-aligned
# budget-matched settings for the four reference feature sets.
PRESETS = {
    "boss": {"selector": "boss", "boss": {"num_batches": 100, "assess_epochs": 50}},
    "boss-s": {"selector": "boss", "boss": {"num_batches": 50, "assess_epochs": 25}},
    "boss-xs": {"selector": "boss", "boss": {"num_batches": 25, "assess_epochs": 10}},
    "boss-xxs": {"selector": "boss", "boss": {"num_batches": 10, "assess_epochs": 5}},
    "cdo-cifar10": {"selector": "cdo", "b": 10, "cdo": {"m": 20}},
    "cdo-snacks": {"selector": "cdo", "b": 20, "cdo": {"m": 10}},
    "cdo-dopanim": {"selector": "cdo", "b": 50, "cdo": {"m": 4}},
    "cdo-dtd": {"selector": "cdo", "b": 50, "cdo": {"m": 3}},
    "sas-cifar10": {
        "selector": "sas-batch",
        "b": 10,
        "sas": {"anneal_steps": 250, "greedy_steps": 10},
    },
    "sas-snacks": {
        "selector": "sas-batch",
        "b": 20,
        "sas": {"anneal_steps": 225, "greedy_steps": 10},
    },
    "sas-dopanim": {
        "selector": "sas-batch",
        "b": 50,
        "sas": {"anneal_steps": 215, "greedy_steps": 10},
    },
    "sas-dtd": {
        "selector": "sas-batch",
        "b": 50,
        "sas": {"anneal_steps": 150, "greedy_steps": 10},
    },
}

_TABLES = {
    "curves": curves_table,
    "relative": relative_table,
    "aulc": aulc_table,
    "picks": picks_table,
}

_TOP_FIELDS = {
    "name",
    "selector",
    "b",
    "cycles",
    "repetitions",
    "master_seed",
    "eval_fraction",
    "dataset",
    "train",
    "boss",
    "cdo",
    "sas",
}

_SYNTH_FIELDS = {
    "classes",
    "dim",
    "per_class",
    "spread",
    "separation",
    "seed",
    "name",
}


def deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"{path}: invalid TOML: {exc}") from None


def _section(raw: dict, key: str, cls, **rename):
    data = raw.get(key)
    if data is None:
        return None
    if not isinstance(data, dict):
        raise ValidationError(f"config field '{key}' must be a table")
    kwargs = {rename.get(k, k): v for k, v in data.items()}
    if "strategies" in kwargs:
        strategies = kwargs["strategies"]
        if not isinstance(strategies, (list, tuple)):
            raise ValidationError(f"config field '{key}.strategies' must be a list")
        kwargs["strategies"] = tuple(strategies)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"config section '{key}': {exc}") from None
    except ValidationError as exc:
        raise ValidationError(f"config section '{key}': {exc}") from None


def _require_int(raw, field, default=None):
    value = raw.get(field, default)
    if value is None:
        raise ValidationError(f"config field '{field}' is required")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"config field '{field}': expected an integer")
    return value


def build_config(raw: dict) -> ExperimentConfig:
    """Validate a merged config mapping into an ExperimentConfig."""
    unknown = set(raw) - _TOP_FIELDS
    if unknown:
        raise ValidationError(f"unknown config field '{sorted(unknown)[0]}'")
    selector = raw.get("selector")
    if not isinstance(selector, str):
        raise ValidationError("config field 'selector' is required (a string)")
    eval_fraction = raw.get("eval_fraction", 0.2)
    if not isinstance(eval_fraction, (int, float)) or isinstance(eval_fraction, bool):
        raise ValidationError("config field 'eval_fraction': expected a number")
    try:
        return ExperimentConfig(
            selector=selector,
            b=_require_int(raw, "b"),
            cycles=_require_int(raw, "cycles", 20),
            repetitions=_require_int(raw, "repetitions", 10),
            master_seed=_require_int(raw, "master_seed", 0),
            eval_fraction=float(eval_fraction),
            train=_section(raw, "train", TrainConfig) or TrainConfig(),
            boss=_section(raw, "boss", BossConfig),
            cdo=_section(raw, "cdo", CdoConfig),
            sas=_section(raw, "sas", SasConfig),
            dataset=raw.get("dataset"),
            name=str(raw.get("name", "")),
        )
    except TypeError as exc:
        raise ValidationError(f"config: {exc}") from None


def materialize_dataset(ref):
    """Resolve the config's dataset reference into a Dataset."""
    if ref is None:
        raise ValidationError(
            "config field 'dataset' is required "
            "(a feature-file path or a [dataset.synthetic] table)"
        )
    if isinstance(ref, str):
        try:
            return load_feature_file(ref)
        except FileNotFoundError:
            raise ValidationError(f"dataset file not found: {ref}") from None
    if isinstance(ref, dict):
        synth = ref.get("synthetic")
        if synth is None or set(ref) != {"synthetic"}:
            raise ValidationError(
                "config field 'dataset': expected a path string or a "
                "[dataset.synthetic] table"
            )
        unknown = set(synth) - _SYNTH_FIELDS
        if unknown:
            raise ValidationError(
                f"unknown config field 'dataset.synthetic.{sorted(unknown)[0]}'"
            )
        try:
            spec = SyntheticSpec(
                num_classes=synth["classes"],
                dim=synth["dim"],
                per_class=synth["per_class"],
                cluster_spread=synth["spread"],
                class_separation=synth["separation"],
                seed=synth.get("seed", 0),
                name=synth.get("name", "synthetic"),
            )
        except KeyError as exc:
            raise ValidationError(
                f"config field 'dataset.synthetic.{exc.args[0]}' is required"
            ) from None
        return generate_synthetic(spec)
    raise ValidationError("config field 'dataset': unsupported value type")


def _out_root(flag_value) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("BOSSAL_OUT")
    if env:
        return Path(env)
    return Path("bossal-out")


def cmd_run(args) -> int:
    started = time.time()
    raw: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ValidationError(
                f"unknown preset {args.preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        raw = deep_merge(raw, PRESETS[args.preset])
    if args.config:
        raw = deep_merge(raw, load_toml(args.config))
    if not raw:
        raise ValidationError("run needs --config and/or --preset")
    if args.seed is not None:
        if not (0 <= args.seed < 2**64):
            raise ValidationError("--seed must fit in an unsigned 64-bit integer")
        raw["master_seed"] = args.seed
    cfg = build_config(raw)
    dataset = materialize_dataset(cfg.dataset)
    if args.out:
        out_dir = Path(args.out)
    else:
        out_dir = _out_root(None) / (cfg.name or "run")
    out_dir.mkdir(parents=True, exist_ok=True)

    curves = run_experiment(cfg, dataset, jobs=args.jobs)

    curves_path = out_dir / "curves.csv"
    summary_path = out_dir / "summary.json"
    manifest_path = out_dir / "manifest.json"
    write_curves_csv(curves_path, curves)
    write_json(summary_path, summarize(cfg, curves))
    manifest = build_manifest(
        cfg,
        dataset,
        [curves_path, summary_path],
        started,
        time.time(),
        __version__,
    )
    write_json(manifest_path, manifest)
    print(f"run complete: {out_dir}")
    return 0


def cmd_report(args) -> int:
    runs = [load_run(d) for d in args.runs]
    check_runs_compatible(runs)
    header, rows = _TABLES[args.mode](runs)
    out_dir = _out_root(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{args.mode}.csv"
    dat_path = out_dir / f"{args.mode}.dat"
    png_path = out_dir / f"{args.mode}.png"
    write_table_csv(csv_path, header, rows)
    write_table_dat(dat_path, header, rows)
    PLOTTERS[args.mode](rows, png_path)
    for path in (csv_path, dat_path, png_path):
        print(path)
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        num_classes=args.classes,
        dim=args.dim,
        per_class=args.per_class,
        cluster_spread=args.spread,
        class_separation=args.separation,
        seed=args.seed,
        name=args.name,
    )
    dataset = generate_synthetic(spec)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_feature_file(dataset, out)
    print(
        f"wrote {out}: {dataset.n} instances, dim {dataset.dim}, "
        f"{dataset.num_classes} classes"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bossal",
        description="Active-learning simulations over precomputed features.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config")
    run_p.add_argument("--config", help="TOML experiment config")
    run_p.add_argument(
        "--preset",
        help=f"named settings bundle ({', '.join(sorted(PRESETS))})",
    )
    run_p.add_argument("--out", help="output directory (default: BOSSAL_OUT or ./bossal-out, plus the run name)")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel repetitions")
    run_p.add_argument("--seed", type=int, help="override master_seed (u64)")
    run_p.set_defaults(func=cmd_run)

    rep_p = sub.add_parser("report", help="aggregate finished runs")
    rep_p.add_argument("runs", nargs="+", help="run directories")
    rep_p.add_argument(
        "--mode",
        required=True,
        choices=sorted(_TABLES),
        help="curves: mean accuracy; relative: delta vs the random run; "
        "aulc: windowed means; picks: oracle pick frequencies",
    )
    rep_p.add_argument("--out", help="output directory")
    rep_p.set_defaults(func=cmd_report)

    synth_p = sub.add_parser("synth", help="generate a synthetic feature file")
    synth_p.add_argument("--classes", type=int, required=True)
    synth_p.add_argument("--dim", type=int, required=True)
    synth_p.add_argument("--per-class", dest="per_class", type=int, required=True)
    synth_p.add_argument("--spread", type=float, required=True)
    synth_p.add_argument("--separation", type=float, required=True)
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--name", default="synthetic")
    synth_p.add_argument("--out", required=True, help="output feature-file path")
    synth_p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValidationError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
