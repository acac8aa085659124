"""``genmeter`` command line.

    genmeter [--config FILE] [--seed N ...] [--out DIR] [--preset desk|paper] <command> ...

Commands: eval, nnd-grid, adversarial, probe, train, comp, dataset gen.
Exit codes: 0 success, 2 configuration/input error, 3 numeric divergence,
4 I/O or file-format error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config, parse_value
from .errors import ConfigError, DataFormatError, GenmeterError, TrainingDiverged
from .experiments import RUNNERS, SCHEMAS, Table
from .plots import gnuplot_script, render_png
from .report import rows_to_csv

COMMAND_KINDS = {
    "eval": "metrics",
    "nnd-grid": "nnd_noise_grid",
    "adversarial": "adversarial",
    "probe": "monotonicity",
    "train": "train_gan",
    "comp": "comp_sweep",
    "dataset": "dataset",
}


def _list(text):
    v = parse_value(text)
    return v if isinstance(v, list) else [v]


def _common(suppress: bool) -> argparse.ArgumentParser:
    # sub-command copies use SUPPRESS so they do not overwrite values given before the command
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=d(None), help="INI-style or JSON experiment config")
    common.add_argument("--seed", type=int, nargs="+", default=d(None), help="seed(s); override the config")
    common.add_argument("--out", type=Path, default=d(None), help="output directory (default runs/<kind>)")
    common.add_argument("--preset", choices=("desk", "paper"), default=d(None), help="training scale preset")
    common.add_argument("--jobs", type=int, default=d(1), help="parallel worker processes")
    common.add_argument("--no-png", action="store_true", default=d(False), help="skip matplotlib rendering")
    common.add_argument("--param", action="append", metavar="KEY=VALUE", default=d(None),
                        help="[data] entry (sampler family/parameters), value parsed as JSON")
    return common


def build_parser() -> argparse.ArgumentParser:
    top, common = _common(False), _common(True)
    p = argparse.ArgumentParser(prog="genmeter", description=__doc__.split("\n")[0], parents=[top])
    p.add_argument("--version", action="version", version=f"genmeter {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eval", parents=[common], help="metric suite on one generator")
    s.add_argument("--generator", help="generator id, e.g. memorizer:100:0.5 or ckpt:path")
    s.add_argument("--train", dest="train_path", help="training dataset file")
    s.add_argument("--test", dest="test_path", help="test dataset file")

    s = sub.add_parser("nnd-grid", parents=[common], help="NND over memorizer noise x subset size")
    s.add_argument("--epsilons", type=_list)
    s.add_argument("--sizes", type=_list, help='subset sizes; "full" = whole training set')
    s.add_argument("--protocols", type=_list)
    s.add_argument("--m", type=int, help="fixed-protocol generated set size")

    sub.add_parser("adversarial", parents=[common], help="minimal fooling datasets per metric")

    s = sub.add_parser("probe", parents=[common], help="monotonicity probe over generated set sizes")
    s.add_argument("--sizes", type=_list)
    s.add_argument("--metrics", type=_list)
    s.add_argument("--n-seeds", dest="n_seeds", type=int)
    s.add_argument("--m", type=int, help="test set size")

    s = sub.add_parser("train", parents=[common], help="train GAN variants and evaluate checkpoints")
    s.add_argument("--variants", type=_list)
    s.add_argument("--epochs", type=int)

    s = sub.add_parser("comp", parents=[common], help="path-speed complexity of generators")
    s.add_argument("--generators", type=_list)
    s.add_argument("--n-pairs", dest="n_pairs", type=int)
    s.add_argument("--T", type=int)

    s = sub.add_parser("dataset", parents=[common], help="dataset utilities")
    dsub = s.add_subparsers(dest="action", required=True)
    g = dsub.add_parser("gen", parents=[common], help="sample a synthetic dataset to a file")
    g.add_argument("--family")
    g.add_argument("--dim", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--path", help="file name inside --out; .csv for text, anything else binary")
    return p


_OVERRIDES = {
    "eval": {"generator": ("generator", "id"), "train_path": ("data", "train_path"),
             "test_path": ("data", "test_path")},
    "nnd-grid": {"epsilons": ("grid", "epsilons"), "sizes": ("grid", "sizes"),
                 "protocols": ("grid", "protocols"), "m": ("grid", "m")},
    "probe": {"sizes": ("probe", "sizes"), "metrics": ("probe", "metrics"),
              "n_seeds": ("probe", "n_seeds"), "m": ("probe", "m")},
    "train": {"variants": ("gan", "variants"), "epochs": ("gan", "epochs")},
    "comp": {"generators": ("comp", "generators"), "n_pairs": ("comp", "n_pairs"), "T": ("comp", "T")},
    "dataset": {"family": ("data", "family"), "dim": ("data", "dim"), "n": ("data", "n"),
                "path": ("data", "path")},
}


def config_from_args(args) -> ExperimentConfig:
    kind = COMMAND_KINDS[args.command]
    cfg = load_config(args.config, kind) if args.config else ExperimentConfig(kind=kind)
    if cfg.kind != kind:
        raise ConfigError(f"config describes a {cfg.kind!r} experiment, command needs {kind!r}")
    sections = {k: dict(v) for k, v in cfg.sections.items()}
    for attr, (sec, key) in _OVERRIDES.get(args.command, {}).items():
        value = getattr(args, attr, None)
        if value is not None:
            sections.setdefault(sec, {})[key] = value
    for item in getattr(args, "param", []) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        sections.setdefault("data", {})[key.strip()] = parse_value(value)
    seeds = args.seed if args.seed is not None else cfg.seeds
    preset = args.preset or cfg.preset
    return ExperimentConfig(kind=kind, seeds=list(seeds), preset=preset, sections=sections)


def _check_schema(table: Table):
    expected = SCHEMAS.get(table.name)
    if expected is None or tuple(table.columns) != tuple(expected):
        raise ConfigError(f"table {table.name!r} does not match its registered schema")
    for row in table.rows:
        if len(row) != len(expected):
            raise ConfigError(f"table {table.name!r}: row {row!r} has {len(row)} fields, expected {len(expected)}")
        for v in row:
            if not isinstance(v, (str, int, float, bool)) and not hasattr(v, "dtype"):
                raise ConfigError(f"table {table.name!r}: unsupported value {v!r}")


def write_table(out: Path, table: Table, png=True) -> dict:
    _check_schema(table)
    text = rows_to_csv(table.columns, table.rows)
    path = out / f"{table.name}.csv"
    path.write_text(text)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh))
    if tuple(header) != tuple(table.columns):
        raise DataFormatError(f"{path}: header check failed after write")
    script = out / f"{table.name}.gp"
    script.write_text(gnuplot_script(table, path.name, f"{table.name}.png"))
    rendered = png and render_png(table, out / f"{table.name}.png")
    return {"file": path.name, "columns": list(table.columns), "rows": len(table.rows),
            "sha256": hashlib.sha256(text.encode()).hexdigest(), "plot_script": script.name,
            "figure": f"{table.name}.png" if rendered else None}


def run_experiment(cfg: ExperimentConfig, out: Path, n_jobs=1, png=True, command=None) -> list:
    """Run one experiment into ``out``; returns the manifest's output records."""
    cfg.check_paths()
    out.mkdir(parents=True, exist_ok=True)
    tables = RUNNERS[cfg.kind](cfg, out, n_jobs)
    outputs = [write_table(out, t, png) for t in tables]
    manifest = {"genmeter_version": __version__, "command": command or cfg.kind,
                "config": cfg.echo(), "seeds": list(cfg.seeds), "outputs": outputs}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return outputs


def _error_record(exc, out):
    rec = {"error": type(exc).__name__, "message": str(exc),
           "exit_code": getattr(exc, "exit_code", 1)}
    if isinstance(exc, TrainingDiverged):
        rec["iteration"] = exc.iteration
    if isinstance(exc, DataFormatError) and exc.line is not None:
        rec["line"] = exc.line
    text = json.dumps(rec, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return rec["exit_code"]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        cfg = config_from_args(args)
        out = out or Path("runs") / cfg.kind
        outputs = run_experiment(cfg, out, args.jobs, png=not args.no_png, command=args.command)
    except GenmeterError as exc:
        return _error_record(exc, out)
    except OSError as exc:
        return _error_record(DataFormatError(str(exc)), out)
    for rec in outputs:
        print(f"{out / rec['file']}  rows={rec['rows']}  sha256={rec['sha256'][:12]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
