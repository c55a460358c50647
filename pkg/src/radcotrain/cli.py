"""Command-line entry point: ``radcotrain {parse,generate,experiment,sweep}``.

Settings resolve in three layers: built-in defaults, then a YAML file given
with ``--config``, then explicit flags. Every run writes the resolved values
to ``config-resolved.yaml`` in its output directory; passing that file back
through ``--config`` reproduces the run.

Relative output directories are placed under ``$RADCOTRAIN_OUTPUT_ROOT``
when it is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from filelock import FileLock, Timeout

from radcotrain.corpus import TASKS, Report, UnlabeledDataset, load_labeled, load_unlabeled, save_jsonl, save_labeled
from radcotrain.engine import CotrainConfig
from radcotrain.errors import ConfigError, RadCotrainError
from radcotrain.experiment import (
    SWEEP_AXES,
    check_sweep_values,
    needs_pool,
    resolve_settings,
    run_experiment,
    run_sweep,
    sweep_csv,
)
from radcotrain.linear import TrainConfig
from radcotrain.sections import DEFAULT_LAYOUT, SectionLayout, parse_report
from radcotrain.seeding import derive_seed
from radcotrain.synth import GenConfig, generate, load_hidden_labels, pseudo_label_precision, save_hidden_labels

log = logging.getLogger("radcotrain")

OUTPUT_ROOT_ENV = "RADCOTRAIN_OUTPUT_ROOT"
RESOLVED_NAME = "config-resolved.yaml"

# top-k default per task, as used for the two label spaces
DEFAULT_TOP_K = {"bt": 50.0, "aggressiveness": 25.0}
DEFAULT_N_SEEDS = 5

_TRAIN_FIELDS = {f.name for f in dataclasses.fields(TrainConfig)} - {"seed"}
_SYNTH_FIELDS = {f.name for f in dataclasses.fields(GenConfig)} - {"space", "class_priors", "seed"}


@dataclass
class RunConfig:
    command: str
    task: str = "bt"
    seed: int = 0
    seeds: list[int] | None = None
    folds: int = 5
    fold_indices: list[int] | None = None
    settings: list[str] = field(default_factory=lambda: ["all"])
    output_dir: str = "runs"
    labeled: str | None = None
    unlabeled: str | None = None
    hidden_labels: str | None = None
    synthetic: bool = False
    workers: int = 1
    top_k_percent: float | None = None
    max_rounds: int = 5
    warm_start: bool = False
    min_df: int = 2
    train: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    axis: str | None = None
    values: list[float] | None = None
    input_dir: str | None = None
    output: str | None = None
    layout: str | None = None

    def resolved(self) -> dict:
        """Fully explicit settings, with every derived default filled in."""
        d = dataclasses.asdict(self)
        d["seeds"] = self.seed_list()
        d["top_k_percent"] = self.top_k()
        d["train"] = {k: v for k, v in dataclasses.asdict(self.train_config()).items() if k in _TRAIN_FIELDS}
        if self.command in ("generate", "experiment", "sweep"):
            d["synth"] = {k: v for k, v in self.gen_config().to_dict().items() if k in _SYNTH_FIELDS | {"seed"}}
        # tuples become lists so the snapshot is plain YAML
        return json.loads(json.dumps(d))

    def space(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        return TASKS[self.task]

    def seed_list(self) -> list[int]:
        if self.seeds:
            return [int(s) for s in self.seeds]
        return [derive_seed(self.seed, "seed", i) for i in range(DEFAULT_N_SEEDS)]

    def top_k(self) -> float:
        if self.top_k_percent is not None:
            return float(self.top_k_percent)
        return DEFAULT_TOP_K.get(self.task, 50.0)

    def train_config(self) -> TrainConfig:
        unknown = set(self.train) - _TRAIN_FIELDS
        if unknown:
            raise ConfigError(f"unknown train option(s): {', '.join(sorted(unknown))}")
        return TrainConfig(**self.train)

    def cotrain_config(self) -> CotrainConfig:
        return CotrainConfig(self.space(), self.top_k(), self.max_rounds, self.train_config(),
                             self.warm_start, self.min_df)

    def gen_config(self) -> GenConfig:
        unknown = set(self.synth) - _SYNTH_FIELDS - {"seed"}
        if unknown:
            raise ConfigError(f"unknown synth option(s): {', '.join(sorted(unknown))}")
        opts = {k: tuple(v) if isinstance(v, list) else v for k, v in self.synth.items()}
        opts.setdefault("seed", derive_seed(self.seed, "generate"))
        return GenConfig.for_task(self.space(), **opts)

    def split_seed(self) -> int:
        return derive_seed(self.seed, "split")


def _csv(kind):
    def parse(text: str):
        items = [s.strip() for s in text.split(",") if s.strip()]
        try:
            return [kind(s) for s in items]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a comma-separated list") from None
    return parse


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file with run settings")
    p.add_argument("--output-dir", help="where outputs go (relative paths resolve under $%s)" % OUTPUT_ROOT_ENV)
    p.add_argument("--seed", type=int, help="top-level seed every other seed is derived from")
    p.add_argument("--verbose", action="store_true")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--labeled", help="labeled corpus JSONL")
    p.add_argument("--unlabeled", help="unlabeled pool JSONL")
    p.add_argument("--synthetic", action="store_true", default=None, help="generate the corpus instead of reading it")
    p.add_argument("--seeds", type=_csv(int), help="comma-separated training seeds")
    p.add_argument("--folds", type=int)
    p.add_argument("--fold-indices", type=_csv(int), help="run only these fold triples")
    p.add_argument("--top-k", dest="top_k_percent", type=float, help="percent of agreed pool items added per half-round")
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--warm-start", action="store_true", default=None)
    p.add_argument("--min-df", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--l2-penalty", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adagrad"))
    p.add_argument("--n-labeled", type=int, help="synthetic labeled set size")
    p.add_argument("--n-unlabeled", type=int, help="synthetic pool size")
    p.add_argument("--workers", type=int, help="processes running folds in parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radcotrain", description="Two-view co-training for sectioned reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="segment a directory of .txt reports into JSONL")
    _add_common(p)
    p.add_argument("--input-dir", required=True)
    p.add_argument("--output", required=True, help="JSONL file to write")
    p.add_argument("--layout", help="YAML file with extra heading aliases")

    p = sub.add_parser("generate", help="write a synthetic corpus and its hidden pool labels")
    _add_common(p)
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--n-labeled", type=int)
    p.add_argument("--n-unlabeled", type=int)
    p.add_argument("--n-test", type=int)

    p = sub.add_parser("experiment", help="cross-validate supervised, self-training and co-training settings")
    _add_common(p)
    _add_run_options(p)
    p.add_argument("--settings", type=_csv(str), help="comma-separated setting names, or 'all'")

    p = sub.add_parser("sweep", help="co-training accuracy across top-k or pool size")
    _add_common(p)
    _add_run_options(p)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", type=_csv(float), required=True)
    p.add_argument("--hidden-labels", help="JSON of true pool labels, for pseudo-label precision")
    return parser


_FLAG_TO_TRAIN = ("learning_rate", "l2_penalty", "max_epochs", "batch_size", "patience", "optimizer")
_FLAG_TO_SYNTH = ("n_labeled", "n_unlabeled", "n_test")
_FLAG_TO_RUN = (
    "task", "seed", "seeds", "folds", "fold_indices", "settings", "output_dir", "labeled", "unlabeled",
    "hidden_labels", "synthetic", "workers", "top_k_percent", "max_rounds", "warm_start", "min_df",
    "axis", "values", "input_dir", "output", "layout",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the ``--config`` file, then explicit flags."""
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        data.update(loaded)
    data["command"] = args.command
    data["train"] = dict(data.get("train") or {})
    data["synth"] = dict(data.get("synth") or {})
    for name in _FLAG_TO_RUN:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    for name in _FLAG_TO_TRAIN:
        value = getattr(args, name, None)
        if value is not None:
            data["train"][name] = value
    for name in _FLAG_TO_SYNTH:
        value = getattr(args, name, None)
        if value is not None:
            data["synth"][name] = value
    return RunConfig(**data)


def output_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _write_resolved(cfg: RunConfig, out: Path) -> None:
    text = yaml.safe_dump(cfg.resolved(), sort_keys=True, default_flow_style=None)
    (out / RESOLVED_NAME).write_text(text, encoding="utf-8")


# -- subcommands ------------------------------------------------------------


def cmd_parse(cfg: RunConfig) -> int:
    src = Path(cfg.input_dir)
    if not src.is_dir():
        raise ConfigError(f"input directory {src} does not exist")
    layout = SectionLayout.from_file(cfg.layout) if cfg.layout else DEFAULT_LAYOUT
    files = sorted(src.glob("*.txt"))
    if not files:
        print(f"error: no .txt reports in {src}", file=sys.stderr)
        return 1
    reports: list[Report] = []
    rejected = 0
    for path in files:
        try:
            raw = path.read_text(encoding="utf-8")
            reports.append(parse_report(raw, layout, path.stem))
        except (OSError, UnicodeDecodeError, RadCotrainError) as exc:
            rejected += 1
            print(f"warning: {path.name}: {exc}", file=sys.stderr)
    if not reports:
        print(f"error: all {rejected} reports rejected", file=sys.stderr)
        return 1
    out = Path(cfg.output)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    out.parent.mkdir(parents=True, exist_ok=True)
    save_jsonl(reports, out)
    print(f"parsed {len(reports)}, rejected {rejected}")
    return 0


def cmd_generate(cfg: RunConfig, out: Path) -> int:
    gen = cfg.gen_config()
    labeled, pool, test, hidden = generate(gen)
    save_labeled(labeled, out / "labeled.jsonl")
    save_jsonl(pool, out / "unlabeled.jsonl")
    save_labeled(test, out / "test.jsonl")
    save_hidden_labels(hidden, gen.space, out / "hidden-labels.json")
    print(f"wrote {len(labeled)} labeled, {len(pool)} unlabeled, {len(test)} test reports to {out}")
    return 0


def _load_data(cfg: RunConfig, want_pool: bool):
    """Labeled set, pool and hidden pool labels (or None) for experiment/sweep."""
    space = cfg.space()
    if cfg.synthetic:
        labeled, pool, _, hidden = generate(cfg.gen_config())
        return labeled, pool, hidden
    if not cfg.labeled:
        raise ConfigError("give --labeled or --synthetic")
    for p in (cfg.labeled, cfg.unlabeled, cfg.hidden_labels):
        if p and not Path(p).is_file():
            raise ConfigError(f"input file {p} does not exist")
    if want_pool and not cfg.unlabeled:
        raise ConfigError("semi-supervised settings need --unlabeled")
    labeled = load_labeled(cfg.labeled, space)
    pool = load_unlabeled(cfg.unlabeled) if cfg.unlabeled else UnlabeledDataset(())
    hidden = load_hidden_labels(cfg.hidden_labels, space) if cfg.hidden_labels else None
    return labeled, pool, hidden


def _preflight(cfg: RunConfig) -> None:
    """Check everything that can be checked before data is read or models trained."""
    cfg.cotrain_config()
    if cfg.folds < 3:
        raise ConfigError(f"need at least 3 folds, got {cfg.folds}")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.synthetic:
        cfg.gen_config()
    if cfg.command == "experiment":
        resolve_settings(cfg.settings)
    if cfg.command == "sweep":
        if cfg.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {cfg.axis!r}")
        if not cfg.values:
            raise ConfigError("sweep needs at least one value")
        if cfg.axis == "top_k":
            check_sweep_values(cfg.axis, cfg.values, 0)


def cmd_experiment(cfg: RunConfig, out: Path) -> int:
    _preflight(cfg)
    settings = resolve_settings(cfg.settings)
    cfg.settings = list(settings)
    if needs_pool(settings) and not cfg.synthetic and not cfg.unlabeled:
        raise ConfigError("semi-supervised settings need --unlabeled (or --synthetic)")
    labeled, pool, _ = _load_data(cfg, needs_pool(settings))
    report = run_experiment(
        labeled, pool, cfg.cotrain_config(), settings, cfg.seed_list(),
        folds=cfg.folds, split_seed=cfg.split_seed(), fold_indices=cfg.fold_indices, workers=cfg.workers,
    )
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.table(), encoding="utf-8")
    print(report.table(), end="")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    _preflight(cfg)
    if not cfg.synthetic and not cfg.unlabeled:
        raise ConfigError("a sweep needs --unlabeled (or --synthetic)")
    labeled, pool, hidden = _load_data(cfg, True)
    values = check_sweep_values(cfg.axis, cfg.values, len(pool))
    precision_of = (lambda s: pseudo_label_precision(s, hidden)) if hidden else None
    folds = cfg.fold_indices if cfg.fold_indices is not None else [0]
    rows = []
    for seed in cfg.seed_list():
        rows += run_sweep(labeled, pool, cfg.cotrain_config(), cfg.axis, values, seed=seed, folds=cfg.folds,
                          split_seed=cfg.split_seed(), fold_indices=folds, precision_of=precision_of)
    text = sweep_csv(rows, cfg.axis)
    (out / "sweep.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if cfg.command == "parse":
            return cmd_parse(cfg)
        if cfg.command == "sweep" and not cfg.seeds:
            # one run per value unless seeds are given explicitly
            cfg.seeds = [derive_seed(cfg.seed, "seed", 0)]
        _preflight(cfg)
        out = output_dir(cfg)
        out.mkdir(parents=True, exist_ok=True)
        try:
            with FileLock(str(out / ".lock"), timeout=0):
                _write_resolved(cfg, out)
                runner = {"generate": cmd_generate, "experiment": cmd_experiment, "sweep": cmd_sweep}[cfg.command]
                status = runner(cfg, out)
                _write_resolved(cfg, out)
                return status
        except Timeout:
            print(f"error: another run holds the lock on {out}", file=sys.stderr)
            return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RadCotrainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
