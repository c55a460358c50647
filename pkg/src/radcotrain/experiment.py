"""Cross-validated experiment harness and top-k / pool-size sweeps.

Every (fold, seed) cell trains the supervised view classifiers first. The
semi-supervised settings of a fold then start from the supervised run whose
validation accuracy is the median across seeds (the lower median for an even
seed count, earlier seed on ties).

Seeds for a cell are derived from the user seed and the fold index, so a
partial rerun of one fold reproduces the full run exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import statistics
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from radcotrain.corpus import FoldTriple, LabeledDataset, UnlabeledDataset, split_k_folds
from radcotrain.engine import (
    CONCAT,
    FND,
    IMP,
    CotrainConfig,
    PseudoLabeledSet,
    ViewFeatures,
    cotrain,
    prepare_view,
    selftrain,
    train_view,
    view_text,
)
from radcotrain.ensemble import average_dist
from radcotrain.errors import ConfigError, ExperimentError, RadCotrainError
from radcotrain.features import tokenize
from radcotrain.linear import ClassifierParams, predict_proba
from radcotrain.seeding import derive_seed

log = logging.getLogger(__name__)

SUPERVISED = ("supervised-concat", "supervised-fnd", "supervised-imp", "supervised-ensemble")
SELFTRAIN = ("selftrain-concat", "selftrain-fnd", "selftrain-imp", "selftrain-ensemble")
COTRAIN = ("cotrain-fnd", "cotrain-imp", "cotrain-ensemble")
ALL_SETTINGS = SUPERVISED + SELFTRAIN + COTRAIN


def resolve_settings(names: Sequence[str]) -> tuple[str, ...]:
    """Expand ``all`` and validate names; the result keeps table order."""
    wanted = set()
    for name in names:
        name = name.strip()
        if name == "all":
            wanted.update(ALL_SETTINGS)
        elif name in ALL_SETTINGS:
            wanted.add(name)
        else:
            raise ConfigError(f"unknown setting {name!r}; choose from {', '.join(ALL_SETTINGS)} or 'all'")
    if not wanted:
        raise ConfigError("no settings requested")
    return tuple(s for s in ALL_SETTINGS if s in wanted)


def needs_pool(settings: Sequence[str]) -> bool:
    return any(not s.startswith("supervised-") for s in settings)


@dataclass
class SettingResult:
    runs: list[dict] = field(default_factory=list)

    @property
    def accuracies(self) -> list[float]:
        return [r["accuracy"] for r in self.runs]

    def summary(self) -> dict:
        acc = self.accuracies
        return {
            "runs": self.runs,
            "median": statistics.median(acc),
            "mean": statistics.fmean(acc),
            "std": statistics.pstdev(acc),
        }


@dataclass
class ExperimentReport:
    task: str
    settings: dict[str, SettingResult]
    config: dict
    seeds: list[int]
    rounds: dict[str, list[dict]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seeds": list(self.seeds),
            "config": self.config,
            "settings": {name: res.summary() for name, res in self.settings.items()},
            "rounds": self.rounds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        """Aligned text table: setting, median, mean +- std, run count."""
        rows = [("setting", "median", "mean+-std", "runs")]
        for name, res in self.settings.items():
            s = res.summary()
            rows.append((name, f"{s['median']:.4f}", f"{s['mean']:.4f}+-{s['std']:.4f}", str(len(res.runs))))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        return f"task: {self.task}\n" + "\n".join(lines) + "\n"


def config_snapshot(cfg: CotrainConfig) -> dict:
    return {
        "task": {"name": cfg.task.task_name, "classes": list(cfg.task.class_names)},
        "top_k_percent": cfg.top_k_percent,
        "max_rounds": cfg.max_rounds,
        "warm_start": cfg.warm_start,
        "min_df": cfg.min_df,
        "train": dataclasses.asdict(cfg.train_cfg),
    }


def _median_index(scores: Sequence[float]) -> int:
    order = sorted(range(len(scores)), key=lambda i: (scores[i], i))
    return order[(len(order) - 1) // 2]


def _acc(p: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(p.argmax(1) == y))


@dataclass(frozen=True)
class _FoldJob:
    triple: FoldTriple
    pool: UnlabeledDataset
    cfg: CotrainConfig
    settings: tuple[str, ...]
    seeds: tuple[int, ...]
    pool_tokens: dict[str, list[list[str]]] | None


def _views_for(settings: Sequence[str]) -> list[str]:
    views = []
    if any(s.endswith(("-fnd", "-imp", "-ensemble")) for s in settings):
        views += [FND, IMP]
    if any(s.endswith("-concat") for s in settings):
        views.append(CONCAT)
    return views


def _run_fold(job: _FoldJob) -> tuple[list[tuple[str, int, float]], dict[str, list[dict]]]:
    """All requested settings for one fold triple; returns (setting, seed, accuracy) rows."""
    t, cfg, settings = job.triple, job.cfg, job.settings
    fold = t.index
    space = cfg.task
    feats: dict[str, ViewFeatures] = {}
    test_X = {}
    for v in _views_for(settings):
        tokens = job.pool_tokens.get(v) if job.pool_tokens else None
        feats[v] = prepare_view(v, t.train, t.valid, job.pool, cfg.min_df, pool_tokens=tokens)
        test_X[v] = feats[v].transform(t.test.reports)
    y_lab, y_val, y_test = t.train.labels, t.valid.labels, t.test.labels

    rows: list[tuple[str, int, float]] = []
    rounds: dict[str, list[dict]] = {}

    def record(setting, seed, acc):
        if setting in settings:
            rows.append((setting, seed, acc))

    def test_proba(params, view):
        return predict_proba(params, test_X[view])

    # supervised runs, one per seed
    sup: dict[str, list[ClassifierParams]] = {v: [] for v in feats}
    sup_valid: dict[str, list[float]] = {v: [] for v in feats}
    sup_valid["ensemble"] = []
    for seed in job.seeds:
        try:
            tcfg = dataclasses.replace(cfg.train_cfg, seed=derive_seed(seed, "fold", fold, "supervised"))
            for v, f in feats.items():
                p = train_view(f, y_lab, y_val, space, tcfg, 0)
                sup[v].append(p)
                sup_valid[v].append(_acc(predict_proba(p, f.valid), y_val))
                record(f"supervised-{v}", seed, _acc(test_proba(p, v), y_test))
            if FND in feats:
                pf, pi = sup[FND][-1], sup[IMP][-1]
                sup_valid["ensemble"].append(_acc(
                    average_dist(predict_proba(pf, feats[FND].valid), predict_proba(pi, feats[IMP].valid)), y_val))
                record("supervised-ensemble", seed,
                       _acc(average_dist(test_proba(pf, FND), test_proba(pi, IMP)), y_test))
        except RadCotrainError as exc:
            raise ExperimentError(str(exc), fold=fold, seed=seed) from exc

    want_self = any(s.startswith("selftrain-") for s in settings)
    want_co = any(s.startswith("cotrain-") for s in settings)
    if not (want_self or want_co):
        return rows, rounds

    for seed in job.seeds:
        try:
            if want_co:
                m = _median_index(sup_valid["ensemble"])
                ccfg = dataclasses.replace(
                    cfg, train_cfg=dataclasses.replace(cfg.train_cfg, seed=derive_seed(seed, "fold", fold, "cotrain")))
                res = cotrain(t.train, t.valid, job.pool, ccfg, features=feats,
                              init=(sup[FND][m], sup[IMP][m]))
                pf, pi = test_proba(res.fnd, FND), test_proba(res.imp, IMP)
                record("cotrain-fnd", seed, _acc(pf, y_test))
                record("cotrain-imp", seed, _acc(pi, y_test))
                record("cotrain-ensemble", seed, _acc(average_dist(pf, pi), y_test))
                rounds[f"fold{fold}/seed{seed}/cotrain"] = [dataclasses.asdict(r) for r in res.logs]
            if want_self:
                scfg = dataclasses.replace(
                    cfg, train_cfg=dataclasses.replace(cfg.train_cfg, seed=derive_seed(seed, "fold", fold, "selftrain")))
                self_proba = {}
                for v in feats:
                    needed = f"selftrain-{v}" in settings or (v != CONCAT and "selftrain-ensemble" in settings)
                    if not needed:
                        continue
                    m = _median_index(sup_valid[v])
                    res = selftrain(t.train, t.valid, job.pool, v, scfg, features=feats[v], init=sup[v][m])
                    self_proba[v] = test_proba(res.params, v)
                    record(f"selftrain-{v}", seed, _acc(self_proba[v], y_test))
                    rounds[f"fold{fold}/seed{seed}/selftrain-{v}"] = [dataclasses.asdict(r) for r in res.logs]
                if "selftrain-ensemble" in settings:
                    record("selftrain-ensemble", seed, _acc(average_dist(self_proba[FND], self_proba[IMP]), y_test))
        except RadCotrainError as exc:
            raise ExperimentError(str(exc), fold=fold, seed=seed) from exc
    return rows, rounds


def _tokenize_pool(pool: UnlabeledDataset, views: Sequence[str]) -> dict[str, list[list[str]]]:
    return {v: [tokenize(view_text(r, v)) for r in pool] for v in views}


def run_experiment(
    data: LabeledDataset,
    pool: UnlabeledDataset,
    cfg: CotrainConfig,
    settings: Sequence[str],
    seeds: Sequence[int],
    folds: int = 5,
    split_seed: int = 0,
    fold_indices: Sequence[int] | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Cross-validate the requested settings over ``folds`` rotating triples.

    ``fold_indices`` restricts the run to some triples. With ``workers > 1``
    folds run in separate processes; results are assembled in fold order so
    the report does not depend on scheduling.
    """
    settings = resolve_settings(settings)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("at least one seed is required")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    if data.space != cfg.task:
        raise ConfigError(f"data is labeled for {data.space.task_name!r}, config targets {cfg.task.task_name!r}")
    if needs_pool(settings) and len(pool) == 0:
        raise ConfigError("semi-supervised settings need a non-empty unlabeled pool")
    triples = split_k_folds(data, folds, split_seed)
    if fold_indices is not None:
        bad = [i for i in fold_indices if not 0 <= i < folds]
        if bad:
            raise ConfigError(f"fold indices {bad} outside 0..{folds - 1}")
        triples = [triples[i] for i in sorted(set(fold_indices))]

    tokens = _tokenize_pool(pool, _views_for(settings)) if len(pool) else None
    jobs = [_FoldJob(t, pool, cfg, settings, tuple(seeds), tokens) for t in triples]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outputs = list(ex.map(_run_fold, jobs))
    else:
        outputs = [_run_fold(j) for j in jobs]

    results = {s: SettingResult() for s in settings}
    rounds: dict[str, list[dict]] = {}
    for t, (rows, fold_rounds) in zip(triples, outputs):
        for setting, seed, acc in rows:
            results[setting].runs.append({"fold": t.index, "seed": seed, "accuracy": acc})
        rounds.update(fold_rounds)
    snapshot = config_snapshot(cfg)
    snapshot.update(folds=folds, split_seed=split_seed, fold_indices=[t.index for t in triples],
                    settings=list(settings), pool_size=len(pool))
    return ExperimentReport(cfg.task.task_name, results, snapshot, seeds, rounds)


# -- sweeps -----------------------------------------------------------------

SWEEP_AXES = ("top_k", "pool_size")
SWEEP_SETTINGS = COTRAIN


@dataclass
class SweepRow:
    value: float
    setting: str
    fold: int
    seed: int
    accuracy: float
    precision: float | None = None


def check_sweep_values(axis: str, values: Sequence[float], pool_size: int) -> list:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = []
    for v in values:
        if axis == "top_k":
            if not 0 < float(v) <= 100:
                raise ConfigError(f"top_k value {v} outside (0, 100]")
            out.append(float(v))
        else:
            if int(v) != v or not 1 <= int(v) <= pool_size:
                raise ConfigError(f"pool_size value {v} must be an integer in 1..{pool_size}")
            out.append(int(v))
    return out


def run_sweep(
    data: LabeledDataset,
    pool: UnlabeledDataset,
    cfg: CotrainConfig,
    axis: str,
    values: Sequence[float],
    seed: int = 0,
    folds: int = 5,
    split_seed: int = 0,
    fold_indices: Sequence[int] = (0,),
    precision_of: Callable[[PseudoLabeledSet], float] | None = None,
) -> list[SweepRow]:
    """One co-training run per axis value and fold, other parameters fixed.

    With ``precision_of`` each row also carries the precision of the first
    round's Findings-sourced pseudo-labels. For the top-k axis these sets all
    come from the same supervised classifiers, so larger k only appends lower
    confidence items.
    """
    values = check_sweep_values(axis, values, len(pool))
    if data.space != cfg.task:
        raise ConfigError(f"data is labeled for {data.space.task_name!r}, config targets {cfg.task.task_name!r}")
    triples = split_k_folds(data, folds, split_seed)
    rows: list[SweepRow] = []
    base_tokens = _tokenize_pool(pool, (FND, IMP))
    for i in fold_indices:
        t = triples[i]
        shared = None
        if axis == "top_k":
            shared = {v: prepare_view(v, t.train, t.valid, pool, cfg.min_df, base_tokens[v]) for v in (FND, IMP)}
        for value in values:
            run_pool, run_cfg, feats = pool, cfg, shared
            if axis == "top_k":
                run_cfg = dataclasses.replace(cfg, top_k_percent=value)
            else:
                run_pool = pool.head(value)
                feats = {v: prepare_view(v, t.train, t.valid, run_pool, cfg.min_df, base_tokens[v][:value])
                         for v in (FND, IMP)}
            run_cfg = dataclasses.replace(
                run_cfg, train_cfg=dataclasses.replace(cfg.train_cfg, seed=derive_seed(seed, "fold", i, "cotrain")))
            first: list[PseudoLabeledSet] = []

            def hook(rnd, selected, first=first):
                if rnd == 1 and selected.source_view == FND:
                    first.append(selected)

            try:
                res = cotrain(t.train, t.valid, run_pool, run_cfg, features=feats, on_selection=hook)
            except RadCotrainError as exc:
                raise ExperimentError(f"{axis}={value}: {exc}", fold=i, seed=seed) from exc
            test_f = feats[FND].transform(t.test.reports)
            test_i = feats[IMP].transform(t.test.reports)
            pf, pi = predict_proba(res.fnd, test_f), predict_proba(res.imp, test_i)
            prec = precision_of(first[0]) if precision_of is not None and first else None
            y = t.test.labels
            for setting, p in zip(SWEEP_SETTINGS, (pf, pi, average_dist(pf, pi))):
                rows.append(SweepRow(value, setting, i, seed, _acc(p, y), prec))
    return rows


def sweep_csv(rows: Sequence[SweepRow], axis: str) -> str:
    """CSV text with the axis value column named ``k_percent`` or ``pool_size``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    has_prec = any(r.precision is not None for r in rows)
    header = ["k_percent" if axis == "top_k" else "pool_size", "setting", "fold", "seed", "accuracy"]
    w.writerow(header + (["precision"] if has_prec else []))
    for r in rows:
        line = [r.value, r.setting, r.fold, r.seed, repr(r.accuracy)]
        if has_prec:
            line.append("" if r.precision is None else repr(r.precision))
        w.writerow(line)
    return buf.getvalue()
