"""Reports, label spaces, labeled/unlabeled datasets and their JSONL format.

A dataset file holds one JSON object per line::

    {"id": "r001", "sections": {"FINDINGS": "...", "IMPRESSION": "..."},
     "labels": {"bt": "present", "aggressiveness": "aggressive"}}

A record may carry ``"text"`` (a raw report) instead of ``"sections"``; it is
then segmented with :func:`radcotrain.sections.parse_report`.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from radcotrain.errors import ConfigError, CorpusError, ReportParseError

FINDINGS = "FINDINGS"
IMPRESSION = "IMPRESSION"


@dataclass(frozen=True)
class Report:
    """One document split into named sections.

    ``sections`` keys are canonical upper-case heading names. The two views
    are the FINDINGS and IMPRESSION bodies; other sections are kept for
    round-tripping but never used as model input. ``labels`` holds the raw
    annotations (task name -> class name) exactly as read from disk.
    """

    id: str
    sections: Mapping[str, str]
    labels: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ReportParseError("report id must be a non-empty string")
        missing = [name for name in (FINDINGS, IMPRESSION) if not self.sections.get(name, "").strip()]
        if missing:
            raise ReportParseError(f"missing section {', '.join(missing)}", report_id=self.id)
        object.__setattr__(self, "sections", dict(self.sections))
        object.__setattr__(self, "labels", dict(self.labels))

    @property
    def fnd_text(self) -> str:
        return self.sections[FINDINGS]

    @property
    def imp_text(self) -> str:
        return self.sections[IMPRESSION]

    def to_record(self) -> dict:
        record = {"id": self.id, "sections": dict(self.sections)}
        if self.labels:
            record["labels"] = dict(self.labels)
        return record


@dataclass(frozen=True)
class LabelSpace:
    """A K-way categorical target; class ``i`` is ``class_names[i]``."""

    task_name: str
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if len(self.class_names) < 2:
            raise ConfigError(f"label space {self.task_name!r} needs at least 2 classes")
        folded = [c.lower() for c in self.class_names]
        if len(set(folded)) != len(folded):
            raise ConfigError(f"duplicate class names in {self.task_name!r}")

    @property
    def k(self) -> int:
        return len(self.class_names)

    def index_of(self, name: str) -> int:
        """Class index for ``name``, matched case-insensitively."""
        folded = str(name).strip().lower()
        for i, c in enumerate(self.class_names):
            if c.lower() == folded:
                return i
        raise KeyError(name)

    def check(self, value: int) -> int:
        if not (isinstance(value, (int, np.integer)) and 0 <= value < self.k):
            raise ConfigError(f"label {value!r} outside 0..{self.k - 1} for task {self.task_name!r}")
        return int(value)


BT = LabelSpace("bt", ("absent", "present"))
AGGRESSIVENESS = LabelSpace("aggressiveness", ("non-aggressive", "aggressive", "possibly-aggressive"))
TASKS = {space.task_name: space for space in (BT, AGGRESSIVENESS)}


def _check_unique(ids: Iterable[str], what: str) -> None:
    seen = set()
    for rid in ids:
        if rid in seen:
            raise CorpusError(f"duplicate id {rid!r} in {what}", record_id=rid)
        seen.add(rid)


@dataclass(frozen=True)
class LabeledDataset:
    """The small labeled set: (report, class index) pairs over one label space."""

    space: LabelSpace
    items: tuple[tuple[Report, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple((r, self.space.check(y)) for r, y in self.items))
        _check_unique((r.id for r, _ in self.items), "labeled dataset")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[tuple[Report, int]]:
        return iter(self.items)

    @property
    def reports(self) -> list[Report]:
        return [r for r, _ in self.items]

    @property
    def labels(self) -> np.ndarray:
        return np.fromiter((y for _, y in self.items), dtype=np.int64, count=len(self.items))

    @property
    def ids(self) -> list[str]:
        return [r.id for r, _ in self.items]

    def subset(self, indices: Iterable[int]) -> LabeledDataset:
        return LabeledDataset(self.space, tuple(self.items[i] for i in indices))


@dataclass(frozen=True)
class UnlabeledDataset:
    """The large unlabeled pool."""

    items: tuple[Report, ...]

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        _check_unique((r.id for r in self.items), "unlabeled dataset")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[Report]:
        return iter(self.items)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.items]

    def head(self, n: int) -> UnlabeledDataset:
        return UnlabeledDataset(self.items[:n])


def check_disjoint(*datasets) -> None:
    """Raise if any report id appears in more than one of ``datasets``."""
    seen: dict[str, int] = {}
    for n, ds in enumerate(datasets):
        for rid in ds.ids:
            if rid in seen and seen[rid] != n:
                raise CorpusError(f"id {rid!r} appears in more than one dataset", record_id=rid)
            seen[rid] = n


def concat_views(r: Report) -> str:
    """Findings then Impression, joined by one space, without section titles."""
    return r.fnd_text.rstrip() + " " + r.imp_text.lstrip()


# -- on-disk format ---------------------------------------------------------


def _read_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(record, dict):
                raise CorpusError("record is not a JSON object", line=lineno)
            yield lineno, record


def _report_from_record(record: dict, lineno: int) -> Report:
    from radcotrain.sections import DEFAULT_LAYOUT, parse_report

    rid = record.get("id")
    if not isinstance(rid, str) or not rid:
        raise CorpusError("record has no string 'id'", line=lineno)
    labels = record.get("labels") or {}
    if not isinstance(labels, dict):
        raise CorpusError("'labels' must be an object", line=lineno, record_id=rid)
    try:
        if "sections" in record:
            sections = record["sections"]
            if not isinstance(sections, dict):
                raise CorpusError("'sections' must be an object", line=lineno, record_id=rid)
            normalized: dict[str, str] = {}
            for name, body in sections.items():
                canonical = DEFAULT_LAYOUT.canonical(name) or str(name).strip().upper()
                if canonical in normalized:
                    raise CorpusError(f"section {canonical} given twice", line=lineno, record_id=rid)
                normalized[canonical] = body
            return Report(rid, normalized, labels)
        if "text" in record:
            parsed = parse_report(record["text"], DEFAULT_LAYOUT, rid)
            return Report(rid, parsed.sections, labels)
    except ReportParseError as exc:
        raise CorpusError(str(exc), line=lineno, record_id=rid) from exc
    raise CorpusError("record has neither 'sections' nor 'text'", line=lineno, record_id=rid)


def load_labeled(path: str | Path, space: LabelSpace) -> LabeledDataset:
    """Read a JSONL file, keeping each record's label for ``space.task_name``."""
    items = []
    seen: set[str] = set()
    for lineno, record in _read_records(path):
        report = _report_from_record(record, lineno)
        if report.id in seen:
            raise CorpusError(f"duplicate id {report.id!r}", line=lineno, record_id=report.id)
        seen.add(report.id)
        name = report.labels.get(space.task_name)
        if name is None:
            raise CorpusError(
                f"record {report.id!r} has no label for task {space.task_name!r}",
                line=lineno, record_id=report.id,
            )
        try:
            y = space.index_of(name)
        except KeyError:
            raise CorpusError(
                f"record {report.id!r}: unknown label {name!r} for task {space.task_name!r} "
                f"(expected one of {', '.join(space.class_names)})",
                line=lineno, record_id=report.id,
            ) from None
        items.append((report, y))
    return LabeledDataset(space, tuple(items))


def load_unlabeled(path: str | Path) -> UnlabeledDataset:
    reports = []
    seen: set[str] = set()
    for lineno, record in _read_records(path):
        report = _report_from_record(record, lineno)
        if report.id in seen:
            raise CorpusError(f"duplicate id {report.id!r}", line=lineno, record_id=report.id)
        seen.add(report.id)
        reports.append(report)
    return UnlabeledDataset(tuple(reports))


def save_jsonl(reports: Iterable[Report], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_record(), ensure_ascii=False) + "\n")


def save_labeled(data: LabeledDataset, path: str | Path) -> None:
    """Write ``data``; each report's label for this task is refreshed from the item."""
    reports = []
    for r, y in data:
        labels = dict(r.labels)
        current = labels.get(data.space.task_name)
        if current is None or data.space.index_of(current) != y:
            labels[data.space.task_name] = data.space.class_names[y]
        reports.append(Report(r.id, r.sections, labels))
    save_jsonl(reports, path)


# -- cross-validation -------------------------------------------------------


@dataclass(frozen=True)
class FoldTriple:
    index: int
    train: LabeledDataset
    valid: LabeledDataset
    test: LabeledDataset


def fold_assignment(n: int, folds: int, seed: int) -> list[list[int]]:
    """Shuffle ``range(n)`` with ``seed`` and deal the positions round-robin."""
    order = np.random.default_rng(seed).permutation(n)
    return [order[f::folds].tolist() for f in range(folds)]


def split_k_folds(data: LabeledDataset, folds: int, seed: int) -> list[FoldTriple]:
    """Rotate test/validation/train roles over ``folds`` shuffled folds.

    Triple ``i`` tests on fold ``i``, validates on fold ``(i + 1) % folds`` and
    trains on the rest.
    """
    if folds < 3:
        raise ConfigError(f"need at least 3 folds for train/valid/test roles, got {folds}")
    if len(data) < folds:
        raise ConfigError(f"cannot split {len(data)} samples into {folds} folds")
    parts = fold_assignment(len(data), folds, seed)
    triples = []
    for i in range(folds):
        v = (i + 1) % folds
        train_idx = [j for f in range(folds) if f not in (i, v) for j in parts[f]]
        triples.append(FoldTriple(i, data.subset(train_idx), data.subset(parts[v]), data.subset(parts[i])))
    return triples
