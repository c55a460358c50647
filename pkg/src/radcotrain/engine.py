"""Co-training and self-training over an unlabeled pool.

Each co-training round runs two half-steps. First the Findings classifier
labels the pool; the pool items on which both classifiers agree are ranked by
Findings confidence, the top k% are merged with the labeled set, and the
Impression classifier is retrained on the result. Then the roles swap, using
the freshly retrained Impression classifier. Pseudo-labels are regenerated
from the whole pool every round and never accumulate.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from radcotrain.corpus import LabeledDataset, LabelSpace, Report, UnlabeledDataset, check_disjoint, concat_views
from radcotrain.ensemble import average_dist
from radcotrain.errors import ConfigError, ContractError, TrainingError
from radcotrain.features import Vocabulary, featurize_many, tokenize, vocab_from_tokens
from radcotrain.linear import ClassifierParams, TrainConfig, predict_labels, predict_proba, train
from radcotrain.seeding import derive_seed

log = logging.getLogger(__name__)

FND, IMP, CONCAT = "fnd", "imp", "concat"
VIEW_CODES = {FND: 0, IMP: 1, CONCAT: 2}


def view_text(r: Report, view: str) -> str:
    if view == FND:
        return r.fnd_text
    if view == IMP:
        return r.imp_text
    if view == CONCAT:
        return concat_views(r)
    raise ConfigError(f"unknown view {view!r}")


@dataclass(frozen=True)
class CotrainConfig:
    task: LabelSpace
    top_k_percent: float = 50.0
    max_rounds: int = 5
    train_cfg: TrainConfig = TrainConfig()
    warm_start: bool = False
    min_df: int = 2

    def __post_init__(self):
        if not 0 < self.top_k_percent <= 100:
            raise ConfigError(f"top_k_percent must be in (0, 100], got {self.top_k_percent}")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")


@dataclass(frozen=True)
class PseudoLabeledSet:
    source_view: str
    items: tuple[tuple[str, int, float], ...]

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return [rid for rid, _, _ in self.items]


@dataclass
class RoundLog:
    round: int
    valid_accuracy: dict[str, float]
    selected: dict[str, int] = field(default_factory=dict)
    agreement_rate: float | None = None
    pool_size: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class CotrainResult(NamedTuple):
    fnd: ClassifierParams
    imp: ClassifierParams
    logs: list[RoundLog]


class SelftrainResult(NamedTuple):
    params: ClassifierParams
    logs: list[RoundLog]


# -- features ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ViewFeatures:
    """One view's vocabulary and feature matrices for labeled/valid/pool rows."""

    view: str
    vocab: Vocabulary
    labeled: sp.csr_matrix
    valid: sp.csr_matrix
    pool: sp.csr_matrix

    def transform(self, reports: Sequence[Report]) -> sp.csr_matrix:
        return featurize_many([view_text(r, self.view) for r in reports], self.vocab)


def prepare_view(
    view: str,
    labeled: LabeledDataset,
    valid: LabeledDataset,
    pool: UnlabeledDataset,
    min_df: int = 2,
    pool_tokens: list[list[str]] | None = None,
) -> ViewFeatures:
    """Fit the vocabulary on labeled training and pool text only, then featurize.

    ``pool_tokens`` may carry the pool already tokenized for ``view``, which
    saves work when the same pool is reused across folds.
    """
    lab_tokens = [tokenize(view_text(r, view)) for r in labeled.reports]
    if pool_tokens is None:
        pool_tokens = [tokenize(view_text(r, view)) for r in pool]
    vocab = vocab_from_tokens(lab_tokens + pool_tokens, min_df=min_df)
    return ViewFeatures(
        view,
        vocab,
        featurize_many(lab_tokens, vocab, tokens=lab_tokens),
        featurize_many([view_text(r, view) for r in valid.reports], vocab),
        featurize_many(pool_tokens, vocab, tokens=pool_tokens),
    )


# -- pseudo-labels ----------------------------------------------------------


def generate_pseudo_labels(
    source: ClassifierParams, source_view: str, pool: UnlabeledDataset, vocab: Vocabulary
) -> list[tuple[str, int, float]]:
    """``(id, predicted label, its probability)`` for every pool report, in pool order."""
    if len(pool) == 0:
        return []
    X = featurize_many([view_text(r, source_view) for r in pool], vocab)
    labels, conf = predict_labels(source, X)
    return [(rid, int(y), float(c)) for rid, y, c in zip(pool.ids, labels, conf)]


def selection_size(k_percent: float, n_agreed: int) -> int:
    """``ceil(k / 100 * n_agreed)`` computed exactly on the decimal value of k."""
    return math.ceil(Fraction(str(k_percent)) * n_agreed / 100)


def topk_indices(candidates: np.ndarray, conf: np.ndarray, id_rank: np.ndarray, k_percent: float) -> np.ndarray:
    """Positions of the top-k% ``candidates`` by ``conf`` (desc), ties by ``id_rank`` (asc)."""
    candidates = np.asarray(candidates, dtype=np.int64)
    n = selection_size(k_percent, len(candidates))
    order = np.lexsort((id_rank[candidates], -conf[candidates]))
    return candidates[order[:n]]


def select_agreed_topk(
    fnd_preds: Sequence[tuple[str, int, float]],
    imp_preds: Sequence[tuple[str, int, float]],
    source_view: str,
    k_percent: float,
) -> PseudoLabeledSet:
    """Keep items whose two predicted labels agree, then the top k% by source-view confidence.

    Labels and confidences in the result come from ``source_view``. Ties in
    confidence are broken by ascending id.
    """
    if source_view not in (FND, IMP):
        raise ConfigError(f"source_view must be {FND!r} or {IMP!r}")
    fnd_by_id = {rid: (y, c) for rid, y, c in fnd_preds}
    imp_by_id = {rid: (y, c) for rid, y, c in imp_preds}
    if fnd_by_id.keys() != imp_by_id.keys() or len(fnd_by_id) != len(fnd_preds) or len(imp_by_id) != len(imp_preds):
        raise ContractError("fnd and imp predictions must cover the same unique ids")
    ids = [rid for rid, _, _ in fnd_preds]
    src = fnd_by_id if source_view == FND else imp_by_id
    labels = np.array([src[rid][0] for rid in ids], dtype=np.int64)
    conf = np.array([src[rid][1] for rid in ids], dtype=np.float64)
    agreed = np.flatnonzero([fnd_by_id[rid][0] == imp_by_id[rid][0] for rid in ids])
    chosen = topk_indices(agreed, conf, _id_ranks(ids), k_percent)
    return PseudoLabeledSet(source_view, tuple((ids[i], int(labels[i]), float(conf[i])) for i in chosen))


def _id_ranks(ids: Sequence[str]) -> np.ndarray:
    ranks = np.empty(len(ids), dtype=np.int64)
    ranks[np.argsort(np.array(ids, dtype=object), kind="stable")] = np.arange(len(ids))
    return ranks


# -- training loops ---------------------------------------------------------


def _round_cfg(cfg: TrainConfig, view: str, rnd: int) -> TrainConfig:
    return dataclasses.replace(cfg, seed=derive_seed(cfg.seed, VIEW_CODES[view], rnd))


def train_view(
    feats: ViewFeatures,
    y_labeled: np.ndarray,
    y_valid: np.ndarray,
    space: LabelSpace,
    train_cfg: TrainConfig,
    rnd: int = 0,
    extra: tuple[np.ndarray, np.ndarray] | None = None,
    init: ClassifierParams | None = None,
) -> ClassifierParams:
    """Train one view classifier on the labeled rows plus optional pseudo-labeled pool rows.

    ``extra`` is ``(pool row indices, pseudo-labels)``. Labeled rows always come
    first and are never modified.
    """
    X, y = feats.labeled, np.asarray(y_labeled)
    if extra is not None and len(extra[0]):
        rows, pseudo = extra
        X = sp.vstack([X, feats.pool[rows]], format="csr")
        y = np.concatenate([y, pseudo])
    return train(
        X, y, space, _round_cfg(train_cfg, feats.view, rnd),
        valid=(feats.valid, y_valid), init=init, vocab_fingerprint=feats.vocab.fingerprint,
    )


def _acc(pred: np.ndarray, gold: np.ndarray) -> float:
    return float(np.mean(pred == gold)) if len(gold) else 0.0


def _validate_inputs(labeled: LabeledDataset, valid: LabeledDataset, pool: UnlabeledDataset) -> None:
    if len(labeled) == 0:
        raise TrainingError("labeled set is empty")
    check_disjoint(labeled, valid, pool)


SelectionHook = Callable[[int, PseudoLabeledSet], None]


def cotrain(
    labeled: LabeledDataset,
    valid: LabeledDataset,
    pool: UnlabeledDataset,
    cfg: CotrainConfig,
    features: dict[str, ViewFeatures] | None = None,
    init: tuple[ClassifierParams, ClassifierParams] | None = None,
    on_selection: SelectionHook | None = None,
) -> CotrainResult:
    """Co-train the Findings and Impression classifiers.

    Round 0 is supervised training on ``labeled`` (or ``init`` when given).
    Training stops after ``cfg.max_rounds`` rounds or as soon as the ensemble's
    validation accuracy fails to beat the previous round; the pair with the
    best ensemble validation accuracy (earliest on ties) is returned.

    ``on_selection(round, selected)`` sees every pseudo-labeled set; it is the
    hook for diagnostics that need hidden labels, which never enter here.
    """
    _validate_inputs(labeled, valid, pool)
    space = cfg.task
    if features is None:
        features = {v: prepare_view(v, labeled, valid, pool, cfg.min_df) for v in (FND, IMP)}
    f_fnd, f_imp = features[FND], features[IMP]
    y_lab, y_val = labeled.labels, valid.labels

    if init is not None:
        fnd, imp = init
    else:
        fnd = train_view(f_fnd, y_lab, y_val, space, cfg.train_cfg, 0)
        imp = train_view(f_imp, y_lab, y_val, space, cfg.train_cfg, 0)

    def valid_scores(fnd, imp):
        p_f, p_i = predict_proba(fnd, f_fnd.valid), predict_proba(imp, f_imp.valid)
        return {
            FND: _acc(p_f.argmax(1), y_val),
            IMP: _acc(p_i.argmax(1), y_val),
            "ensemble": _acc(average_dist(p_f, p_i).argmax(1), y_val),
        }

    n_pool = len(pool)
    scores = valid_scores(fnd, imp)
    logs = [RoundLog(0, scores, pool_size=n_pool)]
    if n_pool == 0:
        log.warning("unlabeled pool is empty; returning the supervised initialisation")
        return CotrainResult(fnd, imp, logs)

    ids = pool.ids
    id_rank = _id_ranks(ids)
    best = (scores["ensemble"], fnd, imp)
    prev = scores["ensemble"]
    for rnd in range(1, cfg.max_rounds + 1):
        # Findings teaches Impression.
        y_f, c_f = predict_labels(fnd, f_fnd.pool)
        y_i, c_i = predict_labels(imp, f_imp.pool)
        agreed = np.flatnonzero(y_f == y_i)
        agreement = len(agreed) / n_pool
        rows = topk_indices(agreed, c_f, id_rank, cfg.top_k_percent)
        sel_fnd = PseudoLabeledSet(FND, tuple((ids[j], int(y_f[j]), float(c_f[j])) for j in rows))
        if on_selection is not None:
            on_selection(rnd, sel_fnd)
        imp = train_view(
            f_imp, y_lab, y_val, space, cfg.train_cfg, rnd,
            extra=(rows, y_f[rows]), init=imp if cfg.warm_start else None,
        )

        # Impression (just retrained) teaches Findings.
        y_i, c_i = predict_labels(imp, f_imp.pool)
        agreed = np.flatnonzero(y_f == y_i)
        rows = topk_indices(agreed, c_i, id_rank, cfg.top_k_percent)
        sel_imp = PseudoLabeledSet(IMP, tuple((ids[j], int(y_i[j]), float(c_i[j])) for j in rows))
        if on_selection is not None:
            on_selection(rnd, sel_imp)
        fnd = train_view(
            f_fnd, y_lab, y_val, space, cfg.train_cfg, rnd,
            extra=(rows, y_i[rows]), init=fnd if cfg.warm_start else None,
        )

        scores = valid_scores(fnd, imp)
        logs.append(RoundLog(rnd, scores, {FND: len(sel_fnd), IMP: len(sel_imp)}, agreement, n_pool))
        log.info("cotrain round %d: %s", rnd, scores)
        if scores["ensemble"] > best[0]:
            best = (scores["ensemble"], fnd, imp)
        if scores["ensemble"] <= prev:
            break
        prev = scores["ensemble"]

    return CotrainResult(best[1], best[2], logs)


def selftrain(
    labeled: LabeledDataset,
    valid: LabeledDataset,
    pool: UnlabeledDataset,
    view: str,
    cfg: CotrainConfig,
    features: ViewFeatures | None = None,
    init: ClassifierParams | None = None,
    on_selection: SelectionHook | None = None,
) -> SelftrainResult:
    """One classifier labels the pool for itself: top k% of all pool items by its own confidence."""
    _validate_inputs(labeled, valid, pool)
    space = cfg.task
    feats = features if features is not None else prepare_view(view, labeled, valid, pool, cfg.min_df)
    y_lab, y_val = labeled.labels, valid.labels
    params = init if init is not None else train_view(feats, y_lab, y_val, space, cfg.train_cfg, 0)

    def score(p):
        return _acc(predict_labels(p, feats.valid)[0], y_val)

    n_pool = len(pool)
    acc = score(params)
    logs = [RoundLog(0, {view: acc}, pool_size=n_pool)]
    if n_pool == 0:
        log.warning("unlabeled pool is empty; returning the supervised initialisation")
        return SelftrainResult(params, logs)

    ids = pool.ids
    id_rank = _id_ranks(ids)
    everything = np.arange(n_pool)
    best, prev = (acc, params), acc
    for rnd in range(1, cfg.max_rounds + 1):
        y_p, c_p = predict_labels(params, feats.pool)
        rows = topk_indices(everything, c_p, id_rank, cfg.top_k_percent)
        if on_selection is not None:
            on_selection(rnd, PseudoLabeledSet(view, tuple((ids[j], int(y_p[j]), float(c_p[j])) for j in rows)))
        params = train_view(
            feats, y_lab, y_val, space, cfg.train_cfg, rnd,
            extra=(rows, y_p[rows]), init=params if cfg.warm_start else None,
        )
        acc = score(params)
        logs.append(RoundLog(rnd, {view: acc}, {view: len(rows)}, None, n_pool))
        if acc > best[0]:
            best = (acc, params)
        if acc <= prev:
            break
        prev = acc
    return SelftrainResult(best[1], logs)
