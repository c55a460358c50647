"""Average-probability ensemble of the two view classifiers, and accuracy."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from radcotrain.corpus import Report
from radcotrain.errors import ContractError
from radcotrain.features import Vocabulary, featurize
from radcotrain.linear import ClassifierParams, argmax_with_confidence, predict_dist


def average_dist(p_fnd: np.ndarray, p_imp: np.ndarray) -> np.ndarray:
    """``(p_fnd + p_imp) / 2``; works row-wise on 2-D inputs."""
    p_fnd, p_imp = np.asarray(p_fnd, dtype=np.float64), np.asarray(p_imp, dtype=np.float64)
    if p_fnd.shape != p_imp.shape:
        raise ContractError(f"distribution shapes differ: {p_fnd.shape} vs {p_imp.shape}")
    return 0.5 * (p_fnd + p_imp)


def ensemble_labels(p_fnd: np.ndarray, p_imp: np.ndarray) -> np.ndarray:
    return argmax_with_confidence(average_dist(p_fnd, p_imp))[0]


def ensemble_predict(
    fnd: ClassifierParams,
    imp: ClassifierParams,
    r: Report,
    fnd_vocab: Vocabulary,
    imp_vocab: Vocabulary,
) -> tuple[int, np.ndarray]:
    """Label (lowest index on ties) and averaged distribution for one report."""
    if fnd.space != imp.space:
        raise ContractError(f"label spaces differ: {fnd.space.task_name} vs {imp.space.task_name}")
    dist = average_dist(
        predict_dist(fnd, featurize(r.fnd_text, fnd_vocab)),
        predict_dist(imp, featurize(r.imp_text, imp_vocab)),
    )
    return int(np.argmax(dist)), dist


def accuracy(preds: Sequence[int], gold: Sequence[int]) -> float:
    preds, gold = np.asarray(preds), np.asarray(gold)
    if preds.shape != gold.shape:
        raise ContractError(f"{len(preds)} predictions for {len(gold)} gold labels")
    if preds.size == 0:
        raise ContractError("accuracy of an empty prediction list")
    return float(np.mean(preds == gold))
