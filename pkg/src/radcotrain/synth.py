"""Synthetic two-view corpora drawn from a class-conditional unigram mixture.

Each report gets a class from the priors. Every token of a view is, with
probability ``view_signal[view]``, drawn from that class's private word list
for the view, and otherwise from a noise list shared by all classes and views.
Within a list, word frequencies follow a Zipf law. Given the class, the two
views are sampled independently.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from radcotrain.corpus import BT, FINDINGS, IMPRESSION, LabeledDataset, LabelSpace, Report, UnlabeledDataset
from radcotrain.errors import ConfigError

# label counts of the two annotated tasks (absent:present, and the three aggressiveness grades)
BT_PRIORS = (331 / 868, 537 / 868)
AGGRESSIVENESS_PRIORS = (331 / 868, 344 / 868, 193 / 868)

VIEWS = ("fnd", "imp")

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]


@dataclass(frozen=True)
class GenConfig:
    space: LabelSpace = BT
    class_priors: tuple[float, ...] = BT_PRIORS
    # per-view (fnd, imp) sizes of each class's private word list
    vocab_per_class: tuple[int, int] = (200_000, 25_000)
    shared_noise_vocab: int = 200
    fnd_length_mean: int = 219
    imp_length_mean: int = 55
    view_signal: tuple[float, float] = (0.25, 0.35)
    # word frequencies inside every list follow rank**-zipf_exponent
    zipf_exponent: float = 0.3
    n_labeled: int = 868
    n_unlabeled: int = 10_000
    n_test: int = 500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_priors", tuple(float(p) for p in self.class_priors))
        object.__setattr__(self, "vocab_per_class", tuple(int(v) for v in self.vocab_per_class))
        object.__setattr__(self, "view_signal", tuple(float(s) for s in self.view_signal))
        if len(self.class_priors) != self.space.k:
            raise ConfigError(f"{len(self.class_priors)} priors for {self.space.k} classes")
        if any(p < 0 for p in self.class_priors) or abs(sum(self.class_priors) - 1.0) > 1e-9:
            raise ConfigError(f"class priors must be non-negative and sum to 1, got {sum(self.class_priors)!r}")
        if self.fnd_length_mean < 1 or self.imp_length_mean < 1:
            raise ConfigError("view length means must be >= 1")
        if len(self.view_signal) != 2 or not all(0.0 <= s <= 1.0 for s in self.view_signal):
            raise ConfigError("view_signal needs two values in [0, 1]")
        if len(self.vocab_per_class) != 2 or min(self.vocab_per_class) < 1 or self.shared_noise_vocab < 1:
            raise ConfigError("vocabulary sizes must be >= 1")
        if self.zipf_exponent < 0:
            raise ConfigError("zipf_exponent must be non-negative")
        if min(self.n_labeled, self.n_unlabeled, self.n_test) < 0:
            raise ConfigError("dataset sizes must be non-negative")

    @classmethod
    def for_task(cls, space: LabelSpace, **overrides) -> GenConfig:
        priors = AGGRESSIVENESS_PRIORS if space.k == 3 and space.task_name == "aggressiveness" else None
        if priors is None:
            priors = BT_PRIORS if space.k == 2 else tuple([1.0 / space.k] * space.k)
        return cls(space=space, class_priors=priors, **overrides)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["space"] = {"task_name": self.space.task_name, "class_names": list(self.space.class_names)}
        return d


def _word(i: int) -> str:
    """The i-th pseudo-word: three consonant-vowel syllables, then a fourth when i overflows."""
    n = len(_SYLLABLES)
    parts = []
    for _ in range(3):
        i, r = divmod(i, n)
        parts.append(_SYLLABLES[r])
    while i:
        i, r = divmod(i - 1, n)
        parts.append(_SYLLABLES[r])
    return "".join(parts)


@dataclass(frozen=True)
class Lexicon:
    """Word lists: ``class_words[view][c]`` and the shared ``noise`` list."""

    class_words: tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]
    noise: np.ndarray

    def word_class(self, view: int) -> dict[str, int]:
        """Map each private word of ``view`` to its class; noise words are absent."""
        return {w: c for c, words in enumerate(self.class_words[view]) for w in words}


def class_list_sizes(size: int, priors: tuple[float, ...]) -> list[int]:
    """Per-class list sizes proportional to the priors, averaging ``size``.

    Scaling each class's list by its prior gives every class word the same
    expected corpus frequency, so no class is easier to cover from few labels.
    """
    k = len(priors)
    return [max(1, round(size * k * p)) for p in priors]


@lru_cache(maxsize=8)
def _lexicon(priors: tuple[float, ...], vocab_per_class: tuple[int, int], noise: int) -> Lexicon:
    sizes = [class_list_sizes(v, priors) for v in vocab_per_class]
    total = sum(map(sum, sizes)) + noise
    # fixed shuffle so word shape carries no class information
    order = np.random.default_rng(20240520).permutation(total)
    words = np.array([_word(int(i)) for i in order], dtype=object)
    pos = 0
    per_view = []
    for view_sizes in sizes:
        lists = []
        for size in view_sizes:
            lists.append(words[pos:pos + size])
            pos += size
        per_view.append(tuple(lists))
    return Lexicon((per_view[0], per_view[1]), words[pos:pos + noise])


def build_lexicon(cfg: GenConfig) -> Lexicon:
    return _lexicon(cfg.class_priors, cfg.vocab_per_class, cfg.shared_noise_vocab)


def _zipf_draw(rng, size: int, count: int, exponent: float) -> np.ndarray:
    cdf = np.cumsum(np.arange(1, size + 1, dtype=np.float64) ** -exponent)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, rng.random(count), side="right"), size - 1)


def _sample_view(rng, labels, mean, signal, class_words, noise, exponent) -> list[str]:
    lengths = np.maximum(rng.poisson(mean, size=len(labels)), 1)
    total = int(lengths.sum())
    owner = np.repeat(labels, lengths)
    is_signal = rng.random(total) < signal
    tokens = noise[_zipf_draw(rng, len(noise), total, exponent)]
    for c, words in enumerate(class_words):
        slots = np.flatnonzero(is_signal & (owner == c))
        tokens[slots] = words[_zipf_draw(rng, len(words), len(slots), exponent)]
    bounds = np.concatenate([[0], np.cumsum(lengths)])
    return [" ".join(tokens[bounds[i]:bounds[i + 1]]) for i in range(len(labels))]


def _sample_reports(rng, cfg: GenConfig, lex: Lexicon, n: int, prefix: str):
    labels = rng.choice(cfg.space.k, size=n, p=cfg.class_priors)
    fnd = _sample_view(rng, labels, cfg.fnd_length_mean, cfg.view_signal[0], lex.class_words[0], lex.noise, cfg.zipf_exponent)
    imp = _sample_view(rng, labels, cfg.imp_length_mean, cfg.view_signal[1], lex.class_words[1], lex.noise, cfg.zipf_exponent)
    ids = [f"{prefix}-{i:05d}" for i in range(n)]
    return ids, labels, fnd, imp


def generate(cfg: GenConfig) -> tuple[LabeledDataset, UnlabeledDataset, LabeledDataset, dict[str, int]]:
    """Labeled set, unlabeled pool, test set, and the pool's hidden labels."""
    lex = build_lexicon(cfg)
    rng = np.random.default_rng(cfg.seed)
    space = cfg.space
    out = []
    hidden: dict[str, int] = {}
    for prefix, n in (("lab", cfg.n_labeled), ("unl", cfg.n_unlabeled), ("tst", cfg.n_test)):
        ids, labels, fnd, imp = _sample_reports(rng, cfg, lex, n, prefix)
        if prefix == "unl":
            hidden = {rid: int(y) for rid, y in zip(ids, labels)}
            out.append(UnlabeledDataset(tuple(
                Report(rid, {FINDINGS: f, IMPRESSION: m}) for rid, f, m in zip(ids, fnd, imp)
            )))
        else:
            out.append(LabeledDataset(space, tuple(
                (Report(rid, {FINDINGS: f, IMPRESSION: m}, {space.task_name: space.class_names[y]}), int(y))
                for rid, y, f, m in zip(ids, labels, fnd, imp)
            )))
    labeled, pool, test = out
    return labeled, pool, test, hidden


def save_hidden_labels(hidden: dict[str, int], space: LabelSpace, path: str | Path) -> None:
    payload = {"task": space.task_name, "labels": {rid: space.class_names[y] for rid, y in hidden.items()}}
    Path(path).write_text(json.dumps(payload, indent=0, sort_keys=True) + "\n", encoding="utf-8")


def load_hidden_labels(path: str | Path, space: LabelSpace) -> dict[str, int]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return {rid: space.index_of(name) for rid, name in payload["labels"].items()}


class VacuousPrecisionWarning(UserWarning):
    """Precision was requested for an empty pseudo-labeled set."""


def pseudo_label_precision(selected, hidden_labels: dict[str, int]) -> float:
    """Fraction of ``(id, label, confidence)`` items whose label matches the hidden truth.

    An empty selection scores 1.0 and emits :class:`VacuousPrecisionWarning`.
    """
    items = list(getattr(selected, "items", selected))
    if not items:
        warnings.warn("empty pseudo-labeled set; precision defined as 1.0", VacuousPrecisionWarning, stacklevel=2)
        return 1.0
    correct = 0
    for rid, label, _ in items:
        if rid not in hidden_labels:
            raise KeyError(f"no hidden label for id {rid!r}")
        correct += hidden_labels[rid] == label
    return correct / len(items)


def signal_indicator(text: str, word_class: dict[str, int], label: int, signal: float) -> int:
    """1 if at least a ``signal`` fraction of the view's tokens come from ``label``'s private list."""
    tokens = text.split()
    hits = sum(word_class.get(t) == label for t in tokens)
    return int(hits >= signal * len(tokens))


def conditional_mutual_information(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """Plug-in estimate of I(a; b | c) in nats for discrete arrays."""
    a, b, c = map(np.asarray, (a, b, c))
    total = 0.0
    n = len(c)
    for cv in np.unique(c):
        mask = c == cv
        pc = mask.sum() / n
        aa, bb = a[mask], b[mask]
        m = len(aa)
        for av in np.unique(aa):
            pa = np.mean(aa == av)
            for bv in np.unique(bb):
                pab = np.sum((aa == av) & (bb == bv)) / m
                if pab > 0:
                    total += pc * pab * np.log(pab / (pa * np.mean(bb == bv)))
    return float(total)
