import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radcotrain.corpus import (
    AGGRESSIVENESS,
    BT,
    FINDINGS,
    IMPRESSION,
    LabeledDataset,
    LabelSpace,
    Report,
    UnlabeledDataset,
    check_disjoint,
    concat_views,
    fold_assignment,
    load_labeled,
    load_unlabeled,
    save_jsonl,
    save_labeled,
    split_k_folds,
)
from radcotrain.errors import ConfigError, CorpusError, ReportParseError


def rep(rid, fnd="mass seen", imp="tumor", **labels):
    return Report(rid, {FINDINGS: fnd, IMPRESSION: imp}, labels)


def test_report_requires_both_views():
    with pytest.raises(ReportParseError):
        Report("a", {FINDINGS: "x"})
    with pytest.raises(ReportParseError):
        Report("a", {FINDINGS: "x", IMPRESSION: "   "})


def test_concat_joins_with_single_space():
    r = rep("a", fnd="left mass  \n", imp="\n glioma")
    assert concat_views(r) == "left mass glioma"


def test_label_space_lookup_is_case_insensitive():
    assert AGGRESSIVENESS.index_of("Possibly-Aggressive") == 2
    with pytest.raises(KeyError):
        BT.index_of("maybe")
    with pytest.raises(ConfigError):
        LabelSpace("x", ("a",))
    with pytest.raises(ConfigError):
        BT.check(2)


def test_duplicate_ids_rejected():
    with pytest.raises(CorpusError):
        UnlabeledDataset((rep("a"), rep("a")))
    with pytest.raises(CorpusError):
        check_disjoint(UnlabeledDataset((rep("a"),)), UnlabeledDataset((rep("a"),)))


def test_jsonl_roundtrip(tmp_path):
    data = LabeledDataset(BT, ((rep("r1", bt="present"), 1), (rep("r2", bt="absent"), 0)))
    path = tmp_path / "lab.jsonl"
    save_labeled(data, path)
    back = load_labeled(path, BT)
    assert back.ids == ["r1", "r2"]
    assert back.labels.tolist() == [1, 0]
    assert back.reports[0].sections == data.reports[0].sections


def test_load_reports_line_of_bad_label(tmp_path):
    path = tmp_path / "lab.jsonl"
    lines = [
        {"id": "a", "sections": {"FINDINGS": "x", "IMPRESSION": "y"}, "labels": {"bt": "present"}},
        {"id": "b", "sections": {"FINDINGS": "x", "IMPRESSION": "y"}, "labels": {"bt": "unsure"}},
    ]
    path.write_text("\n".join(json.dumps(x) for x in lines) + "\n")
    with pytest.raises(CorpusError) as err:
        load_labeled(path, BT)
    assert err.value.line == 2 and "unsure" in str(err.value)


def test_load_accepts_raw_text_and_aliases(tmp_path):
    path = tmp_path / "pool.jsonl"
    records = [
        {"id": "a", "text": "Observations: lesion\nConclusion: tumor\n"},
        {"id": "b", "sections": {"findings": "x", "Impressions": "y"}},
    ]
    path.write_text("\n".join(json.dumps(r) for r in records))
    pool = load_unlabeled(path)
    assert pool.items[0].fnd_text == "lesion"
    assert pool.items[1].imp_text == "y"


def test_load_rejects_missing_section_with_line(tmp_path):
    path = tmp_path / "pool.jsonl"
    path.write_text(json.dumps({"id": "a", "text": "FINDINGS: only"}) + "\n")
    with pytest.raises(CorpusError) as err:
        load_unlabeled(path)
    assert err.value.line == 1


def test_save_jsonl_one_line_per_report(tmp_path):
    path = tmp_path / "x.jsonl"
    save_jsonl([rep("a"), rep("b")], path)
    assert len(path.read_text().splitlines()) == 2


def _dataset(n):
    return LabeledDataset(BT, tuple((rep(f"r{i:04d}"), i % 2) for i in range(n)))


def test_fold_sizes_for_868():
    sizes = [len(p) for p in fold_assignment(868, 5, 0)]
    assert sizes == [174, 174, 174, 173, 173]
    t0 = split_k_folds(_dataset(868), 5, 0)[0]
    assert (len(t0.train), len(t0.valid), len(t0.test)) == (520, 174, 174)


def test_split_rejects_too_few():
    with pytest.raises(ConfigError):
        split_k_folds(_dataset(4), 5, 0)
    with pytest.raises(ConfigError):
        split_k_folds(_dataset(10), 2, 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(5, 60), folds=st.integers(3, 5), seed=st.integers(0, 2**32 - 1))
def test_folds_partition_and_roles(n, folds, seed):
    if n < folds:
        return
    data = _dataset(n)
    triples = split_k_folds(data, folds, seed)
    tests = sorted(i for t in triples for i in t.test.ids)
    assert tests == sorted(data.ids)
    for t in triples:
        parts = [set(t.train.ids), set(t.valid.ids), set(t.test.ids)]
        assert sum(map(len, parts)) == n
        assert set().union(*parts) == set(data.ids)
    sizes = [len(t.test) for t in triples]
    assert max(sizes) - min(sizes) <= 1
    assert np.array_equal(fold_assignment(n, folds, seed)[0], fold_assignment(n, folds, seed)[0])
