import pytest
from hypothesis import given, settings, strategies as st

from radcotrain.corpus import UnlabeledDataset, split_k_folds
from radcotrain.engine import (
    FND,
    IMP,
    CotrainConfig,
    cotrain,
    prepare_view,
    select_agreed_topk,
    selection_size,
    selftrain,
    train_view,
)
from radcotrain.errors import ConfigError, ContractError
from conftest import FAST_TRAIN


def brute_force(fnd, imp, source, k):
    """Sort-and-slice reference for the agreement + top-k rule."""
    other = {rid: y for rid, y, _ in (imp if source == FND else fnd)}
    src = fnd if source == FND else imp
    agreed = [(rid, y, c) for rid, y, c in src if other[rid] == y]
    agreed.sort(key=lambda t: (-t[2], t[0]))
    n = -(-k * len(agreed) // 100)  # integer ceil
    return agreed[:n]


@st.composite
def predictions(draw):
    n = draw(st.integers(0, 30))
    ids = draw(st.lists(st.text("abcdef", min_size=1, max_size=4), min_size=n, max_size=n, unique=True))
    levels = [0.5, 0.6, 0.75, 0.9]  # few levels so ties are common
    fnd = [(rid, draw(st.integers(0, 2)), draw(st.sampled_from(levels))) for rid in ids]
    imp = [(rid, draw(st.integers(0, 2)), draw(st.sampled_from(levels))) for rid in ids]
    return fnd, imp


@settings(max_examples=300, deadline=None)
@given(preds=predictions(), source=st.sampled_from([FND, IMP]), k=st.sampled_from([1, 10, 25, 33, 50, 75, 99, 100]))
def test_selection_matches_brute_force(preds, source, k):
    fnd, imp = preds
    got = select_agreed_topk(fnd, imp, source, k)
    assert list(got.items) == brute_force(fnd, imp, source, k)
    assert got.source_view == source


@settings(max_examples=100, deadline=None)
@given(preds=predictions())
def test_selection_nested_in_k(preds):
    fnd, imp = preds
    sets = [select_agreed_topk(fnd, imp, FND, k).ids for k in (10, 25, 50, 75, 100)]
    for small, big in zip(sets, sets[1:]):
        assert big[:len(small)] == small


def test_selection_size_exact():
    assert selection_size(50, 3) == 2
    assert selection_size(10, 30) == 3
    assert selection_size(100, 7) == 7
    assert selection_size(25, 0) == 0
    assert selection_size(0.1, 1) == 1


def test_selection_rejects_mismatched_ids():
    with pytest.raises(ContractError):
        select_agreed_topk([("a", 0, 0.9)], [("b", 0, 0.9)], FND, 50)
    with pytest.raises(ConfigError):
        select_agreed_topk([], [], "concat", 50)


def test_config_validation():
    from radcotrain.corpus import BT
    with pytest.raises(ConfigError):
        CotrainConfig(BT, top_k_percent=0)
    with pytest.raises(ConfigError):
        CotrainConfig(BT, max_rounds=0)


@pytest.fixture(scope="module")
def fold(small_corpus):
    labeled, pool, _, hidden = small_corpus
    return split_k_folds(labeled, 5, 0)[0], pool, hidden


def test_empty_pool_returns_initialisation(fold):
    t, _, _ = fold
    from radcotrain.corpus import BT
    cfg = CotrainConfig(BT, train_cfg=FAST_TRAIN)
    empty = UnlabeledDataset(())
    feats = {v: prepare_view(v, t.train, t.valid, empty) for v in (FND, IMP)}
    init = tuple(train_view(feats[v], t.train.labels, t.valid.labels, BT, FAST_TRAIN) for v in (FND, IMP))
    res = cotrain(t.train, t.valid, empty, cfg, features=feats)
    assert res.fnd.weights.tobytes() == init[0].weights.tobytes()
    assert res.imp.weights.tobytes() == init[1].weights.tobytes()
    assert len(res.logs) == 1


def test_cotrain_selection_invariants(fold):
    t, pool, _ = fold
    from radcotrain.corpus import BT
    cfg = CotrainConfig(BT, top_k_percent=40, max_rounds=2, train_cfg=FAST_TRAIN)
    seen = []
    res = cotrain(t.train, t.valid, pool, cfg, on_selection=lambda r, s: seen.append((r, s)))
    pool_ids, lab_ids = set(pool.ids), set(t.train.ids)
    assert seen and [s.source_view for _, s in seen][:2] == [FND, IMP]
    for rnd, s in seen:
        assert set(s.ids) <= pool_ids and not set(s.ids) & lab_ids
        assert len(set(s.ids)) == len(s)
        confs = [c for _, _, c in s.items]
        assert confs == sorted(confs, reverse=True)
    assert res.logs[0].round == 0
    assert len(res.logs) <= cfg.max_rounds + 1
    # selection sizes recorded in the log follow the top-k rule of the agreed set
    for lg in res.logs[1:]:
        assert lg.selected[FND] == selection_size(40, round(lg.agreement_rate * len(pool)))


def test_cotrain_deterministic(fold):
    t, pool, _ = fold
    from radcotrain.corpus import BT
    cfg = CotrainConfig(BT, max_rounds=2, train_cfg=FAST_TRAIN)
    a = cotrain(t.train, t.valid, pool, cfg)
    b = cotrain(t.train, t.valid, pool, cfg)
    assert a.fnd.weights.tobytes() == b.fnd.weights.tobytes()
    assert [lg.to_json() for lg in a.logs] == [lg.to_json() for lg in b.logs]


def test_cotrain_returns_best_round(fold):
    t, pool, _ = fold
    from radcotrain.corpus import BT
    res = cotrain(t.train, t.valid, pool, CotrainConfig(BT, max_rounds=3, train_cfg=FAST_TRAIN))
    ens = [lg.valid_accuracy["ensemble"] for lg in res.logs]
    # stops at the first round that fails to improve
    assert all(b > a for a, b in zip(ens[:-2], ens[1:-1]))


def test_selftrain_selects_from_whole_pool(fold):
    t, pool, _ = fold
    from radcotrain.corpus import BT
    seen = []
    cfg = CotrainConfig(BT, top_k_percent=20, max_rounds=1, train_cfg=FAST_TRAIN)
    selftrain(t.train, t.valid, pool, IMP, cfg, on_selection=lambda r, s: seen.append(s))
    assert len(seen[0]) == selection_size(20, len(pool))
    assert seen[0].source_view == IMP


def test_overlapping_pool_rejected(fold):
    t, _, _ = fold
    from radcotrain.corpus import BT
    from radcotrain.errors import CorpusError
    overlap = UnlabeledDataset(tuple(t.train.reports[:3]))
    with pytest.raises(CorpusError):
        cotrain(t.train, t.valid, overlap, CotrainConfig(BT, train_cfg=FAST_TRAIN))
