import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prisample.errors import AlreadyExhausted, EmptyMaster, MasterMismatch, MissingFeature, ModeMismatch
from prisample.model import TRUE, Feature, Uniform, node, parse_predicate
from prisample.playout import (
    Mode,
    extend_sample,
    format_sample,
    increment,
    parse_sample,
    sample_by_predicate,
    sample_cost_limited,
)
from prisample.sampler import PriorityEntry, assign_priorities, build_master, create_master


def test_first_match(abc_master):
    s = sample_by_predicate(abc_master, TRUE, 1)
    assert s.ids == ["a"] and s.z == 5
    assert not s.exhausted and s.cursor == 1
    assert s.entries[0].features["fr"] == 10


def test_exhaustive_uncapped(abc_master):
    s = sample_by_predicate(abc_master, TRUE, 3)
    assert s.ids == ["a", "b", "c"] and s.z == 0 and s.exhausted


def test_capped_exhaustion_rule():
    # six master positions, matches (fr == 1) only at positions 2 and 5
    recs = [node(f"p{i}", 1, 1 if i in (2, 5) else 0, 1) for i in range(1, 8)]
    entries = [PriorityEntry(r.id, 1.0, 1.0, 100.0 - i) for i, r in enumerate(recs)]
    master = build_master(entries, Uniform(), 0, k_max=6, records=recs)
    assert master.capped and len(master) == 6
    s = sample_by_predicate(master, parse_predicate("fr==1"), 5)
    assert s.ids == ["p2"]
    assert s.z == master.priorities[4] == 96.0
    assert s.exhausted and s.k_returned == 1


def test_extend_hand_trace(abc_master):
    prev = sample_by_predicate(abc_master, TRUE, 1)
    ext = extend_sample(abc_master, prev, 1)
    assert ext.ids == ["a", "b"] and ext.z == 4
    assert [e.id for e in increment(prev, ext)] == ["b"]


def test_extend_exhausted(abc_master):
    prev = sample_by_predicate(abc_master, TRUE, 3)
    with pytest.raises(AlreadyExhausted):
        extend_sample(abc_master, prev, 1)


def test_extend_checks_master_predicate_and_mode(abc_master, abc_records):
    prev = sample_by_predicate(abc_master, TRUE, 1)
    other = create_master(abc_records, Feature("fo"), 99)
    with pytest.raises(MasterMismatch):
        extend_sample(other, prev, 1)
    with pytest.raises(MasterMismatch):
        extend_sample(abc_master, prev, 1, pred=parse_predicate("fo>0"))
    cost = sample_cost_limited(abc_master, TRUE, 1)
    with pytest.raises(ModeMismatch):
        extend_sample(abc_master, cost, 1)


def test_cost_limited_examples(abc_master):
    s = sample_cost_limited(abc_master, parse_predicate("fr>=30"), 2)
    assert s.ids == [] and s.z == 4 and s.mode is Mode.COST_LIMITED
    s = sample_cost_limited(abc_master, TRUE, 2)
    p = sample_by_predicate(abc_master, TRUE, 2)
    assert s.ids == p.ids == ["a", "b"] and s.z == p.z == 4
    s = sample_cost_limited(abc_master, TRUE, 5)
    assert s.ids == ["a", "b", "c"] and s.z == 0


def test_missing_feature_and_empty_master(abc_master):
    with pytest.raises(MissingFeature):
        sample_by_predicate(abc_master, parse_predicate("zz>1"), 1)
    empty = build_master([], Uniform(), 0)
    with pytest.raises(EmptyMaster):
        sample_by_predicate(empty, TRUE, 1)
    with pytest.raises(EmptyMaster):
        sample_cost_limited(empty, TRUE, 1)


def test_master_without_records_plays_true_only(abc_records):
    entries = assign_priorities(abc_records, Feature("fo"), 0)
    bare = build_master(entries, Feature("fo"), 0)
    assert sample_by_predicate(bare, TRUE, 2).k_returned == 2
    with pytest.raises(MissingFeature):
        sample_by_predicate(bare, parse_predicate("fo>1"), 1)


def _pop(n, seed):
    rng = np.random.default_rng(seed)
    return [
        node(f"r{i:03d}", rng.integers(1, 50), rng.integers(0, 10), rng.integers(0, 10))
        for i in range(n)
    ]


PREDS = ["true", "fr>=5", "ac<3 || fr==0", "!(fr>2) && ac>=1"]


@settings(max_examples=150, deadline=None)
@given(
    st.integers(1, 40), st.integers(0, 10_000), st.sampled_from(PREDS),
    st.integers(1, 45), st.one_of(st.none(), st.integers(1, 40)),
)
def test_prefix_property(n, seed, text, k, k_max):
    recs = _pop(n, seed)
    master = create_master(recs, Feature("fo"), seed, k_max=k_max)
    pred = parse_predicate(text)
    feats = {r.id: r for r in recs}
    matches = [i for i in master.ids if pred(feats[i])]
    s = sample_by_predicate(master, pred, k)
    if len(matches) > k:
        expect = matches[:k]
    elif master.capped and matches:
        expect = matches[:-1]
    else:
        expect = matches
    assert s.ids == expect
    assert all(pred(feats[i]) for i in s.ids)
    assert s.k_returned <= k
    if s.z > 0:
        assert all(e.priority > s.z for e in s.entries)
    # the True predicate makes the two modes coincide
    if text == "true":
        c = sample_cost_limited(master, pred, k)
        assert (c.ids, c.z) == (s.ids, s.z)


def test_extension_associativity():
    recs = _pop(60, 1)
    master = create_master(recs, Feature("fo"), 3)
    pred = parse_predicate("fr>=3")
    base = sample_by_predicate(master, pred, 4)
    twice = extend_sample(master, extend_sample(master, base, 3), 5)
    once = extend_sample(master, base, 8)
    direct = sample_by_predicate(master, pred, 12)
    assert twice.ids == once.ids == direct.ids
    assert twice.z == once.z == direct.z
    assert twice.cursor == once.cursor == direct.cursor


def test_sample_round_trip_is_bit_exact():
    recs = _pop(80, 2)
    master = create_master(recs, Feature("fo"), 4)
    s = sample_by_predicate(master, parse_predicate("fr>=3 && !(ac==2) || fo<1.5"), 10)
    text = format_sample(s)
    back = parse_sample(text)
    assert back == s
    assert format_sample(back) == text
    assert back.z.hex() == s.z.hex()
