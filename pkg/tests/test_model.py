import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prisample.errors import DuplicateId, InvalidRecord, MissingFeature, ParseError, ZeroDenominator
from prisample.model import (
    FALSE,
    TRUE,
    And,
    Atom,
    Feature,
    Kind,
    Not,
    Or,
    Population,
    Ratio,
    Record,
    Uniform,
    eval_predicate,
    format_records_csv,
    link,
    node,
    parse_predicate,
    parse_records_csv,
    parse_weight,
    weight_of,
)


def test_weight_examples():
    r = node("u", 300, 1, 1)
    assert weight_of(r, Uniform()) == 1
    assert weight_of(r, Feature("fo")) == 300
    assert weight_of(link("x", "y", 10, 50), Ratio("fo2", "fo1")) == 5


def test_weight_errors():
    r = node("u", 0, 1, 1)
    with pytest.raises(MissingFeature):
        weight_of(r, Feature("nope"))
    with pytest.raises(ZeroDenominator):
        weight_of(r, Ratio("fr", "fo"))


def test_zero_weight_is_legal():
    assert weight_of(node("u", 5, 5, 0), Feature("ac")) == 0


@pytest.mark.parametrize("bad", [-1, math.inf, math.nan])
def test_record_rejects_bad_values(bad):
    with pytest.raises(InvalidRecord):
        node("u", bad, 1, 1)


def test_record_requires_kind_features():
    with pytest.raises(MissingFeature):
        Record("u", Kind.NODE, {"fo": 1, "fr": 1})
    with pytest.raises(MissingFeature):
        Record("l", Kind.LINK, {"fo1": 1, "fo2": 1})


def test_record_is_immutable():
    r = node("u", 1, 2, 3)
    with pytest.raises(TypeError):
        r.features["fo"] = 5


def test_link_derives_ffan():
    l = link("a", "b", 4, 2)
    assert l.id == "a->b"
    assert l["ffan"] == 0.5


def test_predicate_examples():
    assert eval_predicate(node("u", 1, 150, 1), parse_predicate("fr>=100"))
    assert eval_predicate(node("u", 1, 1, 1), TRUE)
    assert eval_predicate(node("u", 5, 1, 9), parse_predicate("fo>=10 || ac>8"))


def test_predicate_missing_feature_is_error():
    # even where short-circuiting would hide it
    with pytest.raises(MissingFeature):
        eval_predicate(node("u", 1, 1, 1), parse_predicate("fo>0 || zz>1"))


def test_predicate_precedence():
    p = parse_predicate("fo>=100 && ac>8 || !(fr<5)")
    assert p == Or(And(Atom("fo", ">=", 100), Atom("ac", ">", 8)), Not(Atom("fr", "<", 5)))
    assert parse_predicate("!fo<5 && fr=2") == And(Not(Atom("fo", "<", 5)), Atom("fr", "==", 2))


@pytest.mark.parametrize("text", ["", "fo>", "fo>>1", "(fo>1", "fo>1)", "fo 1", "fo>1 &&", "3>fo"])
def test_predicate_parse_errors(text):
    with pytest.raises(ParseError):
        parse_predicate(text)


def test_weight_parse_round_trip():
    for text in ["uniform", "feature:fo", "ratio:fo2/fo1"]:
        assert str(parse_weight(text)) == text
    with pytest.raises(ParseError):
        parse_weight("feature:")


FEATS = ("fo", "fr", "ac")


@st.composite
def predicates(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        if draw(st.integers(0, 9)) == 0:
            return draw(st.sampled_from([TRUE, FALSE]))
        return Atom(
            draw(st.sampled_from(FEATS)),
            draw(st.sampled_from(["<", "<=", "==", ">=", ">"])),
            draw(st.integers(0, 6)),
        )
    kind = draw(st.sampled_from(["and", "or", "not"]))
    if kind == "not":
        return Not(draw(predicates(depth=depth - 1)))
    left, right = draw(predicates(depth=depth - 1)), draw(predicates(depth=depth - 1))
    return And(left, right) if kind == "and" else Or(left, right)


small_nodes = st.builds(
    lambda fo, fr, ac: node("x", fo, fr, ac),
    st.integers(0, 6), st.integers(0, 6), st.integers(0, 6),
)


@settings(max_examples=300)
@given(predicates(), predicates(), small_nodes)
def test_de_morgan(p, q, r):
    assert eval_predicate(r, Not(And(p, q))) == eval_predicate(r, Or(Not(p), Not(q)))
    assert eval_predicate(r, Not(Or(p, q))) == eval_predicate(r, And(Not(p), Not(q)))


@settings(max_examples=300)
@given(predicates())
def test_predicate_text_round_trip(p):
    assert parse_predicate(str(p)) == p


@settings(max_examples=100)
@given(predicates(), st.lists(small_nodes, min_size=1, max_size=20))
def test_vectorised_mask_matches_records(p, recs):
    recs = [node(f"n{i}", r["fo"], r["fr"], r["ac"]) for i, r in enumerate(recs)]
    mask = p.mask(Population.of(recs))
    assert mask.tolist() == [eval_predicate(r, p) for r in recs]


@given(small_nodes)
def test_weight_is_deterministic(r):
    assert weight_of(r, Uniform()) == 1
    assert weight_of(r, Feature("fo")) == weight_of(r, Feature("fo"))


def test_population_columns_and_duplicates():
    pop = Population.of([node("a", 1, 2, 3), node("b", 4, 5, 6)])
    assert pop.column("fr").tolist() == [2, 5]
    with pytest.raises(MissingFeature):
        pop.column("ffan")
    with pytest.raises(DuplicateId, match="'a'"):
        Population.of([node("a", 1, 2, 3), node("a", 4, 5, 6)])


def test_ratio_weights_vectorised():
    pop = Population.of([link("a", "b", 2, 8), link("b", "a", 8, 2)])
    assert Ratio("fo2", "fo1").weights(pop).tolist() == [4.0, 0.25]


def test_node_csv_round_trip():
    recs = [node("a", 300, 2, 0), node("b", 1.5, 7, 9)]
    text = format_records_csv(recs)
    assert text.splitlines()[0] == "id,fo,fr,ac"
    back = parse_records_csv(text)
    assert [(r.id, dict(r.features)) for r in back] == [(r.id, dict(r.features)) for r in recs]


def test_link_csv_round_trip():
    recs = [link("a", "b", 3, 7), link("b", "a", 7, 3)]
    text = format_records_csv(recs)
    assert text.splitlines()[0] == "u1,u2,fo1,fo2"
    back = parse_records_csv(text)
    assert [r.id for r in back] == ["a->b", "b->a"]
    assert back[0]["ffan"] == 7 / 3
    assert all(r.kind is Kind.LINK for r in back)


@pytest.mark.parametrize(
    "text, line",
    [
        ("id,fo,fr,ac\na,1,2,3\nb,1,x,3\n", 3),
        ("id,fo,fr,ac\na,1,2\n", 2),
        ("id,fo,fr,ac\na,1,2,-3\n", 2),
        ("u1,u2,fo1,fo2\na,b,0,3\n", 2),
        ("name,fo\n", 1),
    ],
)
def test_csv_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError, match=f"line {line}"):
        parse_records_csv(text)


def test_csv_duplicate_id():
    with pytest.raises(DuplicateId, match="'a'"):
        parse_records_csv("id,fo,fr,ac\na,1,2,3\na,1,2,3\n")


def test_features_stored_as_float():
    r = node("a", 3, 4, 5)
    assert all(isinstance(v, float) for v in r.features.values())
    assert np.asarray(Population.of([r]).column("fo")).dtype == np.float64
