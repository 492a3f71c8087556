import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aamcbr.domain import (
    CREDIT_DOMAIN,
    Case,
    CaseBase,
    ConsistencyViolation,
    Factor,
    FactorDomain,
    UnknownFactor,
    check_consistency,
    complement,
    ids_for_sentences,
    normalize_sentence,
)

CREDIT_SENTENCES = [
    "low debt-to-income ratio",
    "long and stable employment history",
    "consistent payment history on existing loans",
    "significant assets declared",
    "positive relationship with the bank",
    "high number of recent credit inquiries.",
    "missed or late payments history",
    "insufficient income",
    "limited credit history",
    "young age",
]


def test_credit_domain_sentences_verbatim():
    assert [f.sentence for f in CREDIT_DOMAIN] == CREDIT_SENTENCES
    assert CREDIT_DOMAIN.ids == ("p1", "p2", "p3", "p4", "p5", "n1", "n2", "n3", "n4", "n5")
    polarity = [f.polarity for f in CREDIT_DOMAIN]
    assert polarity == ["positive"] * 5 + ["negative"] * 5


def test_domain_json_roundtrip(tmp_path):
    path = tmp_path / "domain.json"
    CREDIT_DOMAIN.dump(path)
    doc = json.loads(path.read_text())
    assert [f["sentence"] for f in doc["factors"]] == CREDIT_SENTENCES
    assert doc["factors"][0] == {"id": "p1", "sentence": "low debt-to-income ratio", "polarity": "positive"}
    assert FactorDomain.load(path) == CREDIT_DOMAIN


@pytest.mark.parametrize(
    "factors",
    [
        [],
        [Factor("a", "x", "positive"), Factor("a", "y", "positive")],
        [Factor("a", "x", "positive"), Factor("b", "x", "negative")],
    ],
)
def test_domain_rejects_bad_factor_lists(factors):
    with pytest.raises(ValueError):
        FactorDomain(factors)


def test_bad_polarity():
    with pytest.raises(ValueError):
        Factor("a", "x", "neutral")


def test_situation_validation():
    assert CREDIT_DOMAIN.situation(["n4", "p5"]) == frozenset({"n4", "p5"})
    with pytest.raises(UnknownFactor):
        CREDIT_DOMAIN.situation(["n4", "zz"])


def test_complement():
    assert complement(0) == 1
    assert complement(1) == 0
    for o in (0, 1):
        assert complement(complement(o)) == o
    with pytest.raises(ValueError):
        complement(2)


def test_check_consistency_gamma1():
    cb = check_consistency([Case({"n4"}, 0), Case({"p2", "n3", "n4"}, 1)])
    assert len(cb) == 2


def test_check_consistency_empty():
    assert len(check_consistency([])) == 0


def test_check_consistency_conflict():
    with pytest.raises(ConsistencyViolation) as exc:
        check_consistency([Case({"n4"}, 0), Case({"n4"}, 1)])
    assert exc.value.conflicts == [frozenset({"n4"})]


def test_conflict_report_lists_every_set():
    cases = [Case({"a"}, 0), Case({"a"}, 1), Case({"b"}, 1), Case({"b"}, 0), Case({"c"}, 1)]
    with pytest.raises(ConsistencyViolation) as exc:
        check_consistency(cases)
    assert set(exc.value.conflicts) == {frozenset({"a"}), frozenset({"b"})}


def test_duplicates_collapse():
    cb = check_consistency([Case({"a", "b"}, 1), Case(["b", "a"], 1)])
    assert len(cb) == 1


@given(st.lists(st.sampled_from("abcd"), max_size=4))
def test_case_equality_ignores_order(fs):
    assert Case(fs, 1) == Case(list(reversed(fs)), 1)
    assert hash(Case(fs, 1)) == hash(Case(sorted(fs), 1))


@given(
    st.lists(
        st.tuples(st.frozensets(st.sampled_from("abc")), st.sampled_from([0, 1])), max_size=8
    )
)
def test_valid_case_bases_have_no_contrary_pairs(pairs):
    try:
        cb = check_consistency(Case(x, o) for x, o in pairs)
    except ConsistencyViolation:
        return
    cases = list(cb)
    for c in cases:
        for d in cases:
            assert not (c.factors == d.factors and c.outcome != d.outcome)


def test_sentence_normalization():
    assert normalize_sentence("  High number of recent credit inquiries  ") == normalize_sentence(
        "high number of recent credit inquiries."
    )
    ids, unknown = ids_for_sentences(CREDIT_DOMAIN, ["Young age.", '"limited credit history"', "tall"])
    assert ids == {"n5", "n4"}
    assert unknown == ["tall"]
