import dataclasses
import json
import random

import pytest

from aamcbr.agents import (
    FAILED,
    OK,
    RETRIED,
    FactorizedCase,
    ParseFailure,
    determine_coverage,
    extract_case_factors,
    parse_json_array,
    parse_yes_no,
    run_aam_cbr,
)
from aamcbr.backends import BackendFailure, NoisyOracleBackend, OracleBackend, TransportError
from aamcbr.domain import CREDIT_DOMAIN, Case, CaseBase
from aamcbr.reasoner import aacbr_outcome

S = {f.id: f.sentence for f in CREDIT_DOMAIN}
TRUTH = {"case n4": frozenset({"n4"}), "case p2n3n4": frozenset({"p2", "n3", "n4"})}
PREVIOUS = [("case n4", 0), ("case p2n3n4", 1)]


class Scripted:
    identity = "scripted"

    def __init__(self, answers):
        self.answers = list(answers)
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        return self.answers.pop(0)


class Down:
    identity = "down"

    def complete(self, prompt):
        raise TransportError("connection refused")


@pytest.mark.parametrize("text,expected", [
    ("YES", True), ("no", False), ("  'Yes'. ", True), ("**NO**", False),
    ("Yes, because", None), ("maybe", None), ("", None),
])
def test_parse_yes_no(text, expected):
    assert parse_yes_no(text) is expected


def test_parse_json_array():
    assert parse_json_array('["a", "b"]') == ["a", "b"]
    assert parse_json_array('```json\n["a"]\n```') == ["a"]
    assert parse_json_array("[]") == []
    for bad in ("a, b", '{"a": 1}', "[1, 2]", ""):
        with pytest.raises(ParseFailure):
            parse_json_array(bad)


def test_coverage_examples():
    o = OracleBackend(dict(TRUTH))
    n = CREDIT_DOMAIN.sentences({"n4", "p5"})
    assert determine_coverage(o, n, "case n4").relevant is True
    assert determine_coverage(o, n, "case p2n3n4").relevant is False
    flipped = NoisyOracleBackend(dict(TRUTH), flip_prob=1.0)
    assert determine_coverage(flipped, n, "case n4").relevant is False
    assert determine_coverage(flipped, n, "case p2n3n4").relevant is True


def test_coverage_retries_then_succeeds():
    b = Scripted(["I think so", "YES"])
    v = determine_coverage(b, [S["n4"]], "text")
    assert (v.relevant, v.parse_status, v.attempts) == (True, RETRIED, 2)


def test_coverage_parse_failure():
    b = Scripted(["hmm"] * 4)
    v = determine_coverage(b, [S["n4"]], "text", max_retries=3)
    assert v.relevant is None and v.parse_status == FAILED and b.calls == 4


def test_coverage_preconditions():
    with pytest.raises(ValueError):
        determine_coverage(Scripted([]), [], "text")
    with pytest.raises(ValueError):
        determine_coverage(Scripted([]), [S["n4"]], "")


def test_extraction_examples():
    o = OracleBackend(dict(TRUTH))
    assert extract_case_factors(o, CREDIT_DOMAIN.sentences({"n4", "p5"}), "case p2n3n4").factors == {"n4"}
    assert extract_case_factors(o, CREDIT_DOMAIN.sentences({"p1"}), "case p2n3n4").factors == frozenset()


def test_extraction_empty_candidates():
    r = extract_case_factors(Scripted([]), [], "text")
    assert r.factors == frozenset() and r.parse_status == OK and r.attempts == 0


def test_extraction_drops_non_candidates():
    b = Scripted([json.dumps([S["n4"], S["p1"], "likes cats"])])
    r = extract_case_factors(b, [S["n4"], S["p5"]], "text")
    assert r.factors == {"n4"}
    assert r.unknown == (S["p1"], "likes cats")


def test_extraction_normalizes():
    b = Scripted([json.dumps(["  Insufficient Income.", "HIGH NUMBER OF RECENT CREDIT INQUIRIES"])])
    r = extract_case_factors(b, CREDIT_DOMAIN.sentences({"n3", "n1"}), "text")
    assert r.factors == {"n3", "n1"}


def test_extraction_parse_failure():
    r = extract_case_factors(Scripted(["nope"] * 4), [S["n4"]], "text")
    assert r.parse_status == FAILED and not r.ok


def test_extraction_omission_law(pool):
    q, trials = 0.3, 1500
    nb = NoisyOracleBackend(pool.truth_table(), omit_prob=q, seed=9)
    rng = random.Random(1)
    scenarios = list(pool.scenarios.values())
    lost = kept = 0
    for _ in range(trials):
        sc = rng.choice(scenarios)
        cands = CREDIT_DOMAIN.sentences(CREDIT_DOMAIN.ids)
        r = extract_case_factors(nb, cands, sc.description)
        assert r.factors <= sc.subset
        kept += len(r.factors)
        lost += len(sc.subset) - len(r.factors)
    assert abs(lost / (lost + kept) - q) < 0.02


def test_run_worked_example():
    o = OracleBackend(dict(TRUTH))
    r = run_aam_cbr(o, PREVIOUS, {"n4", "p5"}, 0)
    assert r.outcome == 0
    assert [v.relevant for v in r.relevance] == [True, False]
    assert r.factorized == [FactorizedCase(0, frozenset({"n4"}), 0)]


def test_run_zero_cases():
    r = run_aam_cbr(Scripted([]), [], {"n4"}, 1)
    assert r.outcome == 1 and r.relevance == [] and r.factorized == []


def test_run_all_not_relevant():
    b = Scripted(["NO"] * 3)
    r = run_aam_cbr(b, [("a", 1), ("b", 1), ("c", 1)], {"p1"}, 0, concurrency=1)
    assert r.outcome == 0 and r.factorized == []


def test_run_empty_new_case_asks_nothing():
    b = Scripted([])
    r = run_aam_cbr(b, PREVIOUS, set(), 1)
    assert b.calls == 0 and r.outcome == 1


def test_perfect_oracle_equals_aacbr(pool, test_sets, oracle):
    for ts in test_sets[:20]:
        texts = [(pool.scenarios[s].description, o) for s, o in ts.previous]
        for n in ts.new_cases:
            for d in (0, 1):
                r = run_aam_cbr(oracle, texts, n, d)
                assert r.outcome == aacbr_outcome(ts.case_base(), d, n).outcome
                relevant = CaseBase(c for c in ts.case_base() if c.factors <= n)
                got = CaseBase(Case(f.factors, f.outcome) for f in r.factorized)
                assert set(got) == set(relevant)


def test_order_and_concurrency_independence(pool, test_sets):
    nb = NoisyOracleBackend(pool.truth_table(), flip_prob=0.2, omit_prob=0.2, seed=4)
    ts = test_sets[3]
    texts = [(pool.scenarios[s].description, o) for s, o in ts.previous]
    shuffled = list(reversed(texts))
    for n in ts.new_cases:
        a = run_aam_cbr(nb, texts, n, 0, concurrency=1)
        b = run_aam_cbr(nb, texts, n, 0, concurrency=8)
        c = run_aam_cbr(nb, shuffled, n, 0, concurrency=4)
        assert a.to_dict() == b.to_dict()
        assert a.verdict.to_dict() == c.verdict.to_dict()


def test_conflicting_cases_dropped():
    table = {"A": frozenset({"n4"}), "B": frozenset({"n4", "p3"})}

    class Extract(OracleBackend):
        def extract(self, prompt, candidates, text):
            return frozenset({"n4"})

    r = run_aam_cbr(Extract(table), [("A", 0), ("B", 1)], {"n4", "p3"}, 1)
    assert r.dropped_conflicts == [0, 1]
    assert r.factorized == []
    assert r.outcome == 1


def test_extraction_failure_excluded_and_empty_admitted():
    b = Scripted(["YES", "garbage", "garbage", "garbage", "garbage"])
    r = run_aam_cbr(b, [("a", 0)], {"p1"}, 1, concurrency=1)
    assert r.extraction_failures == [0] and r.factorized == [] and r.outcome == 1
    b = Scripted(["YES", "[]"])
    r = run_aam_cbr(b, [("a", 0)], {"p1"}, 1, concurrency=1)
    assert r.empty_extractions == [0]
    assert r.factorized == [FactorizedCase(0, frozenset(), 0)]
    # a contrary empty case is not strictly more specific than the default
    assert r.outcome == 1


def test_factorized_case_has_no_text():
    names = {f.name for f in dataclasses.fields(FactorizedCase)}
    assert names == {"previous_case_index", "factors", "outcome"}
    o = OracleBackend(dict(TRUTH))
    dumped = run_aam_cbr(o, PREVIOUS, {"n4", "p5"}, 0).to_json()
    assert "case n4" not in dumped


def test_total_outage_raises():
    with pytest.raises(BackendFailure):
        run_aam_cbr(Down(), PREVIOUS, {"n4"}, 0)


def test_partial_outage_recorded():
    class Flaky(OracleBackend):
        def complete(self, prompt):
            if "case p2n3n4" in prompt:
                raise TransportError("reset")
            return super().complete(prompt)

    r = run_aam_cbr(Flaky(dict(TRUTH)), PREVIOUS, {"n4", "p5"}, 0)
    assert r.relevance[1].error and r.relevance[1].relevant is None
    assert r.outcome == 0
