import math

import pytest

from aamcbr.backends import NoisyOracleBackend, OracleBackend
from aamcbr.experiments import (
    AAM_CBR,
    MIXED,
    SINGLE_INSTRUCTED,
    SINGLE_NOT_INSTRUCTED,
    STRATEGIES,
    CoverageRecord,
    ExtractionRecord,
    MetricsTable,
    PredictionRecord,
    coverage_metrics,
    empirical_relevance_rate,
    extraction_metrics,
    parse_conclusion,
    prediction_metrics,
    relevance_probability,
    run_coverage_experiment,
    run_extraction_experiment,
    run_prediction_experiment,
)
from aamcbr.reasoner import aacbr_outcome


def test_relevance_probability_values():
    assert relevance_probability(8, 10) == 0.25
    assert relevance_probability(6, 10) == 0.0625
    assert relevance_probability(10, 10) == 1.0
    assert relevance_probability(0, 3) == 0.125
    with pytest.raises(ValueError):
        relevance_probability(11, 10)


def test_relevance_probability_brute_force():
    # count (N, X) pairs exhaustively for a small domain
    size = 5
    for n in range(size + 1):
        news = [m for m in range(1 << size) if bin(m).count("1") == n]
        hits = sum(x & ~m == 0 for m in news for x in range(1 << size))
        assert math.isclose(hits / (len(news) << size), relevance_probability(n, size))


def test_empirical_relevance_small():
    assert abs(empirical_relevance_rate(8, 10, 4000, seed=1) - 0.25) < 0.03


def test_perfect_oracle_module_accuracy(pool, test_sets, oracle):
    cov, cm = run_coverage_experiment(oracle, test_sets[:10], pool, concurrency=4)
    assert len(cov) == 10 * 5 * 10
    assert all(cm[n]["accuracy"] == 1.0 and cm[n]["precision"] == 1.0 for n in cm if cm[n]["retrieved"])
    ext, em = run_extraction_experiment(oracle, cov, test_sets[:10], pool, concurrency=4)
    assert len(ext) == sum(r.predicted_relevant for r in cov)
    assert all(r.exact_match for r in ext)
    assert all(v["accuracy_given_relevant"] in (1.0, None) for v in em.values())


def test_flip_noise_accuracy(pool, test_sets):
    p = 0.2
    nb = NoisyOracleBackend(pool.truth_table(), flip_prob=p, seed=2)
    cov, _ = run_coverage_experiment(nb, test_sets, pool, concurrency=8)
    acc = sum(r.predicted_relevant == r.ground_truth_relevant for r in cov) / len(cov)
    # 2500 Bernoulli trials: 4 sigma is about 0.032
    assert abs(acc - (1 - p)) < 0.032


def test_no_retrieved_cases_no_extraction(pool, test_sets):
    never = NoisyOracleBackend(pool.truth_table(), flip_prob=0.0)

    class No(type(never)):
        def covers(self, prompt, factors, text):
            return False

    cov, cm = run_coverage_experiment(No(pool.truth_table()), test_sets[:2], pool, concurrency=1)
    assert all(v["precision"] is None for v in cm.values())
    ext, em = run_extraction_experiment(never, cov, test_sets[:2], pool)
    assert ext == [] and em == {}


def test_perfect_oracle_prediction(pool, test_sets, oracle):
    recs, metrics = run_prediction_experiment(oracle, test_sets[:6], pool, concurrency=4)
    assert len(recs) == 6 * 5 * 2 * 3
    assert all(r.correct for r in recs)
    for s in STRATEGIES:
        for n in range(6, 11):
            for d in (0, 1):
                assert MetricsTable(prediction=metrics).accuracy(s, n, d) == 1.0


def test_factorized_single_prompt(pool, test_sets, oracle):
    recs, _ = run_prediction_experiment(
        oracle, test_sets[:3], pool, strategies=[SINGLE_INSTRUCTED], factorized_single_prompt=True
    )
    assert all(r.correct for r in recs)


def test_gold_is_aacbr_on_ground_truth(pool, test_sets, oracle):
    recs, _ = run_prediction_experiment(oracle, test_sets[:4], pool, strategies=[AAM_CBR], defaults=(1,))
    by_id = {ts.id: ts for ts in test_sets}
    for r in recs:
        ts = by_id[r.test_set]
        assert r.gold == aacbr_outcome(ts.case_base(), 1, ts.new_cases[r.new_case_index]).outcome


def test_unknown_strategy(pool, test_sets, oracle):
    with pytest.raises(ValueError):
        run_prediction_experiment(oracle, test_sets[:1], pool, strategies=["vote"])


@pytest.mark.parametrize("text,label", [("0", "0"), (" '1'. ", "1"), ("mixed", MIXED), ("0 or 1", MIXED)])
def test_parse_conclusion(text, label):
    assert parse_conclusion(text) == label


def test_mixed_counts_as_wrong():
    r = PredictionRecord(0, 0, 6, 0, SINGLE_NOT_INSTRUCTED, MIXED, 0, "")
    assert not r.correct
    m = prediction_metrics([r, PredictionRecord(0, 1, 6, 0, SINGLE_NOT_INSTRUCTED, "0", 0, "")])
    assert m[SINGLE_NOT_INSTRUCTED]["6"]["0"] == {"total": 2, "correct": 1, "accuracy": 0.5, "mixed": 1, "errors": 0}


def test_metric_denominators():
    cov = [CoverageRecord(0, 0, 0, 6, False, False, "ok"), CoverageRecord(0, 0, 1, 6, True, False, "ok")]
    m = coverage_metrics(cov)["6"]
    assert m["accuracy"] == 0.5 and m["precision"] is None
    ext = [ExtractionRecord(0, 0, 0, 7, frozenset({"p1"}), frozenset({"p1"}), False, "ok")]
    e = extraction_metrics(ext)["7"]
    assert e["accuracy"] == 1.0 and e["accuracy_given_relevant"] is None


def test_metrics_merge():
    a = MetricsTable(coverage={"6": {}}, prediction={"x": 1})
    b = MetricsTable(prediction={"y": 2})
    assert a.merge(b) == MetricsTable(coverage={"6": {}}, prediction={"y": 2})
    assert MetricsTable.from_dict(a.to_dict()) == a
