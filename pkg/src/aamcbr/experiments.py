"""Experiment harness: coverage, extraction and outcome prediction runs.

Gold labels come from the test sets' ground-truth subsets. Every run fans out
over independent work items under one backend concurrency limit and reduces
the results in input order, so oracle and noisy runs are reproducible.
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .agents import (
    DEFAULT_CONCURRENCY,
    DEFAULT_RETRIES,
    FAILED,
    determine_coverage,
    extract_case_factors,
    run_aam_cbr,
)
from .backends import BackendFailure, ThrottledBackend
from .datagen import ScenarioPool, TestSet
from .domain import CREDIT_DOMAIN, FactorDomain
from .prompts import Prompts, factorized_case_text, previous_case_list, render, sentence_list
from .reasoner import aacbr_outcome

logger = logging.getLogger(__name__)

AAM_CBR = "aam-cbr"
SINGLE_NOT_INSTRUCTED = "single-not-instructed"
SINGLE_INSTRUCTED = "single-instructed"
STRATEGIES = (SINGLE_NOT_INSTRUCTED, SINGLE_INSTRUCTED, AAM_CBR)
STRATEGY_NAMES = {
    SINGLE_NOT_INSTRUCTED: "SinglePrompt-NotInstructed",
    SINGLE_INSTRUCTED: "SinglePrompt-Instructed",
    AAM_CBR: "AAM-CBR",
}
MIXED = "mixed"


def relevance_probability(n: int, domain_size: int) -> float:
    """Chance that a uniformly drawn situation is covered by a new case of size ``n``."""
    if not 0 <= n <= domain_size:
        raise ValueError(f"need 0 <= n <= domain size, got n={n}, size={domain_size}")
    return 2.0 ** (n - domain_size)


def empirical_relevance_rate(n: int, domain_size: int, samples: int, seed=0) -> float:
    """Monte Carlo estimate of :func:`relevance_probability`.

    Each sample draws a new case uniformly among the size-``n`` subsets and a
    previous situation uniformly among all subsets.
    """
    rng = random.Random(f"relevance:{seed}:{n}:{domain_size}")
    universe = range(domain_size)
    hits = 0
    for _ in range(samples):
        new = set(rng.sample(universe, n))
        prev = {i for i in universe if rng.random() < 0.5}
        hits += prev <= new
    return hits / samples


@dataclass(frozen=True)
class CoverageRecord:
    test_set: int
    new_case_index: int
    previous_index: int
    n: int
    ground_truth_relevant: bool
    predicted_relevant: bool
    parse_status: str


@dataclass(frozen=True)
class ExtractionRecord:
    test_set: int
    new_case_index: int
    previous_index: int
    n: int
    predicted: frozenset
    ground_truth: frozenset
    actually_relevant: bool
    parse_status: str

    @property
    def exact_match(self) -> bool:
        return self.predicted == self.ground_truth


@dataclass(frozen=True)
class PredictionRecord:
    test_set: int
    new_case_index: int
    n: int
    default: int
    strategy: str
    predicted: str
    gold: int
    error: str = ""

    @property
    def correct(self) -> bool:
        return self.predicted == str(self.gold)


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


@dataclass
class MetricsTable:
    """Per-cell counts and ratios; ``None`` marks an empty denominator."""

    coverage: dict = field(default_factory=dict)
    extraction: dict = field(default_factory=dict)
    prediction: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"coverage": self.coverage, "extraction": self.extraction, "prediction": self.prediction}

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsTable":
        return cls(
            coverage=data.get("coverage", {}),
            extraction=data.get("extraction", {}),
            prediction=data.get("prediction", {}),
        )

    def accuracy(self, strategy: str, n: int, default: int) -> Optional[float]:
        return self.prediction[strategy][str(n)][str(default)]["accuracy"]

    def merge(self, other: "MetricsTable") -> "MetricsTable":
        return MetricsTable(
            coverage=other.coverage or self.coverage,
            extraction=other.extraction or self.extraction,
            prediction=other.prediction or self.prediction,
        )


def coverage_metrics(records: Iterable[CoverageRecord]) -> dict:
    by_n = defaultdict(list)
    for r in records:
        by_n[r.n].append(r)
    out = {}
    for n in sorted(by_n):
        rs = by_n[n]
        correct = sum(r.predicted_relevant == r.ground_truth_relevant for r in rs)
        retrieved = [r for r in rs if r.predicted_relevant]
        tp = sum(r.ground_truth_relevant for r in retrieved)
        out[str(n)] = {
            "total": len(rs),
            "correct": correct,
            "accuracy": _ratio(correct, len(rs)),
            "retrieved": len(retrieved),
            "true_positive": tp,
            "precision": _ratio(tp, len(retrieved)),
            "actually_relevant": sum(r.ground_truth_relevant for r in rs),
            "parse_failures": sum(r.parse_status == FAILED for r in rs),
        }
    return out


def extraction_metrics(records: Iterable[ExtractionRecord]) -> dict:
    by_n = defaultdict(list)
    for r in records:
        by_n[r.n].append(r)
    out = {}
    for n in sorted(by_n):
        rs = by_n[n]
        matched = sum(r.exact_match for r in rs)
        rel = [r for r in rs if r.actually_relevant]
        matched_rel = sum(r.exact_match for r in rel)
        out[str(n)] = {
            "total": len(rs),
            "matched": matched,
            "accuracy": _ratio(matched, len(rs)),
            "total_relevant": len(rel),
            "matched_relevant": matched_rel,
            "accuracy_given_relevant": _ratio(matched_rel, len(rel)),
            "parse_failures": sum(r.parse_status == FAILED for r in rs),
        }
    return out


def prediction_metrics(records: Iterable[PredictionRecord]) -> dict:
    cells = defaultdict(list)
    for r in records:
        cells[(r.strategy, r.n, r.default)].append(r)
    out: dict = {}
    for strategy, n, default in sorted(cells, key=lambda k: (STRATEGIES.index(k[0]) if k[0] in STRATEGIES else 99, k[0], k[1], k[2])):
        rs = cells[(strategy, n, default)]
        correct = sum(r.correct for r in rs)
        out.setdefault(strategy, {}).setdefault(str(n), {})[str(default)] = {
            "total": len(rs),
            "correct": correct,
            "accuracy": _ratio(correct, len(rs)),
            "mixed": sum(r.predicted == MIXED for r in rs),
            "errors": sum(bool(r.error) for r in rs),
        }
    return out


def _descriptions(pool: ScenarioPool, ts: TestSet) -> list[str]:
    try:
        return [pool.scenarios[s].description for s, _ in ts.previous]
    except KeyError as exc:
        raise KeyError(f"test set {ts.id} references a subset missing from the pool") from exc


def _pmap(fn, items, concurrency: int) -> list:
    if concurrency <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=concurrency) as ex:
        return list(ex.map(fn, items))


def run_coverage_experiment(
    backend,
    test_sets: Sequence[TestSet],
    pool: ScenarioPool,
    *,
    concurrency: int = DEFAULT_CONCURRENCY,
    max_retries: int = DEFAULT_RETRIES,
    prompts: Optional[Prompts] = None,
) -> tuple[list[CoverageRecord], dict]:
    """Ask about every (previous case, new case) pair of every test set."""
    prompts = prompts or Prompts.default()
    domain = pool.domain
    backend = ThrottledBackend(backend, concurrency)
    items = []
    for ts in test_sets:
        texts = _descriptions(pool, ts)
        for j, n in enumerate(ts.new_cases):
            for i, (subset, _) in enumerate(ts.previous):
                items.append((ts.id, j, i, n, subset, texts[i]))

    def one(item):
        ts_id, j, i, n, subset, text = item
        try:
            v = determine_coverage(
                backend, domain.sentences(n), text, index=i, max_retries=max_retries, prompts=prompts
            )
            predicted, status = bool(v.relevant), v.parse_status
        except BackendFailure as exc:
            logger.warning("coverage call failed: %s", exc)
            predicted, status = False, FAILED
        return CoverageRecord(ts_id, j, i, len(n), subset <= n, predicted, status)

    records = _pmap(one, items, concurrency)
    return records, coverage_metrics(records)


def run_extraction_experiment(
    backend,
    coverage_records: Sequence[CoverageRecord],
    test_sets: Sequence[TestSet],
    pool: ScenarioPool,
    *,
    concurrency: int = DEFAULT_CONCURRENCY,
    max_retries: int = DEFAULT_RETRIES,
    prompts: Optional[Prompts] = None,
) -> tuple[list[ExtractionRecord], dict]:
    """Extract factors for every pair the coverage run marked relevant."""
    prompts = prompts or Prompts.default()
    domain = pool.domain
    backend = ThrottledBackend(backend, concurrency)
    by_id = {ts.id: ts for ts in test_sets}
    items = [r for r in coverage_records if r.predicted_relevant]

    def one(r: CoverageRecord):
        ts = by_id[r.test_set]
        subset, _ = ts.previous[r.previous_index]
        n = ts.new_cases[r.new_case_index]
        text = pool.scenarios[subset].description
        try:
            ext = extract_case_factors(
                backend, domain.sentences(n), text, domain=domain, max_retries=max_retries, prompts=prompts
            )
            predicted, status = ext.factors, ext.parse_status
        except BackendFailure as exc:
            logger.warning("extraction call failed: %s", exc)
            predicted, status = frozenset(), FAILED
        return ExtractionRecord(
            r.test_set, r.new_case_index, r.previous_index, r.n, predicted, subset & n, subset <= n, status
        )

    records = _pmap(one, items, concurrency)
    return records, extraction_metrics(records)


def single_prompt(
    backend,
    previous: Sequence[tuple[str, int]],
    new_sentences: Sequence[str],
    default: int,
    *,
    instructed: bool,
    prompts: Prompts,
) -> str:
    """Baseline: one prompt with every case, then a second call to conclude the label."""
    template = prompts.predict_outcome_instructed if instructed else prompts.predict_outcome
    first = backend.complete(
        render(
            template,
            previous_case_list=previous_case_list(previous),
            new_case_list=sentence_list(new_sentences),
            default_outcome=default,
            opponent_outcome=1 - default,
        )
    )
    second = backend.complete(
        render(prompts.conclude_outcome, first_response=first, outcome0="0", outcome1="1")
    )
    return parse_conclusion(second)


def parse_conclusion(text: str) -> str:
    label = text.strip().strip("\"'`*. \n").lower()
    return label if label in ("0", "1") else MIXED


def run_prediction_experiment(
    backend,
    test_sets: Sequence[TestSet],
    pool: ScenarioPool,
    *,
    defaults: Sequence[int] = (0, 1),
    strategies: Sequence[str] = STRATEGIES,
    factorized_single_prompt: bool = False,
    concurrency: int = DEFAULT_CONCURRENCY,
    max_retries: int = DEFAULT_RETRIES,
    prompts: Optional[Prompts] = None,
) -> tuple[list[PredictionRecord], dict]:
    """Predict every new case under every default with every strategy.

    ``factorized_single_prompt`` feeds the baselines factor sentences for the
    previous cases instead of their descriptions.
    """
    prompts = prompts or Prompts.default()
    domain = pool.domain
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)}")
    backend = ThrottledBackend(backend, concurrency)
    items = []
    for ts in test_sets:
        texts = _descriptions(pool, ts)
        gold_base = ts.case_base()
        aam_inputs = [(t, o) for t, (_, o) in zip(texts, ts.previous)]
        if factorized_single_prompt:
            single_inputs = [(factorized_case_text(domain.sentences(s)), o) for s, o in ts.previous]
        else:
            single_inputs = aam_inputs
        for j, n in enumerate(ts.new_cases):
            for d in defaults:
                gold = aacbr_outcome(gold_base, d, n).outcome
                for strategy in strategies:
                    items.append((ts.id, j, n, d, strategy, gold, aam_inputs, single_inputs))

    def one(item):
        ts_id, j, n, d, strategy, gold, aam_inputs, single_inputs = item
        try:
            if strategy == AAM_CBR:
                res = run_aam_cbr(
                    backend, aam_inputs, n, d, domain=domain, concurrency=1,
                    max_retries=max_retries, prompts=prompts,
                )
                predicted = str(res.outcome)
            else:
                predicted = single_prompt(
                    backend, single_inputs, domain.sentences(n), d,
                    instructed=strategy == SINGLE_INSTRUCTED, prompts=prompts,
                )
            error = ""
        except BackendFailure as exc:
            predicted, error = MIXED, str(exc)
        return PredictionRecord(ts_id, j, len(n), d, strategy, predicted, gold, error)

    records = _pmap(one, items, concurrency)
    return records, prediction_metrics(records)
