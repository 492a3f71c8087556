"""Per-case agents: coverage determination and factor extraction.

Each previous case is held by an agent that only ever sees the new case's
factor sentences. An agent whose case is not covered refuses; a covered case
is re-expressed over the new case's factors and handed on as ids plus its
outcome. Case text never leaves the agent.
"""

from __future__ import annotations

import json
import logging
import re
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from .backends import BackendFailure
from .domain import (
    CREDIT_DOMAIN,
    Case,
    CaseBase,
    FactorDomain,
    check_outcome,
    ids_for_sentences,
    normalize_sentence,
    sentence_index,
)
from .prompts import Prompts, render, sentence_list
from .reasoner import CbrVerdict, aacbr_outcome

logger = logging.getLogger(__name__)

OK = "ok"
RETRIED = "retried"
FAILED = "failed"

DEFAULT_RETRIES = 3
DEFAULT_CONCURRENCY = 8


class ParseFailure(ValueError):
    pass


@dataclass(frozen=True)
class RelevanceVerdict:
    previous_case_index: int
    relevant: Optional[bool]
    raw_response: str
    parse_status: str
    attempts: int = 1
    error: Optional[str] = None


@dataclass(frozen=True)
class ExtractionResult:
    factors: frozenset
    unknown: tuple
    parse_status: str
    raw_response: str
    attempts: int = 1

    @property
    def ok(self) -> bool:
        return self.parse_status != FAILED


@dataclass(frozen=True)
class FactorizedCase:
    previous_case_index: int
    factors: frozenset
    outcome: int


@dataclass
class AamResult:
    verdict: CbrVerdict
    relevance: list
    factorized: list
    dropped_conflicts: list = field(default_factory=list)
    extraction_failures: list = field(default_factory=list)
    empty_extractions: list = field(default_factory=list)

    @property
    def outcome(self) -> int:
        return self.verdict.outcome

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.to_dict(),
            "relevance": [
                {k: v for k, v in asdict(r).items() if k != "raw_response"} for r in self.relevance
            ],
            "factorized": [
                {
                    "previous_case_index": f.previous_case_index,
                    "factors": sorted(f.factors),
                    "outcome": str(f.outcome),
                }
                for f in self.factorized
            ],
            "dropped_conflicts": list(self.dropped_conflicts),
            "extraction_failures": list(self.extraction_failures),
            "empty_extractions": list(self.empty_extractions),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


_ANSWER = re.compile(r"^[\s\"'`*]*(yes|no)[\s\"'`*.!]*$", re.I)


def parse_yes_no(text: str) -> Optional[bool]:
    m = _ANSWER.match(text or "")
    if m is None:
        return None
    return m.group(1).lower() == "yes"


def parse_json_array(text: str) -> list[str]:
    """Pull the first JSON array of strings out of a response (code fences allowed)."""
    start, end = text.find("["), text.rfind("]")
    if start < 0 or end < start:
        raise ParseFailure("no JSON array in response")
    try:
        value = json.loads(text[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ParseFailure(str(exc)) from None
    if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
        raise ParseFailure("expected an array of strings")
    return value


def determine_coverage(
    backend,
    new_factors: Sequence[str],
    case_text: str,
    *,
    index: int = 0,
    max_retries: int = DEFAULT_RETRIES,
    prompts: Optional[Prompts] = None,
) -> RelevanceVerdict:
    """Ask whether the factor sentences ``new_factors`` cover ``case_text``.

    Unparseable answers are retried ``max_retries`` times and then count as
    not relevant with ``parse_status="failed"``.
    """
    if not new_factors:
        raise ValueError("factor list must be non-empty")
    if not case_text:
        raise ValueError("case text must be non-empty")
    prompts = prompts or Prompts.default()
    prompt = render(
        prompts.determine_coverage,
        factor_list=sentence_list(new_factors),
        case_description=case_text,
    )
    raw = ""
    for attempt in range(1, max_retries + 2):
        raw = backend.complete(prompt)
        answer = parse_yes_no(raw)
        if answer is not None:
            return RelevanceVerdict(index, answer, raw, OK if attempt == 1 else RETRIED, attempt)
    return RelevanceVerdict(index, None, raw, FAILED, max_retries + 1)


def extract_case_factors(
    backend,
    candidate_sentences: Sequence[str],
    case_text: str,
    *,
    domain: FactorDomain = CREDIT_DOMAIN,
    max_retries: int = DEFAULT_RETRIES,
    prompts: Optional[Prompts] = None,
) -> ExtractionResult:
    """Ask which of ``candidate_sentences`` the case text implies.

    Returned sentences are mapped back to factor ids; anything that is not one
    of the candidates is dropped and listed in ``unknown``.
    """
    candidates = list(candidate_sentences)
    if not candidates:
        return ExtractionResult(frozenset(), (), OK, "", 0)
    if not case_text:
        raise ValueError("case text must be non-empty")
    prompts = prompts or Prompts.default()
    allowed, bad = ids_for_sentences(domain, candidates)
    if bad:
        raise ValueError(f"candidates not in domain: {bad}")
    prompt = render(
        prompts.extract_factors,
        description=case_text,
        all_factor_sentences=sentence_list(candidates),
    )
    index = sentence_index(domain)
    raw = ""
    for attempt in range(1, max_retries + 2):
        raw = backend.complete(prompt)
        try:
            sentences = parse_json_array(raw)
        except ParseFailure:
            continue
        ids, rejected = set(), []
        for s in sentences:
            fid = index.get(normalize_sentence(s))
            if fid in allowed:
                ids.add(fid)
            else:
                rejected.append(s)
        return ExtractionResult(
            frozenset(ids),
            tuple(rejected),
            OK if attempt == 1 else RETRIED,
            raw,
            attempt,
        )
    return ExtractionResult(frozenset(), (), FAILED, raw, max_retries + 1)


def _concurrency(backend, limit: int) -> int:
    if getattr(backend, "single_flight", False):
        return 1
    return max(1, int(limit))


def run_aam_cbr(
    backend,
    previous_texts: Sequence[tuple[str, int]],
    n: Iterable[str],
    default,
    *,
    domain: FactorDomain = CREDIT_DOMAIN,
    concurrency: int = DEFAULT_CONCURRENCY,
    max_retries: int = DEFAULT_RETRIES,
    prompts: Optional[Prompts] = None,
) -> AamResult:
    """Run one agent per previous case, then reason over the factorized cases.

    Agents run concurrently up to ``concurrency``; results are joined in input
    order. Factorized cases that share a factor set but disagree on outcome are
    all discarded.
    """
    prompts = prompts or Prompts.default()
    default = check_outcome(default)
    n = domain.situation(n)
    new_sentences = domain.sentences(n)
    previous = [(text, check_outcome(o)) for text, o in previous_texts]

    def agent(item):
        index, (text, outcome) = item
        if not new_sentences:
            # nothing to cover with; only factor-free cases would be relevant
            return RelevanceVerdict(index, False, "", OK, 0), None
        try:
            rel = determine_coverage(
                backend, new_sentences, text, index=index, max_retries=max_retries, prompts=prompts
            )
        except BackendFailure as exc:
            return RelevanceVerdict(index, None, "", FAILED, 0, error=str(exc)), None
        if not rel.relevant:
            return rel, None
        try:
            ext = extract_case_factors(
                backend, new_sentences, text, domain=domain, max_retries=max_retries, prompts=prompts
            )
        except BackendFailure as exc:
            logger.warning("extraction failed for case %d: %s", index, exc)
            return rel, ExtractionResult(frozenset(), (), FAILED, "", 0)
        return rel, ext

    with ThreadPoolExecutor(max_workers=_concurrency(backend, concurrency)) as ex:
        outputs = list(ex.map(agent, enumerate(previous)))

    if previous and all(rel.error is not None for rel, _ in outputs):
        raise BackendFailure(f"backend unavailable: {outputs[0][0].error}")

    relevance = [rel for rel, _ in outputs]
    extraction_failures, empty = [], []
    candidates = []
    for (rel, ext), (_, outcome) in zip(outputs, previous):
        if ext is None:
            continue
        if not ext.ok:
            extraction_failures.append(rel.previous_case_index)
            continue
        if not ext.factors:
            empty.append(rel.previous_case_index)
        candidates.append(FactorizedCase(rel.previous_case_index, ext.factors, outcome))

    outcomes_by_set = defaultdict(set)
    for fc in candidates:
        outcomes_by_set[fc.factors].add(fc.outcome)
    factorized = [fc for fc in candidates if len(outcomes_by_set[fc.factors]) == 1]
    dropped = [fc.previous_case_index for fc in candidates if len(outcomes_by_set[fc.factors]) > 1]

    case_base = CaseBase(Case(fc.factors, fc.outcome) for fc in factorized)
    verdict = aacbr_outcome(case_base, default, n)
    return AamResult(verdict, relevance, factorized, dropped, extraction_failures, empty)
