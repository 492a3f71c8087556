"""Text-completion backends.

Every backend exposes ``identity`` (a name used for caching and reports) and
``complete(prompt) -> str``. The oracle backends recognise rendered prompts by
matching them against the templates, so they are drop-in replacements for a
language model.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import tempfile
import threading
import time
from pathlib import Path
from typing import Callable, Mapping, MutableMapping, Optional, Protocol, runtime_checkable

import httpx

from .domain import CREDIT_DOMAIN, Case, CaseBase, FactorDomain, ids_for_sentences
from .prompts import (
    FACTORS_PREFIX,
    Prompts,
    match,
    parse_previous_case_list,
    parse_sentence_list,
    sentence_list,
)

logger = logging.getLogger(__name__)


class BackendFailure(RuntimeError):
    pass


class TransportError(BackendFailure):
    pass


class RateLimited(BackendFailure):
    pass


class AuthFailure(BackendFailure):
    pass


class UnknownScenario(KeyError):
    pass


class UnrecognizedPromptShape(ValueError):
    pass


@runtime_checkable
class Backend(Protocol):
    identity: str

    def complete(self, prompt: str) -> str: ...


def _first_response_outcome(text: str) -> str:
    """Read the predicted outcome label off a free-text answer, or ``mixed``."""
    labels = set(re.findall(r"predicted outcome[^'\n]*'([01])'", text, re.I))
    if len(labels) == 1:
        return labels.pop()
    return "mixed"


class _SharedHandle:
    # backends hold locks, clients and caches; estimator cloning shares them
    def __deepcopy__(self, memo):
        return self


class OracleBackend(_SharedHandle):
    """Answers with ground truth looked up from ``truth_table`` (text -> factor ids).

    Handles the coverage and extraction prompts, plus scenario generation
    (answered with a template-composed description), outcome prediction
    (answered with the AA-CBR outcome) and outcome conclusion.
    """

    identity = "oracle"

    def __init__(
        self,
        truth_table: Optional[MutableMapping[str, frozenset]] = None,
        domain: FactorDomain = CREDIT_DOMAIN,
        prompts: Optional[Prompts] = None,
        composer_seed=0,
    ):
        self.truth_table = truth_table if truth_table is not None else {}
        self.domain = domain
        self.prompts = prompts or Prompts.default()
        self.composer_seed = composer_seed
        self._lock = threading.Lock()

    def truth(self, text: str) -> frozenset:
        try:
            return self.truth_table[text.strip()]
        except KeyError:
            raise UnknownScenario(text[:80]) from None

    def _ids(self, sentences) -> frozenset:
        ids, unknown = ids_for_sentences(self.domain, sentences)
        if unknown:
            raise UnrecognizedPromptShape(f"sentences outside the factor domain: {unknown}")
        return ids

    # answers; the noisy subclass perturbs these

    def covers(self, prompt: str, factors: frozenset, text: str) -> bool:
        return self.truth(text) <= factors

    def extract(self, prompt: str, candidates: frozenset, text: str) -> frozenset:
        return self.truth(text) & candidates

    def predict(self, prompt: str, case_base: CaseBase, new: frozenset, default: int) -> int:
        from .reasoner import aacbr_outcome

        return aacbr_outcome(case_base, default, new).outcome

    def complete(self, prompt: str) -> str:
        p = self.prompts
        if (m := match(p.conclude_outcome, prompt)) is not None:
            label = _first_response_outcome(m["first_response"])
            return {"0": m["outcome0"], "1": m["outcome1"]}.get(label, "mixed")
        for template in (p.predict_outcome_instructed, p.predict_outcome):
            if (m := match(template, prompt)) is not None:
                return self._answer_predict(prompt, m)
        if (m := match(p.determine_coverage, prompt)) is not None:
            factors = self._ids(parse_sentence_list(m["factor_list"]))
            return "YES" if self.covers(prompt, factors, m["case_description"]) else "NO"
        if (m := match(p.extract_factors, prompt)) is not None:
            candidates = self._ids(parse_sentence_list(m["all_factor_sentences"]))
            found = self.extract(prompt, candidates, m["description"])
            return sentence_list(self.domain.sentences(found))
        if (m := match(p.generate_scenario, prompt)) is not None:
            from .datagen import compose_template_scenario

            included = self._ids(parse_sentence_list(m["included_factor_list"]))
            with self._lock:
                sc = compose_template_scenario(
                    included, self.composer_seed, self.domain, self.truth_table
                )
            return sc.description
        raise UnrecognizedPromptShape(prompt[:80])

    def _answer_predict(self, prompt: str, m: Mapping[str, str]) -> str:
        cases = []
        for text, label in parse_previous_case_list(m["previous_case_list"]):
            if text.startswith(FACTORS_PREFIX):
                factors = self._ids(parse_sentence_list(text[len(FACTORS_PREFIX):]))
            else:
                factors = self.truth(text)
            cases.append(Case(factors, label))
        new = self._ids(parse_sentence_list(m["new_case_list"]))
        outcome = self.predict(prompt, CaseBase(cases), new, int(m["default_outcome"]))
        return f"Weighing the previous cases against the new case, the predicted outcome for the new case is '{outcome}'."


class NoisyOracleBackend(OracleBackend):
    """An oracle that makes seeded mistakes.

    Coverage and prediction answers are inverted with ``flip_prob``; in
    extraction each true factor is omitted with ``omit_prob`` and each other
    candidate is added with ``add_prob``. The noise for a call depends only on
    ``seed`` and the prompt text, so results do not depend on call order.
    """

    def __init__(
        self,
        truth_table=None,
        domain: FactorDomain = CREDIT_DOMAIN,
        prompts: Optional[Prompts] = None,
        flip_prob: float = 0.0,
        omit_prob: float = 0.0,
        add_prob: float = 0.0,
        seed=0,
        composer_seed=0,
    ):
        super().__init__(truth_table, domain, prompts, composer_seed)
        for name, v in (("flip_prob", flip_prob), ("omit_prob", omit_prob), ("add_prob", add_prob)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        self.flip_prob = flip_prob
        self.omit_prob = omit_prob
        self.add_prob = add_prob
        self.seed = seed
        self.identity = f"noisy(flip={flip_prob},omit={omit_prob},add={add_prob},seed={seed})"

    def _rng(self, prompt: str) -> random.Random:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        return random.Random(f"{self.seed}:{digest}")

    def covers(self, prompt, factors, text):
        answer = super().covers(prompt, factors, text)
        return (not answer) if self._rng(prompt).random() < self.flip_prob else answer

    def extract(self, prompt, candidates, text):
        truth = self.truth(text)
        rng = self._rng(prompt)
        out = set()
        for fid in self.domain.ordered(candidates):
            u = rng.random()
            if fid in truth:
                if u >= self.omit_prob:
                    out.add(fid)
            elif u < self.add_prob:
                out.add(fid)
        return frozenset(out)

    def predict(self, prompt, case_base, new, default):
        outcome = super().predict(prompt, case_base, new, default)
        return 1 - outcome if self._rng(prompt).random() < self.flip_prob else outcome


class HttpBackend(_SharedHandle):
    """Chat-completions client for OpenAI-compatible endpoints.

    The API key is read from the environment variable ``api_key_env`` on each
    request and is never logged. 429 and 5xx responses and transport errors
    are retried with exponential backoff and jitter; 401/403 are not.
    """

    single_flight = False

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 60.0,
        max_retries: int = 5,
        backoff: float = 1.0,
        max_backoff: float = 60.0,
        temperature: Optional[float] = 0.0,
        max_tokens: Optional[int] = None,
        request_log=None,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.request_log = Path(request_log) if request_log else None
        self.identity = f"http:{model}"
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._log_lock = threading.Lock()
        self.last_metadata: dict = {}

    def __repr__(self) -> str:
        return f"HttpBackend(endpoint={self.endpoint!r}, model={self.model!r}, api_key_env={self.api_key_env!r})"

    def close(self) -> None:
        self._client.close()

    def _key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthFailure(f"environment variable {self.api_key_env} is not set")
        return key

    def _payload(self, prompt: str) -> dict:
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        if self.temperature is not None:
            body["temperature"] = self.temperature
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        return body

    def _delay(self, attempt: int, retry_after: Optional[str]) -> float:
        if retry_after:
            try:
                return min(float(retry_after), self.max_backoff)
            except ValueError:
                pass
        base = min(self.backoff * 2**attempt, self.max_backoff)
        return base * (0.5 + self._rng.random() / 2)

    def complete(self, prompt: str) -> str:
        headers = {"Authorization": f"Bearer {self._key()}"}
        payload = self._payload(prompt)
        start = time.monotonic()
        last_error: BackendFailure = TransportError("no attempt made")
        for attempt in range(self.max_retries + 1):
            retry_after = None
            try:
                resp = self._client.post(self.endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                last_error = TransportError(f"{type(exc).__name__}: {exc}")
            else:
                if resp.status_code in (401, 403):
                    self._log(prompt, resp.status_code, attempt + 1, start, None)
                    raise AuthFailure(f"HTTP {resp.status_code} from {self.endpoint}")
                if resp.status_code == 429:
                    last_error = RateLimited(f"HTTP 429 from {self.endpoint}")
                    retry_after = resp.headers.get("retry-after")
                elif resp.status_code >= 500:
                    last_error = TransportError(f"HTTP {resp.status_code} from {self.endpoint}")
                elif resp.status_code >= 400:
                    self._log(prompt, resp.status_code, attempt + 1, start, None)
                    raise BackendFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
                else:
                    data = resp.json()
                    try:
                        text = data["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError):
                        raise BackendFailure("malformed completion response") from None
                    self._log(prompt, resp.status_code, attempt + 1, start, data.get("usage"))
                    return text or ""
            if attempt < self.max_retries:
                self._sleep(self._delay(attempt, retry_after))
        self._log(prompt, None, self.max_retries + 1, start, None)
        raise last_error

    def _log(self, prompt: str, status, attempts: int, start: float, usage) -> None:
        meta = {
            "backend": self.identity,
            "status": status,
            "attempts": attempts,
            "latency_s": round(time.monotonic() - start, 4),
            "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
        }
        if usage:
            meta["prompt_tokens"] = usage.get("prompt_tokens")
            meta["completion_tokens"] = usage.get("completion_tokens")
        self.last_metadata = meta
        if self.request_log is not None:
            with self._log_lock:
                self.request_log.parent.mkdir(parents=True, exist_ok=True)
                with self.request_log.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(meta) + "\n")


def _safe_name(identity: str) -> str:
    return re.sub(r"[^A-Za-z0-9._=-]+", "_", identity)


class CachingBackend(_SharedHandle):
    """Content-addressed response cache in front of another backend.

    Responses live at ``<directory>/<backend-id>/<sha256>.txt`` where the digest
    covers both the inner backend's identity and the prompt.
    """

    def __init__(self, inner, directory):
        self.inner = inner
        self.directory = Path(directory)
        self.identity = inner.identity
        self.single_flight = getattr(inner, "single_flight", False)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def path_for(self, prompt: str) -> Path:
        digest = hashlib.sha256(f"{self.identity}\0{prompt}".encode("utf-8")).hexdigest()
        return self.directory / _safe_name(self.identity) / f"{digest}.txt"

    def complete(self, prompt: str) -> str:
        path = self.path_for(prompt)
        if path.exists():
            with self._lock:
                self.hits += 1
            return path.read_bytes().decode("utf-8")
        text = self.inner.complete(prompt)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode("utf-8"))
        os.replace(tmp, path)
        with self._lock:
            self.misses += 1
        return text


class ThrottledBackend(_SharedHandle):
    """Caps the number of in-flight calls to ``inner``."""

    def __init__(self, inner, limit: int):
        self.inner = inner
        self.identity = inner.identity
        limit = 1 if getattr(inner, "single_flight", False) else max(1, int(limit))
        self._sem = threading.BoundedSemaphore(limit)

    def complete(self, prompt: str) -> str:
        with self._sem:
            return self.inner.complete(prompt)
