"""Synthetic scenarios and test sets for the credit-card domain.

Two ways to get a scenario for a factor subset:

* :func:`compose_template_scenario` stitches paraphrases from a phrase bank.
  It is deterministic and needs no language model, so the whole experiment
  pipeline can run offline.
* :func:`generate_scenario` asks a backend to write one and keeps it only if
  extracting factors back out of the text returns exactly the subset.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, MutableMapping, Optional, Sequence

from .agents import extract_case_factors
from .domain import CREDIT_DOMAIN, Case, CaseBase, FactorDomain, check_outcome
from .prompts import Prompts, render, sentence_list

logger = logging.getLogger(__name__)

LLM_GENERATED = "llm-generated"
TEMPLATE_COMPOSED = "template-composed"
DEFAULT_MAX_ATTEMPTS = 10
NEW_CASE_SIZES = (6, 7, 8, 9, 10)
N_PREVIOUS = 10


class InsufficientPool(ValueError):
    pass


# Three or more paraphrases per credit factor. None of them hints at another factor.
PHRASES: dict[str, tuple[str, ...]] = {
    "p1": (
        "{name}'s monthly obligations are small next to what {pronoun} earns.",
        "Only a modest share of {name}'s pay goes toward servicing debts.",
        "{name} owes very little relative to {possessive} salary.",
        "Debt repayments take up a small slice of {name}'s monthly earnings.",
    ),
    "p2": (
        "{name} has held the same full-time job for over a decade.",
        "{name} has worked steadily for one employer for many years.",
        "{name}'s career shows years of continuous work with the same company.",
    ),
    "p3": (
        "{name} has paid every installment on {possessive} car loan on schedule.",
        "Each payment on {name}'s current mortgage has been made in full and on the due date.",
        "{name}'s existing personal loan has been serviced on time, month after month.",
    ),
    "p4": (
        "{name} lists a paid-off house and a sizeable investment portfolio on the form.",
        "The application records substantial savings and property owned by {name}.",
        "{name} reports considerable holdings, including real estate and shares.",
    ),
    "p5": (
        "{name} has banked with this institution for years and is well regarded by its staff.",
        "The bank already knows {name} as a long-standing, valued customer.",
        "{name} keeps {possessive} accounts at this bank and has a good rapport with the branch.",
    ),
    "n1": (
        "In the past few weeks, several lenders have pulled {name}'s credit file.",
        "{name} has applied for a number of other cards and loans in recent months.",
        "{name}'s report shows a cluster of fresh lender checks from the last quarter.",
    ),
    "n2": (
        "{name}'s record includes a few instances of overdue bills.",
        "Some of {name}'s past bills were settled well after their due dates.",
        "{name} has let several payments slip past their deadlines before.",
    ),
    "n3": (
        "{name}'s earnings barely cover {possessive} basic living costs.",
        "What {name} takes home each month is too little to comfortably support a new credit line.",
        "{name} works reduced hours and brings in a small paycheck.",
    ),
    "n4": (
        "{name} has only recently opened {possessive} first credit account.",
        "There is very little borrowing on record for {name} so far.",
        "{name}'s credit file is thin, with hardly any past accounts to judge from.",
    ),
    "n5": (
        "{name} turned nineteen just a few months ago.",
        "{name} is a college student who only recently became an adult.",
        "{name} is barely out of {possessive} teens.",
    ),
}

OPENERS = (
    "{name} submits an application for a new credit card.",
    "{name} is applying for a rewards credit card.",
    "{name} fills out a credit card application.",
    "{name} requests a standard credit card.",
)

FILLERS = (
    "The application was filed online.",
    "{name} would mainly use the card for everyday purchases.",
    "{name} asked for the card to be mailed to {possessive} home address.",
    "The form was completed in a single sitting.",
)

NAMES = (
    ("Sarah", "she", "her"),
    ("Daniel", "he", "his"),
    ("Priya", "she", "her"),
    ("Marcus", "he", "his"),
    ("Yuki", "she", "her"),
    ("Omar", "he", "his"),
    ("Elena", "she", "her"),
)


@dataclass(frozen=True)
class Scenario:
    subset: frozenset
    description: str
    source: str
    attempts: int = 1


@dataclass(frozen=True)
class Skipped:
    subset: frozenset
    attempts: int


def subset_key(domain: FactorDomain, subset: Iterable[str]) -> tuple:
    """Sort key placing subsets in bitmask order over the domain."""
    ids = domain.ids
    s = frozenset(subset)
    return (sum(1 << i for i, f in enumerate(ids) if f in s),)


def nonempty_subsets(domain: FactorDomain) -> list[frozenset]:
    ids = domain.ids
    out = []
    for mask in range(1, 1 << len(ids)):
        out.append(frozenset(f for i, f in enumerate(ids) if mask >> i & 1))
    return out


def compose_template_scenario(
    subset: Iterable[str],
    seed=0,
    domain: FactorDomain = CREDIT_DOMAIN,
    truth_table: Optional[MutableMapping[str, frozenset]] = None,
) -> Scenario:
    """Write a scenario mentioning a paraphrase of exactly the factors in ``subset``.

    If ``truth_table`` is given the description is registered there.
    """
    subset = domain.situation(subset)
    if not subset:
        raise ValueError("scenario subsets must be non-empty")
    missing = [f for f in subset if f not in PHRASES]
    if missing:
        raise ValueError(f"no phrase bank for factors {sorted(missing)}")
    rng = random.Random(f"compose:{seed}:{','.join(domain.ordered(subset))}")
    name, pronoun, possessive = rng.choice(NAMES)
    fill = {"name": name, "pronoun": pronoun, "possessive": possessive}
    ordered = domain.ordered(subset)
    rng.shuffle(ordered)
    sentences = [rng.choice(OPENERS)]
    sentences += [rng.choice(PHRASES[f]) for f in ordered]
    sentences.append(rng.choice(FILLERS))
    text = " ".join(s.format(**fill) for s in sentences)
    text = text[0].upper() + text[1:]
    if truth_table is not None:
        register_truth(truth_table, text, subset)
    return Scenario(subset, text, TEMPLATE_COMPOSED, 1)


def register_truth(table: MutableMapping[str, frozenset], text: str, subset: Iterable[str]) -> None:
    subset = frozenset(subset)
    prior = table.setdefault(text, subset)
    if prior != subset:
        raise ValueError("the same description was registered for two different subsets")


def generate_scenario(
    backend,
    included: Iterable[str],
    excluded: Iterable[str],
    domain: FactorDomain = CREDIT_DOMAIN,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    prompts: Optional[Prompts] = None,
) -> Scenario | Skipped:
    """Ask ``backend`` for a scenario and verify it by extracting factors back out.

    Extraction runs against the whole domain; a description is accepted only
    when it yields exactly ``included``. Gives up after ``max_attempts``.
    """
    prompts = prompts or Prompts.default()
    included = domain.situation(included)
    excluded = domain.situation(excluded)
    if not included:
        raise ValueError("included factors must be non-empty")
    if included & excluded or (included | excluded) != frozenset(domain.ids):
        raise ValueError("included and excluded must partition the domain")
    prompt = render(
        prompts.generate_scenario,
        included_factor_list=sentence_list(domain.sentences(included)),
        excluded_factor_list=sentence_list(domain.sentences(excluded)),
    )
    all_sentences = [f.sentence for f in domain]
    for attempt in range(1, max_attempts + 1):
        description = backend.complete(prompt).strip()
        if not description:
            continue
        extracted = extract_case_factors(backend, all_sentences, description, domain=domain, prompts=prompts)
        if extracted.ok and extracted.factors == included:
            return Scenario(included, description, LLM_GENERATED, attempt)
        logger.debug("scenario for %s rejected on attempt %d", sorted(included), attempt)
    return Skipped(included, max_attempts)


@dataclass
class ScenarioPool:
    domain: FactorDomain = CREDIT_DOMAIN
    scenarios: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.scenarios)

    def add(self, item: Scenario | Skipped) -> None:
        if isinstance(item, Skipped):
            self.skipped.append(item.subset)
        else:
            if item.subset in self.scenarios:
                raise ValueError(f"duplicate scenario for subset {sorted(item.subset)}")
            self.scenarios[item.subset] = item

    def subsets(self) -> list[frozenset]:
        return sorted(self.scenarios, key=lambda s: subset_key(self.domain, s))

    def truth_table(self) -> dict[str, frozenset]:
        table: dict[str, frozenset] = {}
        for sc in self.scenarios.values():
            register_truth(table, sc.description, sc.subset)
        return table

    def dump(self, path) -> None:
        """Write JSON lines, one scenario (or skipped subset) per line, in subset order."""
        rows = []
        for s in self.subsets():
            sc = self.scenarios[s]
            rows.append(
                {
                    "subset": self.domain.ordered(s),
                    "description": sc.description,
                    "source": sc.source,
                    "attempts": sc.attempts,
                }
            )
        for s in sorted(self.skipped, key=lambda s: subset_key(self.domain, s)):
            rows.append({"subset": self.domain.ordered(s), "description": None, "source": "skipped"})
        Path(path).write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")

    @classmethod
    def load(cls, path, domain: FactorDomain = CREDIT_DOMAIN) -> "ScenarioPool":
        pool = cls(domain)
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            subset = domain.situation(row["subset"])
            if row.get("source") == "skipped":
                pool.skipped.append(subset)
            else:
                pool.add(Scenario(subset, row["description"], row["source"], row.get("attempts", 1)))
        return pool


def build_template_pool(domain: FactorDomain = CREDIT_DOMAIN, seed=0) -> ScenarioPool:
    """A pool with one composed scenario for every non-empty subset of the domain."""
    pool = ScenarioPool(domain)
    for subset in nonempty_subsets(domain):
        pool.add(compose_template_scenario(subset, seed=seed, domain=domain))
    return pool


def generate_pool(
    backend,
    domain: FactorDomain = CREDIT_DOMAIN,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    concurrency: int = 8,
    prompts: Optional[Prompts] = None,
    subsets: Optional[Sequence[frozenset]] = None,
) -> ScenarioPool:
    """Generate and verify a scenario per subset through ``backend``."""
    subsets = list(subsets) if subsets is not None else nonempty_subsets(domain)
    everything = frozenset(domain.ids)

    def one(s):
        return generate_scenario(backend, s, everything - s, domain, max_attempts, prompts)

    pool = ScenarioPool(domain)
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as ex:
        for item in ex.map(one, subsets):
            pool.add(item)
    return pool


@dataclass(frozen=True)
class TestSet:
    id: int
    seed: object
    previous: tuple  # of (subset, outcome)
    new_cases: tuple  # of frozenset

    __test__ = False  # not a pytest class

    def case_base(self) -> CaseBase:
        return CaseBase(Case(s, o) for s, o in self.previous)

    def to_dict(self, domain: FactorDomain = CREDIT_DOMAIN) -> dict:
        return {
            "id": self.id,
            "seed": self.seed,
            "previous": [
                {"subset": domain.ordered(s), "outcome": str(o)} for s, o in self.previous
            ],
            "new_cases": [domain.ordered(n) for n in self.new_cases],
        }

    @classmethod
    def from_dict(cls, data: Mapping, domain: FactorDomain = CREDIT_DOMAIN) -> "TestSet":
        return cls(
            id=data.get("id", 0),
            seed=data["seed"],
            previous=tuple(
                (domain.situation(p["subset"]), check_outcome(p["outcome"])) for p in data["previous"]
            ),
            new_cases=tuple(domain.situation(n) for n in data["new_cases"]),
        )


def forced_outcome(domain: FactorDomain, subset: Iterable[str]) -> Optional[int]:
    """0 for all-negative subsets, 1 for all-positive ones, else ``None``."""
    polarities = {domain[f].polarity for f in subset}
    if polarities == {"negative"}:
        return 0
    if polarities == {"positive"}:
        return 1
    return None


def generate_test_sets(
    pool: ScenarioPool,
    count: int,
    seed=0,
    with_replacement: bool = False,
    n_previous: int = N_PREVIOUS,
    new_case_sizes: Sequence[int] = NEW_CASE_SIZES,
) -> list[TestSet]:
    domain = pool.domain
    subsets = pool.subsets()
    if not with_replacement and len(subsets) < n_previous:
        raise InsufficientPool(f"need {n_previous} scenarios, pool has {len(subsets)}")
    if not subsets:
        raise InsufficientPool("empty scenario pool")
    if any(k > len(domain) or k < 0 for k in new_case_sizes):
        raise ValueError("new case sizes must lie within the domain size")
    out = []
    for i in range(count):
        rng = random.Random(f"testset:{seed}:{i}")
        if with_replacement:
            drawn = [rng.choice(subsets) for _ in range(n_previous)]
        else:
            drawn = rng.sample(subsets, n_previous)
        assigned: dict[frozenset, int] = {}
        previous = []
        for s in drawn:
            if s not in assigned:
                forced = forced_outcome(domain, s)
                assigned[s] = forced if forced is not None else rng.randrange(2)
            previous.append((s, assigned[s]))
        new_cases = tuple(frozenset(rng.sample(domain.ids, k)) for k in new_case_sizes)
        out.append(TestSet(i, seed, tuple(previous), new_cases))
    return out


def dump_test_sets(test_sets: Sequence[TestSet], directory, domain: FactorDomain = CREDIT_DOMAIN) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for ts in test_sets:
        path = directory / f"testset_{ts.id:03d}.json"
        path.write_text(json.dumps(ts.to_dict(domain), indent=2) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


def load_test_sets(directory, domain: FactorDomain = CREDIT_DOMAIN) -> list[TestSet]:
    paths = sorted(Path(directory).glob("testset_*.json"))
    return [TestSet.from_dict(json.loads(p.read_text(encoding="utf-8")), domain) for p in paths]
