"""Factors, cases and case bases.

Outcomes are plain ints in ``{0, 1}``; situations are frozensets of factor ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

OUTCOMES = (0, 1)
POLARITIES = ("positive", "negative")


class ConsistencyViolation(ValueError):
    """Raised when a case collection maps one factor set to both outcomes."""

    def __init__(self, conflicts: Sequence[frozenset]):
        self.conflicts = list(conflicts)
        shown = ", ".join("{" + ",".join(sorted(c)) + "}" for c in self.conflicts)
        super().__init__(f"conflicting outcomes for factor sets: {shown}")


class UnknownFactor(KeyError):
    pass


def check_outcome(o) -> int:
    if isinstance(o, str):
        o = o.strip()
        if o not in ("0", "1"):
            raise ValueError(f"outcome must be 0 or 1, got {o!r}")
        return int(o)
    if isinstance(o, bool) or o not in OUTCOMES:
        raise ValueError(f"outcome must be 0 or 1, got {o!r}")
    return int(o)


def complement(o: int) -> int:
    """Return the contrary outcome."""
    return 1 - check_outcome(o)


@dataclass(frozen=True)
class Factor:
    id: str
    sentence: str
    polarity: str

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ValueError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")


class FactorDomain:
    """Ordered, immutable universe of factors.

    Ids and sentences are both unique; ids are the semantic keys, sentences are
    what goes into prompts.
    """

    def __init__(self, factors: Iterable[Factor]):
        factors = tuple(factors)
        if not factors:
            raise ValueError("a factor domain needs at least one factor")
        ids = [f.id for f in factors]
        sentences = [f.sentence for f in factors]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate factor id in domain")
        if len(set(sentences)) != len(sentences):
            raise ValueError("duplicate factor sentence in domain")
        self._factors = factors
        self._by_id = {f.id: f for f in factors}
        self._index = {f.id: i for i, f in enumerate(factors)}

    def __iter__(self) -> Iterator[Factor]:
        return iter(self._factors)

    def __len__(self) -> int:
        return len(self._factors)

    def __contains__(self, fid) -> bool:
        return fid in self._by_id

    def __getitem__(self, fid: str) -> Factor:
        try:
            return self._by_id[fid]
        except KeyError:
            raise UnknownFactor(fid) from None

    def __eq__(self, other) -> bool:
        return isinstance(other, FactorDomain) and self._factors == other._factors

    def __hash__(self) -> int:
        return hash(self._factors)

    def __repr__(self) -> str:
        return f"FactorDomain({[f.id for f in self._factors]})"

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self._factors)

    @property
    def factors(self) -> tuple[Factor, ...]:
        return self._factors

    def situation(self, fids: Iterable[str]) -> frozenset:
        """Validate ``fids`` against the domain and return them as a situation."""
        fids = frozenset(fids)
        missing = [f for f in fids if f not in self._by_id]
        if missing:
            raise UnknownFactor(", ".join(sorted(missing)))
        return fids

    def ordered(self, fids: Iterable[str]) -> list[str]:
        """Sort factor ids into domain order."""
        return sorted(self.situation(fids), key=self._index.__getitem__)

    def sentences(self, fids: Iterable[str]) -> list[str]:
        return [self._by_id[f].sentence for f in self.ordered(fids)]

    def with_flipped_polarity(self) -> "FactorDomain":
        flip = {"positive": "negative", "negative": "positive"}
        return FactorDomain(Factor(f.id, f.sentence, flip[f.polarity]) for f in self._factors)

    def to_dict(self) -> dict:
        return {
            "factors": [
                {"id": f.id, "sentence": f.sentence, "polarity": f.polarity}
                for f in self._factors
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "FactorDomain":
        return cls(Factor(d["id"], d["sentence"], d["polarity"]) for d in data["factors"])

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FactorDomain":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# Credit-card application factors, verbatim (including n1's trailing period).
CREDIT_DOMAIN = FactorDomain(
    [
        Factor("p1", "low debt-to-income ratio", "positive"),
        Factor("p2", "long and stable employment history", "positive"),
        Factor("p3", "consistent payment history on existing loans", "positive"),
        Factor("p4", "significant assets declared", "positive"),
        Factor("p5", "positive relationship with the bank", "positive"),
        Factor("n1", "high number of recent credit inquiries.", "negative"),
        Factor("n2", "missed or late payments history", "negative"),
        Factor("n3", "insufficient income", "negative"),
        Factor("n4", "limited credit history", "negative"),
        Factor("n5", "young age", "negative"),
    ]
)


@dataclass(frozen=True)
class Case:
    """A previous case: a situation and its decided outcome."""

    factors: frozenset
    outcome: int

    def __init__(self, factors: Iterable[str], outcome):
        object.__setattr__(self, "factors", frozenset(factors))
        object.__setattr__(self, "outcome", check_outcome(outcome))

    def __repr__(self) -> str:
        return f"Case({{{','.join(sorted(self.factors))}}}, {self.outcome})"


def new_case(factors: Iterable[str]) -> frozenset:
    """A new case is just its situation; there is no outcome to carry."""
    return frozenset(factors)


class CaseBase:
    """Finite, outcome-consistent set of cases."""

    def __init__(self, cases: Iterable[Case] = ()):
        seen: dict[frozenset, int] = {}
        conflicts = []
        for case in cases:
            prior = seen.setdefault(case.factors, case.outcome)
            if prior != case.outcome and case.factors not in conflicts:
                conflicts.append(case.factors)
        if conflicts:
            raise ConsistencyViolation(conflicts)
        self._cases = frozenset(Case(x, o) for x, o in seen.items())

    def __iter__(self) -> Iterator[Case]:
        # stable iteration order for reproducible output
        return iter(sorted(self._cases, key=lambda c: (len(c.factors), sorted(c.factors), c.outcome)))

    def __len__(self) -> int:
        return len(self._cases)

    def __contains__(self, case) -> bool:
        return case in self._cases

    def __eq__(self, other) -> bool:
        return isinstance(other, CaseBase) and self._cases == other._cases

    def __hash__(self) -> int:
        return hash(self._cases)

    def __repr__(self) -> str:
        return f"CaseBase({list(self)})"

    def relevant_to(self, n: Iterable[str]) -> "CaseBase":
        """Cases whose situation is covered by the new case ``n``."""
        n = frozenset(n)
        return CaseBase(c for c in self._cases if c.factors <= n)


def check_consistency(cases: Iterable[Case]) -> CaseBase:
    """Deduplicate ``cases`` into a CaseBase, raising on conflicting outcomes."""
    return CaseBase(cases)


_TRAILING = ".,;:!?\"'` "


def normalize_sentence(s: str) -> str:
    """Case-fold and strip surrounding whitespace, quotes and trailing punctuation."""
    s = s.strip().strip("\"'`").strip()
    return s.rstrip(_TRAILING).lower()


def sentence_index(domain: FactorDomain) -> dict[str, str]:
    """Map normalized sentences to factor ids."""
    return {normalize_sentence(f.sentence): f.id for f in domain}


def ids_for_sentences(domain: FactorDomain, sentences: Iterable[str]) -> tuple[frozenset, list[str]]:
    """Map sentences back to ids; returns ``(ids, unknown_sentences)``."""
    index = sentence_index(domain)
    ids, unknown = set(), []
    for s in sentences:
        fid = index.get(normalize_sentence(s))
        if fid is None:
            unknown.append(s)
        else:
            ids.add(fid)
    return frozenset(ids), unknown
