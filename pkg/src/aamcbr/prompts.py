"""Prompt templates: loading, rendering, and matching rendered prompts back.

Templates use ``{placeholder}`` fields. Braces that do not wrap a bare
identifier (JSON, ``{}``, ``{ x }``) are left alone.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

_FIELD = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _load_builtin(name: str) -> str:
    return resources.files("aamcbr").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")


def placeholders(template: str) -> list[str]:
    return list(dict.fromkeys(_FIELD.findall(template)))


def render(template: str, **values) -> str:
    """Fill every placeholder of ``template``; a missing value raises KeyError."""

    def sub(m: re.Match) -> str:
        return str(values[m.group(1)])

    return _FIELD.sub(sub, template)


def match(template: str, text: str) -> dict | None:
    """Invert :func:`render`: recover placeholder values from a rendered prompt.

    Returns ``None`` when ``text`` does not have the template's shape.
    """
    parts = []
    pos = 0
    seen = set()
    for m in _FIELD.finditer(template):
        parts.append(re.escape(template[pos:m.start()]))
        name = m.group(1)
        parts.append(f"(?P={name})" if name in seen else f"(?P<{name}>.*?)")
        seen.add(name)
        pos = m.end()
    parts.append(re.escape(template[pos:]))
    found = re.fullmatch("".join(parts), text, re.S)
    return found.groupdict() if found else None


@dataclass(frozen=True)
class Prompts:
    generate_scenario: str
    extract_factors: str
    determine_coverage: str
    predict_outcome: str
    instructed_steps: str
    conclude_outcome: str

    @classmethod
    def default(cls) -> "Prompts":
        return cls(**{f.name: _load_builtin(f.name) for f in fields(cls)})

    @classmethod
    def from_dir(cls, directory) -> "Prompts":
        """Built-in templates, overridden by any ``<name>.txt`` found in ``directory``."""
        directory = Path(directory)
        base = cls.default()
        overrides = {}
        for f in fields(cls):
            path = directory / f"{f.name}.txt"
            if path.exists():
                overrides[f.name] = path.read_text(encoding="utf-8")
        return replace(base, **overrides)

    @property
    def predict_outcome_instructed(self) -> str:
        """The non-instructed template with its closing question swapped for the dispute steps."""
        head = self.predict_outcome.rstrip("\n").rsplit("\n", 1)[0]
        return head + "\n" + self.instructed_steps


def sentence_list(sentences: Iterable[str]) -> str:
    return json.dumps(list(sentences), ensure_ascii=False)


def parse_sentence_list(text: str) -> list[str]:
    value = json.loads(text)
    if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
        raise ValueError("expected a JSON array of strings")
    return value


def previous_case_list(rows: Sequence[tuple[str, int]]) -> str:
    """One line per previous case: its text and its outcome label."""
    return "\n    ".join(
        f"Case {i}: {text} (outcome: '{outcome}')" for i, (text, outcome) in enumerate(rows, 1)
    )


_CASE_LINE = re.compile(r"Case (\d+): (.*) \(outcome: '([^']*)'\)")


def parse_previous_case_list(text: str) -> list[tuple[str, str]]:
    rows = []
    for line in text.split("\n"):
        m = _CASE_LINE.fullmatch(line.strip())
        if m is None:
            raise ValueError(f"malformed previous-case line: {line!r}")
        rows.append((m.group(2), m.group(3)))
    return rows


FACTORS_PREFIX = "Factors: "


def factorized_case_text(sentences: Iterable[str]) -> str:
    return FACTORS_PREFIX + sentence_list(sentences)
