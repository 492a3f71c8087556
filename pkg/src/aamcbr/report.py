"""CSV/JSON/text output for experiment runs."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

from .domain import check_outcome
from .experiments import (
    STRATEGIES,
    STRATEGY_NAMES,
    CoverageRecord,
    ExtractionRecord,
    MetricsTable,
    PredictionRecord,
)

COVERAGE_FIELDS = [
    "test_set", "new_case_index", "previous_index", "n",
    "ground_truth_relevant", "predicted_relevant", "parse_status",
]
EXTRACTION_FIELDS = [
    "test_set", "new_case_index", "previous_index", "n",
    "predicted", "ground_truth", "actually_relevant", "exact_match", "parse_status",
]
PREDICTION_FIELDS = [
    "test_set", "new_case_index", "n", "default", "strategy", "predicted", "gold", "correct", "error",
]


def _ids(s) -> str:
    return " ".join(sorted(s))


def _bool(v: str) -> bool:
    return v == "True"


def _write_csv(path: Path, fieldnames, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def write_coverage_csv(path, records: Sequence[CoverageRecord]) -> None:
    _write_csv(Path(path), COVERAGE_FIELDS, (
        {
            "test_set": r.test_set, "new_case_index": r.new_case_index,
            "previous_index": r.previous_index, "n": r.n,
            "ground_truth_relevant": r.ground_truth_relevant,
            "predicted_relevant": r.predicted_relevant, "parse_status": r.parse_status,
        }
        for r in records
    ))


def read_coverage_csv(path) -> list[CoverageRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            CoverageRecord(
                int(row["test_set"]), int(row["new_case_index"]), int(row["previous_index"]),
                int(row["n"]), _bool(row["ground_truth_relevant"]),
                _bool(row["predicted_relevant"]), row["parse_status"],
            )
            for row in csv.DictReader(fh)
        ]


def write_extraction_csv(path, records: Sequence[ExtractionRecord]) -> None:
    _write_csv(Path(path), EXTRACTION_FIELDS, (
        {
            "test_set": r.test_set, "new_case_index": r.new_case_index,
            "previous_index": r.previous_index, "n": r.n,
            "predicted": _ids(r.predicted), "ground_truth": _ids(r.ground_truth),
            "actually_relevant": r.actually_relevant, "exact_match": r.exact_match,
            "parse_status": r.parse_status,
        }
        for r in records
    ))


def read_extraction_csv(path) -> list[ExtractionRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            ExtractionRecord(
                int(row["test_set"]), int(row["new_case_index"]), int(row["previous_index"]),
                int(row["n"]), frozenset(row["predicted"].split()),
                frozenset(row["ground_truth"].split()), _bool(row["actually_relevant"]),
                row["parse_status"],
            )
            for row in csv.DictReader(fh)
        ]


def write_prediction_csv(path, records: Sequence[PredictionRecord]) -> None:
    _write_csv(Path(path), PREDICTION_FIELDS, (
        {
            "test_set": r.test_set, "new_case_index": r.new_case_index, "n": r.n,
            "default": r.default, "strategy": r.strategy, "predicted": r.predicted,
            "gold": r.gold, "correct": r.correct, "error": r.error,
        }
        for r in records
    ))


def read_prediction_csv(path) -> list[PredictionRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            PredictionRecord(
                int(row["test_set"]), int(row["new_case_index"]), int(row["n"]),
                check_outcome(row["default"]), row["strategy"], row["predicted"],
                check_outcome(row["gold"]), row["error"],
            )
            for row in csv.DictReader(fh)
        ]


def write_metrics(path, metrics: MetricsTable) -> None:
    Path(path).write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_metrics(path) -> MetricsTable:
    return MetricsTable.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fmt(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:.2f}"


def _grid(header_rows: list[list[str]], body: list[list[str]]) -> str:
    rows = header_rows + body
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [sep]
    for k, r in enumerate(rows):
        out.append("| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |")
        if k == len(header_rows) - 1:
            out.append(sep)
    out.append(sep)
    return "\n".join(out)


def prediction_table(metrics: MetricsTable, title: str = "Outcome Prediction Accuracy") -> str:
    """Strategies as rows, (new case size, default outcome) as columns."""
    pred = metrics.prediction
    strategies = [s for s in STRATEGIES if s in pred] + sorted(s for s in pred if s not in STRATEGIES)
    sizes = sorted({int(n) for s in strategies for n in pred[s]})
    defaults = sorted({d for s in strategies for n in pred[s] for d in pred[s][n]})
    h1 = ["New case size (n)"] + [f"n = {n}" if i == 0 else "" for n in sizes for i, _ in enumerate(defaults)]
    h2 = ["default outcome"] + [f"'{d}'" for _ in sizes for d in defaults]
    body = []
    for s in strategies:
        row = [STRATEGY_NAMES.get(s, s)]
        for n in sizes:
            for d in defaults:
                cell = pred[s].get(str(n), {}).get(d)
                row.append(_fmt(cell["accuracy"]) if cell else "-")
        body.append(row)
    return title + "\n" + _grid([h1, h2], body)


def module_table(metrics: MetricsTable) -> str:
    """Coverage and extraction rates by new case size."""
    sizes = sorted({int(n) for n in metrics.coverage} | {int(n) for n in metrics.extraction})
    rows = [
        ("Case Relevance Determination Accuracy", metrics.coverage, "accuracy"),
        ("Probability that a Retrieved Case is Actually Relevant", metrics.coverage, "precision"),
        ("Case Factor Extraction Accuracy", metrics.extraction, "accuracy"),
        ("Factor Extraction Accuracy Given Relevance", metrics.extraction, "accuracy_given_relevant"),
    ]
    body = [[name] + [_fmt(src.get(str(n), {}).get(key)) for n in sizes] for name, src, key in rows]
    return "Coverage and extraction\n" + _grid([["metric"] + [f"n = {n}" for n in sizes]], body)


def emit_report(
    out_dir,
    metrics: MetricsTable,
    coverage: Optional[Sequence[CoverageRecord]] = None,
    extraction: Optional[Sequence[ExtractionRecord]] = None,
    predictions: Optional[Sequence[PredictionRecord]] = None,
) -> list[Path]:
    """Write record CSVs (for the record types given), ``metrics.json`` and ``tables.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, records, writer in (
        ("coverage.csv", coverage, write_coverage_csv),
        ("extraction.csv", extraction, write_extraction_csv),
        ("predictions.csv", predictions, write_prediction_csv),
    ):
        if records is not None:
            writer(out / name, records)
            written.append(out / name)
    write_metrics(out / "metrics.json", metrics)
    written.append(out / "metrics.json")
    parts = []
    if metrics.coverage or metrics.extraction:
        parts.append(module_table(metrics))
    if metrics.prediction:
        parts.append(prediction_table(metrics))
    (out / "tables.txt").write_text("\n\n".join(parts) + "\n", encoding="utf-8")
    written.append(out / "tables.txt")
    return written
