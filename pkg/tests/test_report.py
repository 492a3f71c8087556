import json

from aamcbr.experiments import (
    STRATEGIES,
    CoverageRecord,
    ExtractionRecord,
    MetricsTable,
    PredictionRecord,
    coverage_metrics,
    extraction_metrics,
    prediction_metrics,
)
from aamcbr.report import (
    emit_report,
    load_metrics,
    module_table,
    prediction_table,
    read_coverage_csv,
    read_extraction_csv,
    read_prediction_csv,
    write_coverage_csv,
    write_extraction_csv,
    write_metrics,
    write_prediction_csv,
)


def _predictions():
    return [
        PredictionRecord(0, n - 6, n, d, s, str(d), d, "")
        for s in STRATEGIES for n in range(6, 11) for d in (0, 1)
    ]


def test_prediction_table_shape():
    text = prediction_table(MetricsTable(prediction=prediction_metrics(_predictions())))
    lines = text.splitlines()
    body = [l for l in lines if l.startswith("| ") and ("CBR" in l or "Single" in l)]
    assert len(body) == 3
    for row in body:
        cells = [c.strip() for c in row.strip("|").split("|")]
        assert len(cells) == 1 + 10
        assert cells[1:] == ["1.00"] * 10
    assert "n = 6" in lines[2] and "'0'" in lines[3]


def test_module_table_rows():
    cov = [CoverageRecord(0, 0, i, 6, i < 1, i < 2, "ok") for i in range(4)]
    m = MetricsTable(coverage=coverage_metrics(cov))
    text = module_table(m)
    assert "Case Relevance Determination Accuracy" in text
    assert "| 0.75" in text and "| 0.50" in text
    assert "Factor Extraction Accuracy Given Relevance" in text


def test_csv_headers_only(tmp_path):
    write_coverage_csv(tmp_path / "c.csv", [])
    write_extraction_csv(tmp_path / "e.csv", [])
    write_prediction_csv(tmp_path / "p.csv", [])
    assert (tmp_path / "c.csv").read_text().startswith("test_set,new_case_index")
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 1
    assert read_coverage_csv(tmp_path / "c.csv") == []


def test_csv_roundtrip(tmp_path):
    cov = [CoverageRecord(1, 2, 3, 8, True, False, "retried")]
    ext = [ExtractionRecord(1, 2, 3, 8, frozenset({"p1", "n2"}), frozenset(), False, "ok")]
    pred = _predictions()
    write_coverage_csv(tmp_path / "c.csv", cov)
    write_extraction_csv(tmp_path / "e.csv", ext)
    write_prediction_csv(tmp_path / "p.csv", pred)
    assert read_coverage_csv(tmp_path / "c.csv") == cov
    assert read_extraction_csv(tmp_path / "e.csv") == ext
    assert read_prediction_csv(tmp_path / "p.csv") == pred
    assert "n2 p1" in (tmp_path / "e.csv").read_text()


def test_metrics_json_roundtrip(tmp_path):
    m = MetricsTable(
        coverage=coverage_metrics([CoverageRecord(0, 0, 0, 6, False, False, "ok")]),
        extraction=extraction_metrics([]),
        prediction=prediction_metrics(_predictions()),
    )
    write_metrics(tmp_path / "m.json", m)
    assert load_metrics(tmp_path / "m.json") == m
    data = json.loads((tmp_path / "m.json").read_text())
    assert data["coverage"]["6"]["precision"] is None


def test_emit_report(tmp_path):
    m = MetricsTable(prediction=prediction_metrics(_predictions()))
    paths = emit_report(tmp_path, m, predictions=_predictions())
    assert {p.name for p in paths} == {"predictions.csv", "metrics.json", "tables.txt"}
    assert "Outcome Prediction Accuracy" in (tmp_path / "tables.txt").read_text()
