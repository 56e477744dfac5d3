import json

import pandas as pd
import pytest

from conftest import record_at_distances
from src.analyzer.evaluator import Policy, evaluate
from src.analyzer.sweeps import sweep_alpha
from src.router.trainer import TrainConfig
from src.utils.report_generator import (
    generate_markdown_report,
    generate_table_report,
    report_frames,
    report_to_json,
    save_sweep_csv,
    sweep_frame,
)


@pytest.fixture
def report():
    records = [
        record_at_distances("a", 0.5, 30.0),
        record_at_distances("b", 300.0, 0.5),
        record_at_distances("c", 3000.0, 3000.0),
    ]
    return evaluate(records, [Policy.pure_retrieval(), Policy.pure_generation(), Policy.oracle()])


def test_frames_have_one_row_per_policy(report):
    geo, routing = report_frames(report)
    assert list(geo.index) == ["retrieval", "generation", "oracle"]
    assert list(geo.columns) == ["street", "city", "region", "country", "continent", "average"]
    assert geo.loc["oracle", "street"] == pytest.approx(200 / 3)
    assert routing.loc["oracle", "street"] == 100.0


def test_table_marks_empty_disagreement_as_na(report):
    text = generate_table_report(report)
    assert "Records: 3" in text
    # nothing separates the paradigms at 2500 km, so routing accuracy is undefined there
    assert "n/a" in text
    assert "None" not in text


def test_undefined_routing_accuracy_is_nan_in_frames(report):
    _, routing = report_frames(report)
    assert routing.dtypes.eq(float).all()
    assert pd.isna(routing.loc["oracle", "continent"])


def test_markdown_report(report):
    markdown = generate_markdown_report(report)
    assert markdown.startswith("# Routing Evaluation Report")
    assert "| oracle |" in markdown
    assert "* continent: 0" in markdown


def test_json_report(report):
    data = json.loads(report_to_json(report))
    assert data["record_count"] == 3
    assert [p["name"] for p in data["policies"]] == ["retrieval", "generation", "oracle"]
    assert data["policies"][0]["routing_accuracy"][-1] is None


def test_sweep_csv(tmp_path, synthetic_records):
    rows = sweep_alpha(synthetic_records, [0.5, 1.5], cfg=TrainConfig(epochs=1))
    path = tmp_path / "sweep" / "alpha.csv"
    save_sweep_csv(rows, str(path))
    table = pd.read_csv(path)
    assert list(table.columns) == ["alpha", "threshold", "accuracy"]
    assert len(table) == 10
    assert sorted(set(table["alpha"])) == [0.5, 1.5]
    assert table["accuracy"].tolist() == pytest.approx(sweep_frame(rows)["accuracy"].tolist())
