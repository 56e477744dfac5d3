import json
import os

import pandas as pd

NA = "n/a"


def _fmt(value):
    return NA if value is None else f"{value:.2f}"


def report_frames(report):
    """
    Geolocalization and routing accuracy tables, one row per policy.

    Undefined routing accuracies become NaN.
    """
    columns = report.labels + ["average"]
    geo = pd.DataFrame(
        [row.geo_accuracy + [row.geo_average] for row in report.rows],
        index=[row.name for row in report.rows],
        columns=columns,
        dtype=float,
    )
    routing = pd.DataFrame(
        [row.routing_accuracy + [row.routing_average] for row in report.rows],
        index=[row.name for row in report.rows],
        columns=columns,
        dtype=float,
    )
    return geo, routing


def generate_table_report(report):
    """Aligned plain-text tables of an EvalReport."""
    geo, routing = report_frames(report)
    text = f"Records: {report.record_count}\n"
    text += "Thresholds (km): " + ", ".join(f"{t:g}" for t in report.thresholds) + "\n\n"
    text += "Geolocalization accuracy (%)\n"
    text += geo.to_string(float_format=_fmt, na_rep=NA) + "\n\n"
    text += "Routing accuracy (%), over records with exactly one paradigm within the threshold\n"
    text += routing.to_string(float_format=_fmt, na_rep=NA) + "\n"
    text += "Disagreement set size: " + ", ".join(str(d) for d in report.disagreement) + "\n"
    return text


def generate_markdown_report(report):
    """Generate a markdown report from an EvalReport."""
    header = "| Policy | " + " | ".join(report.labels) + " | Average |\n"
    rule = "|---" * (len(report.labels) + 2) + "|\n"

    markdown = "# Routing Evaluation Report\n\n"
    markdown += f"Records: {report.record_count}\n\n"

    markdown += "## Geolocalization Accuracy (%)\n\n" + header + rule
    for row in report.rows:
        cells = [_fmt(v) for v in row.geo_accuracy + [row.geo_average]]
        markdown += f"| {row.name} | " + " | ".join(cells) + " |\n"

    markdown += "\n## Routing Accuracy (%)\n\n" + header + rule
    for row in report.rows:
        cells = [_fmt(v) for v in row.routing_accuracy + [row.routing_average]]
        markdown += f"| {row.name} | " + " | ".join(cells) + " |\n"

    markdown += "\n## Disagreement Set Size\n\n"
    for label, size in zip(report.labels, report.disagreement):
        markdown += f"* {label}: {size}\n"
    return markdown


def report_to_json(report):
    return json.dumps(report.to_dict(), indent=2) + "\n"


def sweep_frame(rows, value_name="alpha", policy="router"):
    """Long-format table (value, threshold, accuracy) of one policy across sweep rows."""
    records = []
    for row in rows:
        policy_row = row.report.row(policy)
        for t, accuracy in zip(row.report.thresholds, policy_row.geo_accuracy):
            records.append({value_name: row.value, "threshold": t, "accuracy": accuracy})
    return pd.DataFrame(records, columns=[value_name, "threshold", "accuracy"])


def sweep_summary(rows, value_name="alpha", policy="router"):
    """One line per sweep row: value, per-level accuracy and mean of the chosen policy."""
    lines = []
    for row in rows:
        policy_row = row.report.row(policy)
        cells = ", ".join(
            f"{label} {_fmt(v)}" for label, v in zip(row.report.labels, policy_row.geo_accuracy)
        )
        lines.append(f"{value_name}={row.value}: {cells}; mean {_fmt(policy_row.geo_average)}")
    return "\n".join(lines) + "\n"


def sweep_to_json(rows, value_name="alpha"):
    return (
        json.dumps(
            [{value_name: row.value, "report": row.report.to_dict()} for row in rows],
            indent=2,
        )
        + "\n"
    )


def save_sweep_csv(rows, output_path, value_name="alpha"):
    os.makedirs(os.path.dirname(output_path) or ".", exist_ok=True)
    sweep_frame(rows, value_name).to_csv(
        output_path, index=False, float_format="%.6f", lineterminator="\n"
    )


def save_report(report, output_path="evaluation_report.txt"):
    """Save a rendered report to a file."""
    # Ensure the directory exists
    os.makedirs(os.path.dirname(output_path) or ".", exist_ok=True)

    with open(output_path, "w", encoding="utf-8") as f:
        f.write(report)
