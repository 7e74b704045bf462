"""Per-rule recall/precision and aggregate report shaping.

Recall is correct detections over expected pieces; precision is correct
detections over everything detected.  An empty detection set scores
0.0/0.0 and carries the ``no-detections`` flag so aggregates stay total.
Aggregates use population statistics; rounding happens only at render
time (percentages to one decimal, statistics to two).
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field

FLAG_NO_DETECTIONS = "no-detections"
FLAG_USED_MODULE_INFO = "used-module-info"
FLAG_TRUNCATED_PROMPT = "truncated-prompt"
FLAG_FALLBACK_RANKING = "fallback-ranking"

THRESHOLD_CUTS = (0.5, 0.75, 1.0)

PER_RULE_COLUMNS = [
    "rule_id",
    "expected_count",
    "detected_count",
    "correct_count",
    "recall",
    "precision",
    "flags",
]


class ScoringError(Exception):
    pass


@dataclass(frozen=True)
class RuleScore:
    rule_id: str
    expected: frozenset[str]
    detected: frozenset[str]
    recall: float
    precision: float
    flags: frozenset[str] = frozenset()

    @property
    def correct(self) -> frozenset[str]:
        return self.expected & self.detected


@dataclass(frozen=True)
class AggregateReport:
    total: int
    count_with_module: int
    count_without_module: int
    recall_thresholds: tuple[float, float, float]
    precision_thresholds: tuple[float, float, float]
    mean_recall: float
    median_recall: float
    std_recall: float
    mean_precision: float
    median_precision: float
    std_precision: float


def score_rule(
    expected: set[str],
    detected: set[str],
    rule_id: str = "",
    flags: set[str] | None = None,
) -> RuleScore:
    if not expected:
        raise ScoringError(f"rule {rule_id or '<unnamed>'}: expected piece set is empty")
    all_flags = set(flags or ())
    correct = expected & detected
    recall = len(correct) / len(expected)
    if detected:
        precision = len(correct) / len(detected)
    else:
        precision = 0.0
        all_flags.add(FLAG_NO_DETECTIONS)
    return RuleScore(
        rule_id=rule_id,
        expected=frozenset(expected),
        detected=frozenset(detected),
        recall=recall,
        precision=precision,
        flags=frozenset(all_flags),
    )


def _threshold_fractions(values: list[float]) -> tuple[float, float, float]:
    n = len(values)
    ge_half = sum(1 for v in values if v >= 0.5) / n
    ge_three_quarters = sum(1 for v in values if v >= 0.75) / n
    perfect = sum(1 for v in values if v == 1.0) / n
    return (ge_half, ge_three_quarters, perfect)


def aggregate(scores: list[RuleScore]) -> AggregateReport:
    if not scores:
        raise ScoringError("cannot aggregate an empty score list")
    recalls = [s.recall for s in scores]
    precisions = [s.precision for s in scores]
    with_module = sum(1 for s in scores if FLAG_USED_MODULE_INFO in s.flags)
    return AggregateReport(
        total=len(scores),
        count_with_module=with_module,
        count_without_module=len(scores) - with_module,
        recall_thresholds=_threshold_fractions(recalls),
        precision_thresholds=_threshold_fractions(precisions),
        mean_recall=statistics.mean(recalls),
        median_recall=statistics.median(recalls),
        std_recall=statistics.pstdev(recalls),
        mean_precision=statistics.mean(precisions),
        median_precision=statistics.median(precisions),
        std_precision=statistics.pstdev(precisions),
    )


def _pct(fraction: float) -> str:
    return f"{100 * fraction:.1f}"


def _stat(value: float) -> str:
    return f"{value:.2f}"


def render_markdown(report: AggregateReport) -> str:
    r = report.recall_thresholds
    p = report.precision_thresholds
    lines = [
        "| rules | count |",
        "| --- | --- |",
        f"| without module information | {report.count_without_module} |",
        f"| with module information | {report.count_with_module} |",
        f"| total | {report.total} |",
        "",
        "| | recall >=0.5 | recall >=0.75 | recall =1 "
        "| precision >=0.5 | precision >=0.75 | precision =1 |",
        "| --- | --- | --- | --- | --- | --- | --- |",
        f"| share of rules | {_pct(r[0])}% | {_pct(r[1])}% | {_pct(r[2])}% "
        f"| {_pct(p[0])}% | {_pct(p[1])}% | {_pct(p[2])}% |",
        "",
        "| statistic | recall | precision |",
        "| --- | --- | --- |",
        f"| mean | {_stat(report.mean_recall)} | {_stat(report.mean_precision)} |",
        f"| median | {_stat(report.median_recall)} | {_stat(report.median_precision)} |",
        f"| standard deviation | {_stat(report.std_recall)} | {_stat(report.std_precision)} |",
    ]
    return "\n".join(lines) + "\n"


_CSV_COLUMNS = [
    "total",
    "with_module",
    "without_module",
    "recall_ge_50",
    "recall_ge_75",
    "recall_eq_100",
    "precision_ge_50",
    "precision_ge_75",
    "precision_eq_100",
    "mean_recall",
    "median_recall",
    "std_recall",
    "mean_precision",
    "median_precision",
    "std_precision",
]


def render_csv(report: AggregateReport) -> str:
    r = report.recall_thresholds
    p = report.precision_thresholds
    row = [
        str(report.total),
        str(report.count_with_module),
        str(report.count_without_module),
        _pct(r[0]),
        _pct(r[1]),
        _pct(r[2]),
        _pct(p[0]),
        _pct(p[1]),
        _pct(p[2]),
        _stat(report.mean_recall),
        _stat(report.median_recall),
        _stat(report.std_recall),
        _stat(report.mean_precision),
        _stat(report.median_precision),
        _stat(report.std_precision),
    ]
    return ",".join(_CSV_COLUMNS) + "\n" + ",".join(row) + "\n"


def render_json(report: AggregateReport) -> str:
    obj = {
        "total": report.total,
        "count_with_module": report.count_with_module,
        "count_without_module": report.count_without_module,
        "recall_thresholds": list(report.recall_thresholds),
        "precision_thresholds": list(report.precision_thresholds),
        "mean_recall": report.mean_recall,
        "median_recall": report.median_recall,
        "std_recall": report.std_recall,
        "mean_precision": report.mean_precision,
        "median_precision": report.median_precision,
        "std_precision": report.std_precision,
    }
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> AggregateReport:
    obj = json.loads(text)
    return AggregateReport(
        total=obj["total"],
        count_with_module=obj["count_with_module"],
        count_without_module=obj["count_without_module"],
        recall_thresholds=tuple(obj["recall_thresholds"]),
        precision_thresholds=tuple(obj["precision_thresholds"]),
        mean_recall=obj["mean_recall"],
        median_recall=obj["median_recall"],
        std_recall=obj["std_recall"],
        mean_precision=obj["mean_precision"],
        median_precision=obj["median_precision"],
        std_precision=obj["std_precision"],
    )


_RENDERERS = {
    "markdown": render_markdown,
    "markdown-table": render_markdown,
    "csv": render_csv,
    "json": render_json,
}


def emit_report(report: AggregateReport, format: str = "markdown") -> str:
    try:
        renderer = _RENDERERS[format]
    except KeyError:
        raise ScoringError(f"unknown report format {format!r}") from None
    return renderer(report)


def scores_to_csv(scores: list[RuleScore]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PER_RULE_COLUMNS)
    for score in sorted(scores, key=lambda s: s.rule_id):
        writer.writerow(
            [
                score.rule_id,
                len(score.expected),
                len(score.detected),
                len(score.correct),
                repr(score.recall),
                repr(score.precision),
                " ".join(sorted(score.flags)),
            ]
        )
    return buf.getvalue()


def scores_from_csv(text: str) -> list[RuleScore]:
    """Rebuild scores from the per-rule CSV (sets reduced to size markers)."""
    reader = csv.DictReader(io.StringIO(text))
    scores = []
    for row in reader:
        expected = frozenset(f"e{i}" for i in range(int(row["expected_count"])))
        correct_n = int(row["correct_count"])
        detected = frozenset(f"e{i}" for i in range(correct_n)) | frozenset(
            f"d{i}" for i in range(int(row["detected_count"]) - correct_n)
        )
        scores.append(
            RuleScore(
                rule_id=row["rule_id"],
                expected=expected,
                detected=detected,
                recall=float(row["recall"]),
                precision=float(row["precision"]),
                flags=frozenset(row["flags"].split()) if row["flags"] else frozenset(),
            )
        )
    return scores
