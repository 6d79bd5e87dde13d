"""Localisation error statistics, the taxel baseline and case comparison tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import krr
from .csvio import atomic_write_text, fmt
from .geometry import DomeSpec, SensorConfig, chart_to_xyz, clamp_to_chart, surface_projection, xyz_to_chart
from .surrogate import Dataset

ARROW_COLUMNS = ("true_A", "true_B", "pred_A", "pred_B", "error_mm")
SWEEP_COLUMNS = ("s", "r1", "r2", "r3", "r4", "r5")
COMPARISON_COLUMNS = (
    "case", "provenance", "median_mm", "mean_mm", "std_mm", "count",
    "ref_median_mm", "ref_mean_mm", "ref_std_mm",
)

# Reported localisation accuracy (median, mean, std in mm) of the original
# hardware and finite-element study.  Reference only; the surrogate is not
# expected to reproduce these numbers.
REFERENCE_TABLE = {
    (1, "simulation"): (1.5, 2.0, 2.2),
    (2, "simulation"): (1.9, 2.6, 2.4),
    (3, "simulation"): (2.1, 2.5, 1.9),
    (4, "simulation"): (1.2, 1.6, 1.5),
    (5, "simulation"): (1.4, 1.7, 1.4),
    (6, "simulation"): (1.2, 1.7, 1.4),
    (7, "simulation"): (1.0, 1.6, 1.6),
    (8, "simulation"): (0.9, 1.5, 1.7),
    (9, "simulation"): (1.0, 1.6, 1.6),
    (10, "simulation"): (2.6, 3.0, 2.3),
    (1, "real"): (1.4, 1.6, 1.2),
    (8, "real"): (1.1, 1.7, 1.9),
}
_REFERENCE_ROW = {"surrogate": "simulation", "ingested": "real"}


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorRecord:
    true_ab: tuple[float, float]
    predicted_ab: tuple[float, float]
    true_xyz: tuple[float, float, float]
    predicted_xyz: tuple[float, float, float]
    error: float
    depth: float
    clamped: bool = False

    def to_json(self) -> dict:
        return {
            "true_ab": list(self.true_ab),
            "predicted_ab": list(self.predicted_ab),
            "true_xyz": list(self.true_xyz),
            "predicted_xyz": list(self.predicted_xyz),
            "error_mm": self.error,
            "depth_mm": self.depth,
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class SummaryStats:
    median: float
    mean: float
    std_dev: float
    count: int

    def to_json(self) -> dict:
        return {"median_mm": self.median, "mean_mm": self.mean, "std_mm": self.std_dev,
                "count": self.count}

    @classmethod
    def from_json(cls, data: dict) -> "SummaryStats":
        return cls(data["median_mm"], data["mean_mm"], data["std_mm"], int(data["count"]))


def summarize(errors) -> SummaryStats:
    """Median, mean and population standard deviation."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise EvaluationError("no errors to summarise")
    return SummaryStats(float(np.median(e)), float(e.mean()), float(e.std()), int(e.size))


def cartesian_error(true_ab, predicted_ab, dome: DomeSpec = DomeSpec()) -> float:
    """Chord length between the dome points of two chart locations (mm)."""
    return float(krr.cartesian_errors(np.atleast_2d(true_ab), np.atleast_2d(predicted_ab), dome)[0])


def make_records(true_ab, pred_ab, depths, dome: DomeSpec) -> list[ErrorRecord]:
    true_ab = np.asarray(true_ab, dtype=float).reshape(-1, 2)
    pred, clamped = clamp_to_chart(np.asarray(pred_ab, dtype=float).reshape(-1, 2), dome)
    p = chart_to_xyz(true_ab[:, 0], true_ab[:, 1], dome)
    q = chart_to_xyz(pred[:, 0], pred[:, 1], dome)
    err = np.linalg.norm(p - q, axis=1)
    return [
        ErrorRecord(
            tuple(map(float, t)), tuple(map(float, r)), tuple(map(float, pp)),
            tuple(map(float, qq)), float(e), float(d), bool(c),
        )
        for t, r, pp, qq, e, d, c in zip(true_ab, pred, p, q, err, depths, clamped)
    ]


@dataclass(frozen=True)
class Evaluation:
    records: list[ErrorRecord]  # one per test location, at the scoring depth
    summary: SummaryStats
    per_depth: dict[float, SummaryStats]
    all_records: list[ErrorRecord]
    score_depth: float

    @property
    def clamped_count(self) -> int:
        return sum(r.clamped for r in self.all_records)


def _scoring_rows(dataset: Dataset, score_depth):
    contact = dataset.contact
    if not contact.any():
        raise EvaluationError("test dataset has no contact rows")
    depth = float(dataset.depth[contact].max()) if score_depth is None else float(score_depth)
    rows = np.flatnonzero(contact & (dataset.depth == depth))
    if len(rows) == 0:
        raise EvaluationError(f"test dataset has no rows at depth {depth} mm")
    return rows, depth


def evaluate(model: krr.FittedModel, test: Dataset, dome: DomeSpec | None = None,
             score_depth: float | None = None) -> Evaluation:
    """Score a model on every contact row of a test set.

    The headline summary uses one row per location at ``score_depth``
    (default: deepest depth present).  ``per_depth`` breaks all contact
    rows down by depth.
    """
    if test is None or len(test) == 0:
        raise EvaluationError("empty test set")
    dome = model.dome if dome is None else dome
    rows, depth = _scoring_rows(test, score_depth)
    contact_rows = np.flatnonzero(test.contact)
    pred = krr.predict(model, test.readings[contact_rows])
    all_records = make_records(test.ab[contact_rows], pred, test.depth[contact_rows], dome)
    by_row = dict(zip(contact_rows.tolist(), all_records))
    records = [by_row[i] for i in rows.tolist()]
    per_depth = {}
    for d in np.unique(test.depth[contact_rows]):
        errs = [r.error for r in all_records if r.depth == d]
        per_depth[float(d)] = summarize(errs)
    return Evaluation(records, summarize([r.error for r in records]), per_depth, all_records, depth)


@dataclass(frozen=True)
class BaselineResult:
    records: list[ErrorRecord]
    summary: SummaryStats
    excluded: int


def nearest_sensor_baseline(config: SensorConfig, test: Dataset, dome: DomeSpec = DomeSpec(),
                            score_depth: float | None = None) -> BaselineResult:
    """Taxel-resolution predictor: the dome point radially above the loudest sensor.

    Ties go to the lowest sensor index.  Rows whose readings are all zero
    carry no information and are excluded (and counted).
    """
    rows, _ = _scoring_rows(test, score_depth)
    readings = test.readings[rows]
    silent = np.all(readings == 0.0, axis=1)
    rows, readings = rows[~silent], readings[~silent]
    if len(rows) == 0:
        raise EvaluationError("every scoring row has all-zero readings")
    loudest = np.argmax(readings, axis=1)
    anchors = surface_projection(config.positions, dome)
    pred_ab = xyz_to_chart(anchors[loudest], dome)
    records = make_records(test.ab[rows], pred_ab, test.depth[rows], dome)
    return BaselineResult(records, summarize([r.error for r in records]), int(silent.sum()))


# ---------------------------------------------------------------------------
# comparison and exports


@dataclass(frozen=True)
class ComparisonRow:
    case: object
    provenance: str
    summary: SummaryStats
    reference: tuple[float, float, float] | None

    def to_json(self) -> dict:
        out = {"case": self.case, "provenance": self.provenance, **self.summary.to_json()}
        out["reference"] = (
            None if self.reference is None
            else {"median_mm": self.reference[0], "mean_mm": self.reference[1], "std_mm": self.reference[2]}
        )
        return out


def compare_cases(entries) -> list[ComparisonRow]:
    """Sort per-case summaries by median error.

    ``entries`` holds ``(case_id, SummaryStats)`` or
    ``(case_id, SummaryStats, provenance)`` tuples; provenance defaults to
    ``"surrogate"``.
    """
    entries = list(entries)
    if len(entries) < 2:
        raise EvaluationError("comparison needs at least two cases")
    rows, seen = [], set()
    for entry in entries:
        case, stats, *rest = entry
        provenance = rest[0] if rest else "surrogate"
        key = (case, provenance)
        if key in seen:
            raise EvaluationError(f"duplicate case id {case!r} ({provenance})")
        seen.add(key)
        reference = REFERENCE_TABLE.get((case, _REFERENCE_ROW.get(provenance)))
        rows.append(ComparisonRow(case, provenance, stats, reference))
    return sorted(rows, key=lambda r: (r.summary.median, str(r.case), r.provenance))


def comparison_csv(rows: list[ComparisonRow]) -> str:
    lines = [",".join(COMPARISON_COLUMNS)]
    for r in rows:
        reference = ["", "", ""] if r.reference is None else [fmt(v) for v in r.reference]
        lines.append(",".join([
            str(r.case), r.provenance, fmt(r.summary.median), fmt(r.summary.mean),
            fmt(r.summary.std_dev), str(r.summary.count), *reference,
        ]))
    return "\n".join(lines) + "\n"


def arrow_plot_csv(records: list[ErrorRecord]) -> str:
    if not records:
        raise EvaluationError("no records to export")
    lines = [",".join(ARROW_COLUMNS)]
    for r in records:
        lines.append(",".join(fmt(v) for v in (*r.true_ab, *r.predicted_ab, r.error)))
    return "\n".join(lines) + "\n"


def export_arrow_plot(records: list[ErrorRecord], path) -> None:
    atomic_write_text(path, arrow_plot_csv(records))


def sweep_csv(table) -> str:
    lines = [",".join(SWEEP_COLUMNS)]
    for row in np.asarray(table, dtype=float):
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def build_report(case, provenance: str, evaluation: Evaluation,
                 baseline: BaselineResult | None = None) -> dict:
    report = {
        "case": case,
        "provenance": provenance,
        "score_depth_mm": evaluation.score_depth,
        "per_location": [r.to_json() for r in evaluation.records],
        "summary": evaluation.summary.to_json(),
        "per_depth": {fmt(d): s.to_json() for d, s in sorted(evaluation.per_depth.items())},
        "baseline": None,
        "clamped_count": evaluation.clamped_count,
    }
    if baseline is not None:
        report["baseline"] = {"summary": baseline.summary.to_json(), "excluded_rows": baseline.excluded}
    return report
