"""Accuracy metrics over a prediction/ground-truth join, and the direct EPC-rating experiment.

Categorical metrics keep a property in the denominator whenever the stage that feeds them ran,
so a missing or ``unknown`` prediction counts as wrong. Numeric metrics drop absent
predictions instead. Every metric reports its denominator and its coverage (the share of
joined properties that had a usable prediction).
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import StrEnum

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict
from rich.table import Table

from facade_audit.config import PipelineConfig
from facade_audit.dataset import GroundTruthRecord, PropertyAssessment, PropertyManifest
from facade_audit.errors import EmptyInput, IncompleteStages, JoinError
from facade_audit.llm_client import CompletionClient
from facade_audit.models import (
    AgeBand,
    EnergyEstimate,
    EpcRating,
    GroundTruthAge,
    WindowType,
    epc_numeric,
    representative_year,
)
from facade_audit.pipeline import AuditPipeline
from facade_audit.promptkit import FEATURE_STAGES, PromptId, stage_summary

logger = logging.getLogger(__name__)


class AgeMetric(StrEnum):
    BAND = "band"  # distance from the truth to the predicted interval
    MIDPOINT = "midpoint"  # distance between representative years


# Published figures for the AI predictor, kept for side-by-side comparison only.
REFERENCE_RESULTS: dict[str, float] = {
    "age_avg_error_years": 4.47,
    "building_type_pct": 98.0,
    "heating_type_pct": 76.6,
    "energy_source_pct": 74.4,
    "window_perfect_pct": 53.0,
    "window_approx_pct": 42.6,
    "lighting_rmse_pct": 27.82,
    "energy_mean_abs_diff": 42.66,
}
REFERENCE_EPC_RMSE: dict[str, float] = {"text": 1.088, "images": 0.858}

_APPROX_WINDOWS = frozenset(
    {WindowType.DOUBLE_GLAZED, WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE}
)


def _require(pairs: Sequence, metric: str) -> None:
    if not pairs:
        raise EmptyInput(f"{metric}: no pairs to score")


def age_error_years(
    pred: AgeBand, truth: GroundTruthAge, mode: AgeMetric = AgeMetric.BAND
) -> float:
    """Years between a predicted band and the recorded age.

    Band mode: 0 when an exact truth year lies in the band, otherwise the distance to the
    nearest year inside it; for a banded truth, the gap between the two intervals' facing
    edges. Midpoint mode compares representative years.
    """
    if mode == AgeMetric.MIDPOINT:
        return float(abs(representative_year(pred) - truth.as_year))

    start, end = pred.bounds
    if truth.exact_year is not None:
        year = truth.exact_year
        if start is not None and year < start:
            return float(start - year)
        if end is not None and year >= end:
            return float(year - (end - 1))
        return 0.0

    band = truth.band
    if band == pred:
        return 0.0
    truth_start, truth_end = band.bounds
    if pred > band:
        return float(start - truth_end)
    return float(truth_start - end)


def categorical_accuracy(pairs: Sequence[tuple[object | None, object]]) -> float:
    """Percent of pairs whose prediction equals the truth; None never matches."""
    _require(pairs, "categorical_accuracy")
    hits = np.array([p is not None and p == t for p, t in pairs], dtype=bool)
    return float(hits.mean() * 100)


def window_accuracy(pairs: Sequence[tuple[WindowType | None, WindowType]]) -> tuple[float, float]:
    """(perfect %, approximately-right %); approximate means double vs high-efficiency."""
    _require(pairs, "window_accuracy")
    perfect = np.array([p is not None and p == t for p, t in pairs], dtype=bool)
    approx = np.array([p != t and {p, t} == _APPROX_WINDOWS for p, t in pairs], dtype=bool)
    return float(perfect.mean() * 100), float(approx.mean() * 100)


def _rmse(predicted: Sequence[float], truth: Sequence[float]) -> float:
    diff = np.asarray(predicted, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean(diff**2)))


def lighting_rmse(pairs: Sequence[tuple[int, int]]) -> float:
    """RMSE on the 0-100 percent scale."""
    _require(pairs, "lighting_rmse")
    predicted, truth = zip(*pairs)
    return _rmse(predicted, truth)


def energy_mean_abs_diff(pairs: Sequence[tuple[EnergyEstimate, float]]) -> float:
    """Mean |point estimate - truth| in kWh/m²."""
    _require(pairs, "energy_mean_abs_diff")
    predicted = np.array([e.point_kwh_m2 for e, _ in pairs], dtype=float)
    truth = np.array([t for _, t in pairs], dtype=float)
    return float(np.mean(np.abs(predicted - truth)))


def epc_rmse(pairs: Sequence[tuple[EpcRating, EpcRating]]) -> float:
    """RMSE in letters (A=1 ... G=7)."""
    _require(pairs, "epc_rmse")
    return _rmse([epc_numeric(p) for p, _ in pairs], [epc_numeric(t) for _, t in pairs])


class MetricValue(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    value: float | None
    n: int
    coverage: float


class EvaluationReport(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    age_metric: AgeMetric
    n_properties: int
    age_avg_error_years: MetricValue
    building_type_pct: MetricValue
    heating_type_pct: MetricValue
    energy_source_pct: MetricValue
    window_perfect_pct: MetricValue
    window_approx_pct: MetricValue
    lighting_rmse_pct: MetricValue
    energy_mean_abs_diff: MetricValue
    epc_rmse: MetricValue | None = None
    unmatched_predictions: list[str] = []
    unmatched_truth: list[str] = []


# Metric fields in table order, with their column headings.
METRIC_COLUMNS: dict[str, str] = {
    "age_avg_error_years": "Age Av error (years)",
    "building_type_pct": "Building Type (% correct)",
    "heating_type_pct": "Heating Type (% correct)",
    "energy_source_pct": "Energy Source (% correct)",
    "window_perfect_pct": "Windows perfect (%)",
    "window_approx_pct": "Windows approx (%)",
    "lighting_rmse_pct": "Lighting RMSE (%)",
    "energy_mean_abs_diff": "Energy consump Av diff (kWh/m²)",
}


@dataclass(frozen=True)
class EvaluationOptions:
    age_metric: AgeMetric = AgeMetric.BAND
    # Ratings from the direct EPC experiment, by property id.
    epc_predictions: dict[str, EpcRating] = field(default_factory=dict)


def _metric(
    pairs: list,
    n_joined: int,
    score: Callable[[list], float],
    usable: int | None = None,
) -> MetricValue:
    """Score ``pairs``; coverage counts usable predictions (all pairs unless given)."""
    usable = len(pairs) if usable is None else usable
    value = score(pairs) if pairs else None
    return MetricValue(value=value, n=len(pairs), coverage=usable / n_joined)


def _ran(assessment: PropertyAssessment, stage: PromptId) -> bool:
    return stage in assessment.stages_run


def evaluate(
    assessments: Sequence[PropertyAssessment],
    ground_truth: Sequence[GroundTruthRecord],
    options: EvaluationOptions | None = None,
) -> EvaluationReport:
    """Join on property id and compute every metric.

    Ids present on one side only are listed in the report; an empty join is a JoinError.
    """
    options = options or EvaluationOptions()
    truth_by_id = {t.property_id: t for t in ground_truth}
    predicted_by_id = {a.property_id: a for a in assessments}
    only_predictions = sorted(set(predicted_by_id) - set(truth_by_id))
    only_truth = sorted(set(truth_by_id) - set(predicted_by_id))
    joined = [(a, truth_by_id[pid]) for pid, a in predicted_by_id.items() if pid in truth_by_id]
    if not joined:
        raise JoinError(
            "Predictions and ground truth share no property ids", only_predictions, only_truth
        )
    if only_predictions or only_truth:
        logger.warning(
            f"Unmatched ids: {len(only_predictions)} prediction(s), {len(only_truth)} truth row(s)"
        )
    n = len(joined)

    age_pairs = [(a.age_band, t.age) for a, t in joined if a.age_band is not None]
    building = [(a.building_type, t.building_type) for a, t in joined if _ran(a, PromptId.P2)]
    heating = [(a.heating_type, t.heating_type) for a, t in joined if _ran(a, PromptId.P3)]
    source = [(a.energy_source, t.energy_source) for a, t in joined if _ran(a, PromptId.P3)]
    windows = [(a.window_type, t.window_type) for a, t in joined if _ran(a, PromptId.P4)]
    lighting = [(a.lighting, t.lighting) for a, t in joined if a.lighting is not None]
    energy = [
        (a.energy_estimate, t.energy_kwh_m2) for a, t in joined if a.energy_estimate is not None
    ]

    def usable(pairs: list) -> int:
        # "unknown" heating type and energy source are predictions, but not usable ones.
        return sum(p is not None and p != "unknown" for p, _ in pairs)

    window_scores = window_accuracy(windows) if windows else (None, None)

    epc = None
    if options.epc_predictions:
        epc_pairs = [
            (options.epc_predictions[a.property_id], t.epc)
            for a, t in joined
            if a.property_id in options.epc_predictions
        ]
        epc = _metric(epc_pairs, n, epc_rmse)

    return EvaluationReport(
        age_metric=options.age_metric,
        n_properties=n,
        age_avg_error_years=_metric(
            age_pairs,
            n,
            lambda pairs: float(
                np.mean([age_error_years(p, t, options.age_metric) for p, t in pairs])
            ),
        ),
        building_type_pct=_metric(building, n, categorical_accuracy, usable(building)),
        heating_type_pct=_metric(heating, n, categorical_accuracy, usable(heating)),
        energy_source_pct=_metric(source, n, categorical_accuracy, usable(source)),
        window_perfect_pct=MetricValue(
            value=window_scores[0], n=len(windows), coverage=usable(windows) / n
        ),
        window_approx_pct=MetricValue(
            value=window_scores[1], n=len(windows), coverage=usable(windows) / n
        ),
        lighting_rmse_pct=_metric(lighting, n, lighting_rmse),
        energy_mean_abs_diff=_metric(energy, n, energy_mean_abs_diff),
        epc_rmse=epc,
        unmatched_predictions=only_predictions,
        unmatched_truth=only_truth,
    )


# --- Rendering ---


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


def report_table(
    report: EvaluationReport, label: str = "AI", reference: bool = False
) -> Table:
    """Results table: one row per predictor plus a row of denominators and coverage."""
    show_epc = report.epc_rmse is not None
    table = Table(title=f"Evaluation over {report.n_properties} properties")
    table.add_column("Predictor", style="bold")
    for heading in METRIC_COLUMNS.values():
        table.add_column(heading, justify="right")
    if show_epc:
        table.add_column("EPC RMSE (letters)", justify="right")

    metrics = [getattr(report, name) for name in METRIC_COLUMNS]
    if show_epc:
        metrics.append(report.epc_rmse)
    table.add_row(label, *(_fmt(m.value) for m in metrics))
    table.add_row(
        "[dim]n (coverage)[/]", *(f"[dim]{m.n} ({m.coverage:.0%})[/]" for m in metrics)
    )
    if reference:
        row = [_fmt(REFERENCE_RESULTS[name]) for name in METRIC_COLUMNS]
        if show_epc:
            row.append("n/a")
        table.add_row("[italic]Published AI[/]", *row)
    return table


def report_frame(
    report: EvaluationReport, label: str = "AI", reference: bool = False
) -> pd.DataFrame:
    """One row per predictor; value, n and coverage columns for each metric."""
    names = list(METRIC_COLUMNS) + ["epc_rmse"]
    row: dict[str, object] = {"predictor": label, "age_metric": report.age_metric.value}
    for name in names:
        metric = getattr(report, name)
        row[name] = metric.value if metric else None
    for name in names:
        metric = getattr(report, name)
        row[f"n_{name}"] = metric.n if metric else 0
        row[f"coverage_{name}"] = metric.coverage if metric else 0.0
    rows = [row]
    if reference:
        rows.append({"predictor": "Published AI", **REFERENCE_RESULTS})
    return pd.DataFrame(rows, columns=list(row))


# --- Direct EPC experiment ---


class EpcMode(StrEnum):
    TEXT = "text"  # rating from the labeled stage summary, no images
    IMAGES = "images"  # rating from the building images alone


@dataclass(frozen=True)
class EpcPrediction:
    property_id: str
    predicted: EpcRating | None
    truth: EpcRating | None
    problem: str | None = None


@dataclass
class EpcExperimentResult:
    mode: EpcMode
    predictions: list[EpcPrediction]
    rmse: MetricValue


def _predict_epc(
    features: AuditPipeline, manifest: PropertyManifest, mode: EpcMode
) -> tuple[EpcRating | None, str | None]:
    if mode == EpcMode.TEXT:
        assessment = features.assess(manifest)
        try:
            context = stage_summary(assessment)
        except IncompleteStages as e:
            return None, str(e)
        outcome = features.run_stage(manifest, PromptId.X1, context)
    else:
        outcome = features.run_stage(manifest, PromptId.X2)

    if outcome.value is not None:
        return outcome.value, None
    if outcome.failure is not None:
        return None, f"{outcome.failure.kind}: {outcome.failure.message}"
    return None, f"{outcome.diagnostic.reason}"


def epc_direct_experiment(
    mode: EpcMode,
    manifests: Sequence[PropertyManifest],
    ground_truth: Sequence[GroundTruthRecord],
    config: PipelineConfig,
    client: CompletionClient | None = None,
) -> EpcExperimentResult:
    """Ask for the EPC letter directly and score it against the recorded ratings."""
    truth_by_id = {t.property_id: t.epc for t in ground_truth}
    feature_config = replace(config, stages=frozenset(FEATURE_STAGES))

    with (
        AuditPipeline(feature_config, client) as features,
        ThreadPoolExecutor(max_workers=config.parallel_properties) as pool,
    ):
        outcomes = list(pool.map(lambda m: _predict_epc(features, m, mode), manifests))

    predictions = [
        EpcPrediction(m.property_id, rating, truth_by_id.get(m.property_id), problem)
        for m, (rating, problem) in zip(manifests, outcomes)
    ]
    pairs = [
        (p.predicted, p.truth)
        for p in predictions
        if p.predicted is not None and p.truth is not None
    ]
    with_truth = sum(p.truth is not None for p in predictions)
    rmse = MetricValue(
        value=epc_rmse(pairs) if pairs else None,
        n=len(pairs),
        coverage=len(pairs) / with_truth if with_truth else 0.0,
    )
    logger.info(f"EPC ({mode}) RMSE over {rmse.n} properties: {_fmt(rmse.value)}")
    return EpcExperimentResult(mode=mode, predictions=predictions, rmse=rmse)
