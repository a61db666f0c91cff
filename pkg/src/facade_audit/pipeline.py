"""Per-property prompt chain and batch runner.

For one property the five feature prompts run concurrently, each on its own image group. The
rule base then turns age, type and heating observation into heating type and energy source, and
the energy and recommendation prompts run last with the labeled stage summary as context.
"""

import logging
import threading
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import UTC, datetime
from functools import partial
from pathlib import Path
from typing import TYPE_CHECKING, Any

from facade_audit import rulebase
from facade_audit.config import PipelineConfig
from facade_audit.dataset import (
    GroundTruthRecord,
    ImageGroup,
    PropertyAssessment,
    PropertyManifest,
    StageFailure,
    append_assessment,
    read_assessments,
    write_assessments,
)
from facade_audit.errors import ContextUnavailable, FacadeAuditError, JoinError, LlmError
from facade_audit.extract import (
    ParseDiagnostic,
    ParseError,
    parse_age_band,
    parse_building_type,
    parse_energy_estimate,
    parse_epc_rating,
    parse_heating_observation,
    parse_lighting,
    parse_window_type,
)
from facade_audit.llm_client import (
    CachingClient,
    ChatCompletionsClient,
    CompletionClient,
    FixtureClient,
)
from facade_audit.promptkit import (
    FEATURE_STAGES,
    SUMMARY_STAGES,
    PromptId,
    render,
    stage_summary,
)

if TYPE_CHECKING:
    from facade_audit.evalsuite import EvaluationReport

logger = logging.getLogger(__name__)

STAGE_GROUPS: dict[PromptId, ImageGroup] = {
    PromptId.P1: ImageGroup.BUILDING,
    PromptId.P2: ImageGroup.BUILDING,
    PromptId.P3: ImageGroup.HEATING,
    PromptId.P4: ImageGroup.WINDOWS,
    PromptId.P5: ImageGroup.LIGHTING,
    PromptId.P6: ImageGroup.BUILDING,
    PromptId.P7: ImageGroup.BUILDING,
    PromptId.X2: ImageGroup.BUILDING,
}

_PARSERS: dict[PromptId, Callable[[str], Any]] = {
    PromptId.P1: parse_age_band,
    PromptId.P2: parse_building_type,
    PromptId.P3: parse_heating_observation,
    PromptId.P4: parse_window_type,
    PromptId.P5: parse_lighting,
    PromptId.P6: parse_energy_estimate,
    PromptId.P7: str.strip,
    PromptId.X1: partial(parse_epc_rating, prompt_id=PromptId.X1),
    PromptId.X2: partial(parse_epc_rating, prompt_id=PromptId.X2),
}

# Assessment field holding each stage's parsed value.
_FIELDS: dict[PromptId, str] = {
    PromptId.P1: "age_band",
    PromptId.P2: "building_type",
    PromptId.P3: "heating_observation",
    PromptId.P4: "window_type",
    PromptId.P5: "lighting",
    PromptId.P6: "energy_estimate",
    PromptId.P7: "recommendation",
}


def build_client(config: PipelineConfig) -> CompletionClient:
    """Fixture playback in mock mode, the live endpoint otherwise; cached when cache_dir is set."""
    if config.mock:
        inner: CompletionClient = FixtureClient(config.fixtures_dir)
    else:
        inner = ChatCompletionsClient(config.llm)
    if config.cache_dir is None:
        return inner
    return CachingClient(inner, config.cache_dir)


@dataclass
class StageOutcome:
    """What one prompt produced: text and a parsed value, or a diagnostic, or a failure."""

    prompt_id: PromptId
    text: str | None = None
    value: Any = None
    diagnostic: ParseDiagnostic | None = None
    failure: StageFailure | None = None


class AuditPipeline:
    """Runs the prompt chain for properties against one completion client.

    A client built from the config is owned by the pipeline and closed with it; an injected
    client is left for the caller to close.
    """

    def __init__(self, config: PipelineConfig, client: CompletionClient | None = None):
        self.config = config
        self._owns_client = client is None
        self.client = client if client is not None else build_client(config)

    def close(self) -> None:
        if self._owns_client:
            self.client.close()

    def __enter__(self) -> "AuditPipeline":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def run_stage(
        self,
        manifest: PropertyManifest,
        prompt_id: PromptId,
        context: str | None = None,
    ) -> StageOutcome:
        """Render, send and parse one prompt. LLM errors and parse failures are returned."""
        group = STAGE_GROUPS.get(prompt_id)
        images = manifest.images_for(group) if group else []
        payload = render(prompt_id, images, context)

        logger.debug(f"{manifest.property_id}/{prompt_id}: sending {len(images)} image(s)")
        try:
            result = self.client.complete(payload, manifest.property_id)
        except LlmError as e:
            logger.warning(f"{manifest.property_id}/{prompt_id}: {type(e).__name__}: {e}")
            failure = StageFailure(prompt_id=prompt_id, kind=type(e).__name__, message=str(e))
            return StageOutcome(prompt_id, failure=failure)

        try:
            value = _PARSERS[prompt_id](result.text)
        except ParseError as e:
            logger.warning(f"{manifest.property_id}/{prompt_id}: {e}")
            return StageOutcome(prompt_id, text=result.text, diagnostic=e.diagnostic)
        logger.debug(f"{manifest.property_id}/{prompt_id}: parsed {value!r}")
        return StageOutcome(prompt_id, text=result.text, value=value)

    def _run_concurrently(
        self,
        manifest: PropertyManifest,
        prompt_ids: list[PromptId],
        context: str | None = None,
    ) -> list[StageOutcome]:
        if not prompt_ids:
            return []
        # In-flight requests are capped by the client, not by this pool.
        with ThreadPoolExecutor(max_workers=len(prompt_ids)) as pool:
            return list(pool.map(lambda p: self.run_stage(manifest, p, context), prompt_ids))

    @staticmethod
    def _record(assessment: PropertyAssessment, outcome: StageOutcome) -> None:
        pid = outcome.prompt_id
        assessment.stages_run.append(pid)
        if outcome.text is not None:
            assessment.raw_texts[pid] = outcome.text
        if outcome.diagnostic is not None:
            assessment.diagnostics.append(outcome.diagnostic)
        if outcome.failure is not None:
            assessment.failures.append(outcome.failure)
        if outcome.value is not None:
            setattr(assessment, _FIELDS[pid], outcome.value)

    def assess(self, manifest: PropertyManifest) -> PropertyAssessment:
        """Run every selected stage for one property. Stage failures are recorded, not raised."""
        stages = self.config.stages
        assessment = PropertyAssessment(
            property_id=manifest.property_id,
            model_name=self.client.model_name,
            started_at=datetime.now(UTC),
        )

        features = [p for p in FEATURE_STAGES if p in stages]
        for outcome in self._run_concurrently(manifest, features):
            self._record(assessment, outcome)

        band, btype, obs = (
            assessment.age_band,
            assessment.building_type,
            assessment.heating_observation,
        )
        if band is not None and btype is not None and obs is not None:
            assessment.heating_type, assessment.energy_source = rulebase.apply(band, btype, obs)

        summaries = [p for p in SUMMARY_STAGES if p in stages]
        if summaries:
            unparsed = [p for p in FEATURE_STAGES if getattr(assessment, _FIELDS[p]) is None]
            if unparsed:
                error = ContextUnavailable(f"needs parsed output from {', '.join(unparsed)}")
                logger.warning(f"{manifest.property_id}: skipping {', '.join(summaries)}: {error}")
                for pid in summaries:
                    assessment.failures.append(
                        StageFailure(prompt_id=pid, kind=type(error).__name__, message=str(error))
                    )
            else:
                context = stage_summary(assessment)
                for outcome in self._run_concurrently(manifest, summaries, context):
                    self._record(assessment, outcome)

        assessment.finished_at = datetime.now(UTC)
        return assessment


def assess_property(
    manifest: PropertyManifest,
    config: PipelineConfig,
    client: CompletionClient | None = None,
) -> PropertyAssessment:
    with AuditPipeline(config, client) as pipeline:
        return pipeline.assess(manifest)


@dataclass
class PropertyFailure:
    property_id: str
    message: str


@dataclass
class BatchResult:
    assessments: list[PropertyAssessment] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    failures: list[PropertyFailure] = field(default_factory=list)
    llm_calls: int = 0
    report: "EvaluationReport | None" = None

    @property
    def ok(self) -> bool:
        return not self.failures


def _failure_summary(assessment: PropertyAssessment) -> str:
    kinds = sorted({f.kind for f in assessment.failures})
    first = assessment.failures[0].message if assessment.failures else "no stage returned text"
    return f"every stage failed ({', '.join(kinds) or 'no stages'}): {first}"


def run_batch(
    manifests: list[PropertyManifest],
    config: PipelineConfig,
    output: Path,
    ground_truth: list[GroundTruthRecord] | None = None,
    resume: bool = False,
    client: CompletionClient | None = None,
    on_property: Callable[[str, str], None] | None = None,
) -> BatchResult:
    """Assess many properties, appending each finished record to ``output`` as it completes.

    With ``resume`` the properties already present in ``output`` are skipped; without it the
    file is started afresh. When the batch ends the file is rewritten in manifest order.
    ``on_property(property_id, status)`` is called as each property finishes.
    """
    with AuditPipeline(config, client) as pipeline:
        return _run_batch(pipeline, manifests, Path(output), ground_truth, resume, on_property)


def _run_batch(
    pipeline: AuditPipeline,
    manifests: list[PropertyManifest],
    output: Path,
    ground_truth: list[GroundTruthRecord] | None,
    resume: bool,
    on_property: Callable[[str, str], None] | None,
) -> BatchResult:
    existing = read_assessments(output) if resume and output.exists() else []
    if not resume:
        write_assessments(output, [])

    done = {a.property_id for a in existing}
    todo = [m for m in manifests if m.property_id not in done]
    result = BatchResult(skipped=[m.property_id for m in manifests if m.property_id in done])
    for pid in result.skipped:
        logger.debug(f"{pid}: already assessed, skipping")

    finished: dict[str, PropertyAssessment] = {}
    append_lock = threading.Lock()

    def notify(property_id: str, status: str) -> None:
        if on_property is not None:
            on_property(property_id, status)

    calls_before = pipeline.client.calls
    with ThreadPoolExecutor(max_workers=pipeline.config.parallel_properties) as pool:
        futures = {pool.submit(pipeline.assess, m): m.property_id for m in todo}
        for future in as_completed(futures):
            property_id = futures[future]
            try:
                assessment = future.result()
            except FacadeAuditError as e:
                logger.error(f"{property_id}: {e}")
                result.failures.append(PropertyFailure(property_id, str(e)))
                notify(property_id, "failed")
                continue
            if assessment.wholly_failed:
                message = _failure_summary(assessment)
                logger.error(f"{property_id}: {message}")
                result.failures.append(PropertyFailure(property_id, message))
                notify(property_id, "failed")
                continue
            with append_lock:
                append_assessment(output, assessment)
            finished[property_id] = assessment
            is_partial = bool(assessment.failures or assessment.diagnostics)
            notify(property_id, "partial" if is_partial else "ok")
    result.llm_calls = pipeline.client.calls - calls_before

    order = {m.property_id: i for i, m in enumerate(manifests)}
    result.failures.sort(key=lambda f: order[f.property_id])
    result.assessments = [finished[m.property_id] for m in todo if m.property_id in finished]

    existing_by_id = {a.property_id: a for a in existing}
    records = [
        finished.get(m.property_id) or existing_by_id.get(m.property_id) for m in manifests
    ]
    records = [r for r in records if r is not None]
    records += [a for a in existing if a.property_id not in order]
    write_assessments(output, records)

    if ground_truth is not None and records:
        from facade_audit.evalsuite import evaluate

        try:
            result.report = evaluate(records, ground_truth)
        except JoinError as e:
            logger.warning(f"No evaluation: {e}")

    logger.info(
        f"Batch done: {len(result.assessments)} assessed, {len(result.skipped)} skipped, "
        f"{len(result.failures)} failed, {result.llm_calls} LLM call(s)"
    )
    return result
