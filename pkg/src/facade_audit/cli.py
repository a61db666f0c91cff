import logging
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import NoReturn

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from facade_audit import __version__
from facade_audit.config import API_KEY_ENV, LlmConfig, PipelineConfig
from facade_audit.errors import (
    AuthError,
    ConfigError,
    FacadeAuditError,
    IoError,
    JoinError,
    PromptError,
    SchemaError,
)
from facade_audit.security import RedactingFilter, SecretRedactor

console = Console()
err_console = Console(stderr=True)

DEFAULT_CACHE_DIR = Path(".facade-audit-cache")


class ExitCode(IntEnum):
    OK = 0
    PARTIAL = 1  # some properties or stages failed
    USAGE = 2  # bad flags, configuration or credentials
    IO = 3  # unreadable, malformed or unjoinable input


def _fail(message: object, code: ExitCode) -> NoReturn:
    err_console.print(f"[bold red]Error:[/] {escape(str(message))}", highlight=False)
    raise SystemExit(code)


def _exit_code_for(error: FacadeAuditError) -> ExitCode:
    if isinstance(error, (ConfigError, AuthError, PromptError)):
        return ExitCode.USAGE
    if isinstance(error, (SchemaError, IoError, JoinError)):
        return ExitCode.IO
    return ExitCode.PARTIAL


@contextmanager
def _handled() -> Iterator[None]:
    """Turn library errors into an error line and the matching exit code."""
    try:
        yield
    except FacadeAuditError as e:
        _fail(e, _exit_code_for(e))


def _setup_logging(verbose: bool, secrets: list[str]) -> None:
    handler = RichHandler(console=err_console, show_path=False)
    handler.addFilter(RedactingFilter(SecretRedactor(secrets)))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[handler],
        force=True,
    )


@dataclass(frozen=True)
class Settings:
    llm: LlmConfig
    cache_dir: Path | None

    def pipeline(
        self,
        mock: Path | None,
        parallel: int = 4,
        stages: frozenset | None = None,
    ) -> PipelineConfig:
        extra = {"stages": stages} if stages else {}
        return PipelineConfig(
            llm=self.llm,
            fixtures_dir=mock,
            cache_dir=self.cache_dir,
            parallel_properties=parallel,
            **extra,
        )


def _parse_stages(ctx, param, value: str | None):
    if value is None:
        return None
    from facade_audit.promptkit import PromptId

    stages = set()
    for part in value.split(","):
        name = part.strip().upper()
        if not name:
            continue
        try:
            stages.add(PromptId(name))
        except ValueError:
            raise click.BadParameter(f"unknown stage {part.strip()!r}") from None
    if not stages:
        raise click.BadParameter("no stages given")
    return frozenset(stages)


_manifest_option = click.option(
    "--manifest",
    "manifest_path",
    required=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Property manifest (JSON)",
)
_mock_option = click.option(
    "--mock",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Play back recorded responses from this directory instead of calling the LLM",
)
_parallel_option = click.option(
    "--parallel",
    "-p",
    type=click.IntRange(min=1),
    default=4,
    help="Properties processed concurrently",
)


@click.group()
@click.version_option(version=__version__, prog_name="facade-audit")
@click.option("--model", default="gpt-4o", help="Chat model name (default: gpt-4o)")
@click.option("--base-url", default="https://api.openai.com/v1", help="OpenAI-compatible API root")
@click.option(
    "--cache-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=DEFAULT_CACHE_DIR,
    help="Response cache directory",
)
@click.option("--no-cache", is_flag=True, help="Disable the response cache")
@click.option("--temperature", type=float, default=None, help="Pin the sampling temperature")
@click.option("--max-retries", type=click.IntRange(min=0), default=3, help="Retries per request")
@click.option("--max-inflight", type=click.IntRange(min=1), default=4, help="Concurrent requests")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr")
@click.pass_context
def cli(
    ctx: click.Context,
    model: str,
    base_url: str,
    cache_dir: Path,
    no_cache: bool,
    temperature: float | None,
    max_retries: int,
    max_inflight: int,
    verbose: bool,
):
    """Facade Audit - sustainability data from building photographs."""
    try:
        llm = LlmConfig.from_env(
            model_name=model,
            base_url=base_url,
            temperature=temperature,
            max_retries=max_retries,
            max_inflight=max_inflight,
        )
    except ConfigError as e:
        _fail(e, ExitCode.USAGE)
    _setup_logging(verbose, [llm.api_key] if llm.api_key else [])
    if SecretRedactor().contains_secret(base_url):
        err_console.print(
            "[yellow]Warning:[/] --base-url looks like it carries a credential. "
            f"Set {API_KEY_ENV} instead; the URL is masked in logs but sent as given.",
            highlight=False,
        )
    ctx.obj = Settings(llm=llm, cache_dir=None if no_cache else cache_dir)


# --- Assess ---


def _summary_table(assessment) -> Table:
    table = Table(title=f"Assessment: {assessment.property_id}")
    table.add_column("Feature", style="bold")
    table.add_column("Value")

    window = assessment.window_type
    energy = assessment.energy_estimate
    rows = {
        "Age band": assessment.age_band,
        "Building type": assessment.building_type,
        "Main heating": assessment.heating_type,
        "Energy source": assessment.energy_source,
        "Window type": f"{window.value} ({window.label})" if window is not None else None,
        "Lighting": (
            f"{assessment.lighting}% low energy" if assessment.lighting is not None else None
        ),
        "Energy": (
            f"{energy.point_kwh_m2:g} kWh/m² ({energy.low_kwh_m2:g}-{energy.high_kwh_m2:g})"
            if energy is not None
            else None
        ),
    }
    for name, value in rows.items():
        table.add_row(name, str(value) if value is not None else "[dim]n/a[/]")
    return table


def _print_problems(assessment) -> None:
    for d in assessment.diagnostics:
        err_console.print(f"[yellow]{d.prompt_id}[/] could not be parsed: {d.reason}")
    for f in assessment.failures:
        err_console.print(
            f"[red]{f.prompt_id}[/] failed ({f.kind}): {escape(f.message)}", highlight=False
        )


@cli.command()
@_manifest_option
@click.option("--property", "property_id", required=True, help="Property id from the manifest")
@_mock_option
@click.option(
    "--out", type=click.Path(dir_okay=False, path_type=Path), help="Write the record here"
)
@click.option("--stages", callback=_parse_stages, help="Comma-separated stages, e.g. P1,P2")
@click.pass_obj
def assess(
    settings: Settings,
    manifest_path: Path,
    property_id: str,
    mock: Path | None,
    out: Path | None,
    stages: frozenset | None,
):
    """Assess one property and print its summary and recommendation."""
    from facade_audit.dataset import load_manifest, write_assessments
    from facade_audit.pipeline import assess_property

    with _handled():
        manifests = {m.property_id: m for m in load_manifest(manifest_path)}
        if property_id not in manifests:
            _fail(f"No property {property_id!r} in {manifest_path}", ExitCode.USAGE)
        config = settings.pipeline(mock, stages=stages)
        assessment = assess_property(manifests[property_id], config)
        if out is not None:
            write_assessments(out, [assessment])

    console.print(_summary_table(assessment))
    if assessment.recommendation:
        console.print(
            Panel(escape(assessment.recommendation), title="Recommendation", title_align="left")
        )
    _print_problems(assessment)
    if assessment.wholly_failed or assessment.failures or assessment.diagnostics:
        raise SystemExit(ExitCode.PARTIAL)


# --- Batch ---


@cli.command()
@_manifest_option
@_mock_option
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--resume", is_flag=True, help="Skip properties already in --out")
@_parallel_option
@click.option("--stages", callback=_parse_stages, help="Comma-separated stages, e.g. P1,P2")
@click.option(
    "--truth",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Ground truth CSV; prints an evaluation when the batch ends",
)
@click.pass_obj
def batch(
    settings: Settings,
    manifest_path: Path,
    mock: Path | None,
    out: Path,
    resume: bool,
    parallel: int,
    stages: frozenset | None,
    truth: Path | None,
):
    """Assess every property in a manifest, one JSON line per property."""
    from facade_audit.dataset import load_ground_truth, load_manifest
    from facade_audit.evalsuite import report_table
    from facade_audit.pipeline import run_batch

    styles = {"ok": "green", "partial": "yellow", "failed": "red"}

    def progress(property_id: str, status: str) -> None:
        err_console.print(f"[{styles[status]}]{status:>7}[/] {property_id}", highlight=False)

    with _handled():
        manifests = load_manifest(manifest_path)
        ground_truth = load_ground_truth(truth) if truth else None
        config = settings.pipeline(mock, parallel=parallel, stages=stages)
        result = run_batch(
            manifests, config, out, ground_truth=ground_truth, resume=resume, on_property=progress
        )

    console.print(
        f"{len(result.assessments)} assessed, {len(result.skipped)} skipped (cached), "
        f"{len(result.failures)} failed, {result.llm_calls} LLM call(s)",
        highlight=False,
    )
    for failure in result.failures:
        err_console.print(
            f"[red]{failure.property_id}:[/] {escape(failure.message)}", highlight=False
        )
    if result.report is not None:
        console.print(report_table(result.report))
    if not result.ok:
        raise SystemExit(ExitCode.PARTIAL)


# --- Evaluate ---


@cli.command()
@click.option("--predictions", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option("--truth", required=True, type=click.Path(dir_okay=False, path_type=Path))
@click.option(
    "--age-metric", type=click.Choice(["band", "midpoint"]), default="band", show_default=True
)
@click.option(
    "--format", "fmt", type=click.Choice(["text", "csv"]), default="text", show_default=True
)
@click.option("--reference", is_flag=True, help="Add the published figures as a second row")
@click.option("--label", default="AI", help="Predictor label in the report")
def evaluate(
    predictions: Path, truth: Path, age_metric: str, fmt: str, reference: bool, label: str
):
    """Score assessments against ground truth."""
    from facade_audit import evalsuite
    from facade_audit.dataset import load_ground_truth, read_assessments

    with _handled():
        report = evalsuite.evaluate(
            read_assessments(predictions),
            load_ground_truth(truth),
            evalsuite.EvaluationOptions(age_metric=evalsuite.AgeMetric(age_metric)),
        )

    if fmt == "csv":
        frame = evalsuite.report_frame(report, label=label, reference=reference)
        click.echo(frame.to_csv(index=False), nl=False)
    else:
        console.print(evalsuite.report_table(report, label=label, reference=reference))
    if report.unmatched_predictions:
        err_console.print(f"[yellow]No truth for:[/] {', '.join(report.unmatched_predictions)}")
    if report.unmatched_truth:
        err_console.print(f"[yellow]No prediction for:[/] {', '.join(report.unmatched_truth)}")


# --- Prompts ---

_PROMPT_IDS = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "X1", "X2"]


@cli.group()
def prompts():
    """Inspect the stored prompt templates."""
    pass


@prompts.command()
@click.argument("prompt_id", type=click.Choice(_PROMPT_IDS, case_sensitive=False))
def show(prompt_id: str):
    """Print a template exactly as stored."""
    from facade_audit.promptkit import PromptId, is_verbatim, load_template

    pid = PromptId(prompt_id.upper())
    if not is_verbatim(pid):
        click.echo(f"# NON-VERBATIM: {pid} is an authored prompt, not a published transcription")
    click.echo(load_template(pid))


@prompts.command("list")
def list_prompts():
    """List every prompt with its status."""
    from facade_audit.pipeline import STAGE_GROUPS
    from facade_audit.promptkit import CONTEXT_PROMPTS, STAGE_NAMES, PromptId, is_verbatim

    table = Table(title="Prompts")
    table.add_column("Id", style="bold")
    table.add_column("Stage")
    table.add_column("Images")
    table.add_column("Context")
    table.add_column("Source")
    for pid in PromptId:
        group = STAGE_GROUPS.get(pid)
        table.add_row(
            pid.value,
            STAGE_NAMES[pid],
            group.value if group else "-",
            "stage summary" if pid in CONTEXT_PROMPTS else "-",
            "verbatim" if is_verbatim(pid) else "[yellow]authored[/]",
        )
    console.print(table)


# --- EPC experiment ---


@cli.command("epc-experiment")
@click.option("--mode", required=True, type=click.Choice(["text", "images"]))
@_manifest_option
@click.option("--truth", required=True, type=click.Path(dir_okay=False, path_type=Path))
@_mock_option
@_parallel_option
@click.pass_obj
def epc_experiment(
    settings: Settings,
    mode: str,
    manifest_path: Path,
    truth: Path,
    mock: Path | None,
    parallel: int,
):
    """Ask for the EPC rating directly and report the letter RMSE."""
    from facade_audit.dataset import load_ground_truth, load_manifest
    from facade_audit.evalsuite import REFERENCE_EPC_RMSE, EpcMode, epc_direct_experiment

    with _handled():
        manifests = load_manifest(manifest_path)
        ground_truth = load_ground_truth(truth)
        config = settings.pipeline(mock, parallel=parallel)
        result = epc_direct_experiment(EpcMode(mode), manifests, ground_truth, config)

    table = Table(title=f"EPC rating from {mode}")
    table.add_column("Property", style="bold")
    table.add_column("Predicted")
    table.add_column("Truth")
    table.add_column("Note")
    for p in result.predictions:
        table.add_row(p.property_id, p.predicted or "-", p.truth or "-", p.problem or "")
    console.print(table)

    rmse = "n/a" if result.rmse.value is None else f"{result.rmse.value:.3f}"
    console.print(
        f"EPC RMSE ({mode}): {rmse} over {result.rmse.n} properties "
        f"[dim](published: {REFERENCE_EPC_RMSE[mode]})[/]",
        highlight=False,
    )
    if any(p.predicted is None for p in result.predictions):
        raise SystemExit(ExitCode.PARTIAL)
