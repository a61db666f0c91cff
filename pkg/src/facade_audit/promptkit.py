"""Prompt registry: stored templates and payload rendering."""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from functools import cache
from importlib import resources
from typing import TYPE_CHECKING

from facade_audit.errors import (
    IncompleteStages,
    MissingContext,
    MissingImages,
    UnexpectedContext,
)

if TYPE_CHECKING:
    from facade_audit.dataset import PropertyAssessment

CONTEXT_PLACEHOLDER = "[P1 to P5 output]"


class PromptId(StrEnum):
    P1 = "P1"  # building age
    P2 = "P2"  # building type
    P3 = "P3"  # heating observations
    P4 = "P4"  # window type
    P5 = "P5"  # lighting
    P6 = "P6"  # energy consumption
    P7 = "P7"  # owner recommendation
    X1 = "X1"  # EPC rating from stage text
    X2 = "X2"  # EPC rating from building images


FEATURE_STAGES: tuple[PromptId, ...] = (
    PromptId.P1,
    PromptId.P2,
    PromptId.P3,
    PromptId.P4,
    PromptId.P5,
)
SUMMARY_STAGES: tuple[PromptId, ...] = (PromptId.P6, PromptId.P7)
PIPELINE_STAGES: tuple[PromptId, ...] = FEATURE_STAGES + SUMMARY_STAGES

# Prompts that take the stage summary in place of the placeholder.
CONTEXT_PROMPTS = frozenset({PromptId.P6, PromptId.P7, PromptId.X1})
# Authored for the EPC experiments; not transcriptions of the published prompt table.
AUTHORED_PROMPTS = frozenset({PromptId.X1, PromptId.X2})

STAGE_NAMES: dict[PromptId, str] = {
    PromptId.P1: "Building age",
    PromptId.P2: "Building type",
    PromptId.P3: "Heating systems",
    PromptId.P4: "Window type",
    PromptId.P5: "Lighting",
    PromptId.P6: "Energy consumption",
    PromptId.P7: "Recommendation",
    PromptId.X1: "EPC rating (from text)",
    PromptId.X2: "EPC rating (from images)",
}


@dataclass(frozen=True)
class PromptPayload:
    """A rendered prompt: text plus the ordered image references sent with it."""

    text: str
    images: tuple[str, ...]
    prompt_id: PromptId


def is_verbatim(prompt_id: PromptId) -> bool:
    return prompt_id not in AUTHORED_PROMPTS


@cache
def load_template(prompt_id: PromptId) -> str:
    """Read the stored template for ``prompt_id`` (UTF-8, one file per prompt)."""
    path = resources.files("facade_audit").joinpath("prompts", f"{prompt_id.value}.txt")
    return path.read_text(encoding="utf-8").rstrip("\n")


def render(
    prompt_id: PromptId,
    images: list[str] | tuple[str, ...],
    context: str | None = None,
) -> PromptPayload:
    """Render a prompt payload, substituting the stage summary where the prompt takes one."""
    template = load_template(prompt_id)

    if prompt_id in CONTEXT_PROMPTS:
        if context is None:
            raise MissingContext(f"{prompt_id} needs the stage summary as context")
        text = template.replace(CONTEXT_PLACEHOLDER, context)
    else:
        if context is not None:
            raise UnexpectedContext(f"{prompt_id} does not take context")
        text = template

    if not images and prompt_id != PromptId.X1:
        raise MissingImages(f"{prompt_id} needs at least one image")

    return PromptPayload(text=text, images=tuple(images), prompt_id=prompt_id)


def stage_summary(assessment: PropertyAssessment) -> str:
    """Labeled concatenation of the feature-stage answers plus the rule-base result.

    This is what replaces the placeholder in the energy, recommendation and EPC-from-text
    prompts, so its layout is fixed.
    """
    missing = [p for p in FEATURE_STAGES if assessment.raw_texts.get(p) is None]
    if missing:
        raise IncompleteStages(f"No text for stage(s): {', '.join(missing)}")

    blocks = [f"### {STAGE_NAMES[p]}\n{assessment.raw_texts[p]}" for p in FEATURE_STAGES]
    heating = assessment.heating_type or "unknown"
    source = assessment.energy_source or "unknown"
    blocks.append(f"### Derived heating\nMain heating: {heating}; Energy source: {source}")
    return "\n\n".join(blocks)
