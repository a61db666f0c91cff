"""Parsers turning free-text LLM answers into typed values.

Option prompts ask for an explanation first and the selected option last, so every option
parser scans the whole answer for option numbers "(n)" and option labels and keeps the match
that ends last. A match wholly contained in a longer match ending at the same place loses to
it ("double glazed" inside "high efficiency double glazed").

A parser either returns a value or raises ParseError carrying a ParseDiagnostic, never both.
"""

import json
import re
from collections.abc import Sequence
from enum import StrEnum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from facade_audit.errors import FacadeAuditError
from facade_audit.models import (
    LIGHTING_OPTIONS,
    AgeBand,
    BuildingType,
    EnergyEstimate,
    EpcRating,
    HeatingObservation,
    WindowType,
)
from facade_audit.promptkit import PromptId

SNIPPET_CHARS = 200


class DiagnosticReason(StrEnum):
    NO_ANSWER_FOUND = "no_answer_found"
    AMBIGUOUS_ANSWER = "ambiguous_answer"
    MALFORMED_JSON = "malformed_json"
    MISSING_FIELD = "missing_field"
    OUT_OF_RANGE = "out_of_range"


class ParseDiagnostic(BaseModel):
    """Why an answer could not be parsed, with the tail of the offending text."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    prompt_id: PromptId
    reason: DiagnosticReason
    snippet: str = Field(max_length=SNIPPET_CHARS)
    detail: str = ""


class ParseError(FacadeAuditError):
    def __init__(self, diagnostic: ParseDiagnostic):
        self.diagnostic = diagnostic
        message = f"{diagnostic.prompt_id}: {diagnostic.reason}"
        if diagnostic.detail:
            message += f" ({diagnostic.detail})"
        super().__init__(message)


def _snippet(text: str) -> str:
    text = text.strip()
    if len(text) <= SNIPPET_CHARS:
        return text
    return "..." + text[-(SNIPPET_CHARS - 3) :]


def _fail(prompt_id: PromptId, reason: DiagnosticReason, text: str, detail: str = "") -> ParseError:
    return ParseError(
        ParseDiagnostic(prompt_id=prompt_id, reason=reason, snippet=_snippet(text), detail=detail)
    )


_DASHES = str.maketrans({c: "-" for c in "\u2010\u2011\u2012\u2013\u2014\u2212"})


def _normalize(text: str) -> str:
    # One-for-one character replacements only, so match offsets stay meaningful.
    return text.translate(_DASHES).replace("\u00b2", "2").replace("\u00a0", " ")


def _option_table(options: Sequence[tuple[Any, int, str]]) -> list[tuple[Any, re.Pattern]]:
    """Compile (value, option number, label regex) triples into one pattern per value."""
    return [
        (value, re.compile(rf"\({number}\)|{label}", re.IGNORECASE))
        for value, number, label in options
    ]


def _select_last(text: str, prompt_id: PromptId, table: list[tuple[Any, re.Pattern]]) -> Any:
    normalized = _normalize(text)
    best: tuple[tuple[int, int], Any] | None = None
    for value, pattern in table:
        for match in pattern.finditer(normalized):
            key = (match.end(), match.end() - match.start())
            if best is None or key > best[0]:
                best = (key, value)
    if best is None:
        raise _fail(prompt_id, DiagnosticReason.NO_ANSWER_FOUND, text)
    return best[1]


_AGE_TABLE = _option_table(
    [
        (AgeBand.BEFORE_1900, 1, r"before\s+1900"),
        (AgeBand.Y1900_1930, 2, r"1900\s*-\s*1930"),
        (AgeBand.Y1930_1950, 3, r"1930\s*-\s*1950"),
        (AgeBand.Y1950_1970, 4, r"1950\s*-\s*1970"),
        (AgeBand.Y1970_1990, 5, r"1970\s*-\s*1990"),
        (AgeBand.Y1990_2020, 6, r"1990\s*-\s*2020"),
        (AgeBand.Y2020_NOW, 7, r"2020\s*-\s*now"),
    ]
)

_BUILDING_TABLE = _option_table(
    [
        (BuildingType.SINGLE_FAMILY_DETACHED, 1, r"single[\s-]family\s+detached"),
        (BuildingType.SINGLE_FAMILY_ATTACHED, 2, r"single[\s-]family\s+attached"),
        (BuildingType.UNITS_2_TO_4, 3, r"2\s*-\s*4\s+units"),
        (BuildingType.UNITS_5_PLUS, 4, r"5\s+or\s+more\s+units"),
        (BuildingType.MOBILE_HOME, 5, r"mobile\s+home"),
    ]
)

_WINDOW_TABLE = _option_table(
    [
        (WindowType.SINGLE_GLAZED, 1, r"single[\s-]glaz(?:ed|ing)"),
        (WindowType.DOUBLE_GLAZED, 2, r"double[\s-]glaz(?:ed|ing)"),
        (
            WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE,
            3,
            r"high[\s-]efficiency\s+double\s+or\s+triple\s+glazed"
            r"|high[\s-]efficiency\s+double[\s-]glaz(?:ed|ing)"
            r"|triple[\s-]glaz(?:ed|ing)",
        ),
    ]
)

_LIGHTING_TABLE = _option_table(
    [(0, 1, r"no\s+low[\s-]energy\s+lighting")]
    + [
        (pct, number, rf"low[\s-]energy\s+in\s+{pct}\s*%")
        for number, pct in enumerate(LIGHTING_OPTIONS[1:], start=2)
    ]
)


def parse_age_band(text: str) -> AgeBand:
    return _select_last(text, PromptId.P1, _AGE_TABLE)


def parse_building_type(text: str) -> BuildingType:
    return _select_last(text, PromptId.P2, _BUILDING_TABLE)


def parse_window_type(text: str) -> WindowType:
    return _select_last(text, PromptId.P4, _WINDOW_TABLE)


def parse_lighting(text: str) -> int:
    """Percent of low-energy lighting, one of 0, 20, 40, 60, 80, 100."""
    return _select_last(text, PromptId.P5, _LIGHTING_TABLE)


# --- Heating observation (JSON answer) ---

_OBSERVATION_KEYS = {
    "air vent": "air_vent",
    "radiators": "radiators",
    "water filled": "water_filled",
    "electric panel heaters": "panel",
    "electric storage heaters": "storage",
}

_FENCE = re.compile(r"```[a-zA-Z]*")


def _json_objects(text: str) -> list[dict]:
    """Every top-level JSON object in ``text``, in order of appearance."""
    decoder = json.JSONDecoder()
    objects: list[dict] = []
    pos = 0
    while (start := text.find("{", pos)) != -1:
        try:
            obj, end = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            pos = start + 1
            continue
        if isinstance(obj, dict):
            objects.append(obj)
        pos = end
    return objects


def _normalize_key(key: str) -> str:
    return " ".join(re.split(r"[\s_-]+", key.strip().lower()))


def parse_heating_observation(text: str) -> HeatingObservation:
    """Read the five Y/N flags from the JSON object in the answer.

    Code fences and surrounding prose are ignored; when several objects appear, the last one
    is the answer (an echo of the answer template may precede it).
    """
    objects = _json_objects(_FENCE.sub("", _normalize(text)))
    if not objects:
        raise _fail(PromptId.P3, DiagnosticReason.MALFORMED_JSON, text)
    answer = objects[-1]

    flags: dict[str, bool] = {}
    for raw_key, raw_value in answer.items():
        field_name = _OBSERVATION_KEYS.get(_normalize_key(str(raw_key)))
        if field_name is None:
            continue
        if not isinstance(raw_value, str) or raw_value.strip().upper() not in ("Y", "N"):
            raise _fail(
                PromptId.P3,
                DiagnosticReason.OUT_OF_RANGE,
                text,
                detail=f"{raw_key}={raw_value!r}",
            )
        value = raw_value.strip().upper() == "Y"
        if flags.get(field_name, value) != value:
            raise _fail(
                PromptId.P3,
                DiagnosticReason.AMBIGUOUS_ANSWER,
                text,
                detail=f"conflicting values for {raw_key}",
            )
        flags[field_name] = value

    missing = [label for label, name in _OBSERVATION_KEYS.items() if name not in flags]
    if missing:
        raise _fail(PromptId.P3, DiagnosticReason.MISSING_FIELD, text, detail=", ".join(missing))
    return HeatingObservation(**flags)


# --- Energy estimate ---

_NUMBER = r"(?<![\w.])(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?"
_METRE = r"m(?:et(?:re|er)s?)?"
# kWh/m2, kWh per m2, kWh per metre squared, kWh per square metre (after _normalize).
_PER_AREA = rf"\s*(?:/|per)\s*(?:m2|{_METRE}\s*squared|sq(?:uare)?\.?\s*{_METRE})"
_ENERGY = re.compile(
    rf"(?:(?P<low>{_NUMBER})\s*(?:-|to|and)\s*)?(?P<value>{_NUMBER})\s*kwh"
    rf"(?P<area>{_PER_AREA})?",
    re.IGNORECASE,
)


def _to_float(number: str) -> float:
    return float(number.replace(",", ""))


def parse_energy_estimate(text: str) -> EnergyEstimate:
    """kWh/m² estimate: range of the last two unit-tagged numbers, or a single point.

    Figures given per unit area win. Bare "kWh" figures (per-dwelling totals, usually) are used
    only when the answer never states a per-area figure.
    """
    per_area: list[float] = []
    bare: list[float] = []
    for match in _ENERGY.finditer(_normalize(text)):
        target = per_area if match.group("area") else bare
        if match.group("low"):
            target.append(_to_float(match.group("low")))
        target.append(_to_float(match.group("value")))

    numbers = per_area or bare
    if not numbers:
        raise _fail(PromptId.P6, DiagnosticReason.NO_ANSWER_FOUND, text)
    if len(numbers) == 1:
        return EnergyEstimate.point(numbers[0])
    low, high = sorted(numbers[-2:])
    return EnergyEstimate(low_kwh_m2=low, high_kwh_m2=high)


# --- EPC rating ---

_EPC = re.compile(
    r"\b(?i:rating|band)\s*"
    r"(?:(?i:is|of|would\s+be|will\s+be|to\s+be|likely|probably|around|about|:|=|-)\s*)*"
    r"(?:(?i:an?)\s+)?[\"'‘“]?(?P<named>[A-G])\b"
    r"|\b(?i:rated)\s+(?:(?i:an?)\s+)?[\"'‘“]?(?P<rated>[A-G])\b"
    r"|\((?P<bracketed>[A-G])\)"
)


def parse_epc_rating(text: str, prompt_id: PromptId = PromptId.X2) -> EpcRating:
    """Last letter A-G presented as a rating ("rating: X", "band X", "rated X", "(X)")."""
    matches = list(_EPC.finditer(text))
    if not matches:
        raise _fail(prompt_id, DiagnosticReason.NO_ANSWER_FOUND, text)
    last = max(matches, key=lambda m: m.end())
    return EpcRating(last.group("named") or last.group("rated") or last.group("bracketed"))
