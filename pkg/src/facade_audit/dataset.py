"""Property manifests, ground-truth records and persisted assessments."""

import json
import os
import re
import tempfile
from collections.abc import Iterable
from datetime import datetime
from enum import StrEnum
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from facade_audit.errors import IoError, SchemaError, UnknownHeatingLabel
from facade_audit.extract import ParseDiagnostic
from facade_audit.models import (
    AgeBand,
    BuildingType,
    EnergyEstimate,
    EnergySource,
    EpcRating,
    GroundTruthAge,
    HeatingObservation,
    HeatingType,
    WindowType,
)
from facade_audit.promptkit import PromptId

MIN_GROUP_IMAGES = 1
MAX_GROUP_IMAGES = 5

# Property ids double as directory names under the fixture and cache roots.
PROPERTY_ID_PATTERN = r"^[A-Za-z0-9][A-Za-z0-9._-]*$"


class ImageGroup(StrEnum):
    BUILDING = "building"  # [A]
    HEATING = "heating"  # [B]
    WINDOWS = "windows"  # [C]
    LIGHTING = "lighting"  # [D]


def _split_indices(value: object) -> object:
    """Split "0;2;3;5" into [0, 2, 3, 5]; lists pass through untouched."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(";")]
        try:
            return [int(p) for p in parts if p]
        except ValueError:
            raise ValueError(f"not a ';'-separated index list: {value!r}") from None
    return value


def _schema_error(where: str, error: ValidationError) -> SchemaError:
    problems = []
    for err in error.errors():
        field = ".".join(str(p) for p in err["loc"]) or "<record>"
        if err["type"] == "extra_forbidden":
            problems.append(f"unknown field '{field}'")
        else:
            problems.append(f"{field}: {err['msg']}")
    return SchemaError(f"{where}: {'; '.join(problems)}")


# --- Manifests ---


class PropertyManifest(BaseModel):
    """One property's images and their assignment to the four evidence groups.

    ``address`` and ``epc_url`` are carried through as opaque metadata.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    property_id: str = Field(pattern=PROPERTY_ID_PATTERN)
    images: list[str] = Field(min_length=1)
    groups: dict[ImageGroup, list[int]]
    address: str | None = None
    epc_url: str | None = None

    @field_validator("groups", mode="before")
    @classmethod
    def _parse_group_cells(cls, value: object) -> object:
        if isinstance(value, dict):
            return {k: _split_indices(v) for k, v in value.items()}
        return value

    @model_validator(mode="after")
    def _check_groups(self) -> "PropertyManifest":
        missing = [g.value for g in ImageGroup if g not in self.groups]
        if missing:
            raise ValueError(f"missing image group(s): {', '.join(missing)}")
        for group, indices in self.groups.items():
            if not MIN_GROUP_IMAGES <= len(indices) <= MAX_GROUP_IMAGES:
                raise ValueError(
                    f"group {group.value} has {len(indices)} images, "
                    f"expected {MIN_GROUP_IMAGES} to {MAX_GROUP_IMAGES}"
                )
            bad = [i for i in indices if not 0 <= i < len(self.images)]
            if bad:
                raise ValueError(
                    f"group {group.value} index {bad[0]} out of range for {len(self.images)} images"
                )
        return self

    def images_for(self, group: ImageGroup) -> list[str]:
        return [self.images[i] for i in self.groups[group]]


def _read_text(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e.strerror or e}") from e


def load_manifest(path: Path) -> list[PropertyManifest]:
    """Load ``{"properties": [...]}`` (or a bare list) in file order."""
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON ({e})") from e

    if isinstance(data, dict):
        unknown = sorted(set(data) - {"properties"})
        if unknown:
            raise SchemaError(f"{path}: unknown field '{unknown[0]}'")
        data = data.get("properties")
    if not isinstance(data, list):
        raise SchemaError(f"{path}: expected a list of properties")

    manifests = []
    seen: set[str] = set()
    for i, entry in enumerate(data):
        try:
            manifest = PropertyManifest.model_validate(entry)
        except ValidationError as e:
            raise _schema_error(f"{path}: property #{i}", e) from e
        if manifest.property_id in seen:
            raise SchemaError(f"{path}: duplicate property id {manifest.property_id!r}")
        seen.add(manifest.property_id)
        manifests.append(manifest)
    return manifests


# --- Ground truth ---

GROUND_TRUTH_COLUMNS = [
    "id",
    "building_images",
    "heating_images",
    "window_images",
    "lighting_images",
    "building_age",
    "building_type",
    "main_heating",
    "window_type",
    "lighting",
    "energy_kwh_m2",
    "epc_rating",
]

_GROUP_COLUMNS = {
    ImageGroup.BUILDING: "building_images",
    ImageGroup.HEATING: "heating_images",
    ImageGroup.WINDOWS: "window_images",
    ImageGroup.LIGHTING: "lighting_images",
}

BUILDING_TYPE_SYNONYMS: dict[str, BuildingType] = {
    **{t.value.lower(): t for t in BuildingType},
    "single-family detached": BuildingType.SINGLE_FAMILY_DETACHED,
    "detached": BuildingType.SINGLE_FAMILY_DETACHED,
    "single-family attached": BuildingType.SINGLE_FAMILY_ATTACHED,
    "attached": BuildingType.SINGLE_FAMILY_ATTACHED,
    "2-4 units": BuildingType.UNITS_2_TO_4,
    ">5 units": BuildingType.UNITS_5_PLUS,
    "5+ units": BuildingType.UNITS_5_PLUS,
    "5 or more units": BuildingType.UNITS_5_PLUS,
    "mobile home": BuildingType.MOBILE_HOME,
}

HEATING_SYNONYMS: dict[str, tuple[HeatingType, EnergySource]] = {
    "community scheme with underfloor heating": (HeatingType.UNDERFLOOR, EnergySource.COMMUNITY),
    "community scheme with water radiators": (HeatingType.WATER_RADS, EnergySource.COMMUNITY),
    "community scheme with radiators": (HeatingType.WATER_RADS, EnergySource.COMMUNITY),
    "community scheme with warm air": (HeatingType.WARM_AIR, EnergySource.COMMUNITY),
    "gas boiler water radiators": (HeatingType.WATER_RADS, EnergySource.GAS),
    "gas boiler with water radiators": (HeatingType.WATER_RADS, EnergySource.GAS),
    "gas boiler radiators": (HeatingType.WATER_RADS, EnergySource.GAS),
    "gas warm air": (HeatingType.WARM_AIR, EnergySource.GAS),
    "electric panel heaters": (HeatingType.ELECTRIC_PANELS, EnergySource.ELECTRIC),
    "electric storage heaters": (HeatingType.ELECTRIC_STORAGE, EnergySource.ELECTRIC),
    "electric underfloor heating": (HeatingType.UNDERFLOOR, EnergySource.ELECTRIC),
    "electric warm air": (HeatingType.WARM_AIR, EnergySource.ELECTRIC),
}

WINDOW_SYNONYMS: dict[str, WindowType] = {
    **{w.label: w for w in WindowType},
    **{str(w.value): w for w in WindowType},
    "single glazing": WindowType.SINGLE_GLAZED,
    "double glazing": WindowType.DOUBLE_GLAZED,
    "high efficiency double glazed": WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE,
    "high efficiency double glazing": WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE,
    "triple glazed": WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE,
    "triple glazing": WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE,
}

_LIGHTING_PERCENT = re.compile(r"^(?:low energy in\s*)?(\d{1,3})\s*%?$")


def _label_key(cell: str) -> str:
    text = cell.strip().lower().replace("\u2013", "-").replace("\u2014", "-")
    text = re.sub(r"\s*-\s*", "-", text)
    return re.sub(r"\s+", " ", text)


class GroundTruthRecord(BaseModel):
    """One verified row of the ground-truth table."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    property_id: str
    groups: dict[ImageGroup, list[int]]
    age: GroundTruthAge
    building_type: BuildingType
    heating_label: str
    heating_type: HeatingType
    energy_source: EnergySource
    window_type: WindowType
    lighting: int = Field(ge=0, le=100)
    energy_kwh_m2: float = Field(ge=0)
    epc: EpcRating


def _parse_age(cell: str) -> GroundTruthAge:
    if re.fullmatch(r"\d{3,4}", cell.strip()):
        return GroundTruthAge(exact_year=int(cell))
    key = _label_key(cell)
    for band in AgeBand:
        if key == band.value:
            return GroundTruthAge(band=band)
    raise ValueError(f"building_age {cell!r} is neither a year nor an age band")


def _lookup(table: dict, cell: str, column: str):
    try:
        return table[_label_key(cell)]
    except KeyError:
        raise ValueError(f"{column} {cell!r} is not a known label") from None


def _parse_lighting(cell: str) -> int:
    key = _label_key(cell)
    if key == "no low energy lighting":
        return 0
    match = _LIGHTING_PERCENT.match(key)
    if not match:
        raise ValueError(f"lighting {cell!r} is not a percentage")
    return int(match.group(1))


def _row_record(row: dict[str, str]) -> GroundTruthRecord:
    heating_type, energy_source = HEATING_SYNONYMS[_label_key(row["main_heating"])]
    try:
        energy = float(row["energy_kwh_m2"])
    except ValueError:
        raise ValueError(f"energy_kwh_m2 {row['energy_kwh_m2']!r} is not a number") from None
    return GroundTruthRecord(
        property_id=row["id"].strip(),
        groups={g: _split_indices(row[col]) for g, col in _GROUP_COLUMNS.items()},
        age=_parse_age(row["building_age"]),
        building_type=_lookup(BUILDING_TYPE_SYNONYMS, row["building_type"], "building_type"),
        heating_label=row["main_heating"],
        heating_type=heating_type,
        energy_source=energy_source,
        window_type=_lookup(WINDOW_SYNONYMS, row["window_type"], "window_type"),
        lighting=_parse_lighting(row["lighting"]),
        energy_kwh_m2=energy,
        epc=row["epc_rating"].strip().upper(),
    )


def load_ground_truth(path: Path) -> list[GroundTruthRecord]:
    """Load the ground-truth CSV, canonicalising labels through the synonym tables.

    Every unknown heating label in the file is reported at once; none is guessed.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e.strerror or e}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise SchemaError(f"{path}: not a readable CSV file ({e})") from e

    columns = [c.strip() for c in frame.columns]
    if columns != GROUND_TRUTH_COLUMNS:
        missing = [c for c in GROUND_TRUTH_COLUMNS if c not in columns]
        extra = [c for c in columns if c not in GROUND_TRUTH_COLUMNS]
        detail = []
        if missing:
            detail.append(f"missing column(s) {', '.join(missing)}")
        if extra:
            detail.append(f"unknown column(s) {', '.join(extra)}")
        if not detail:
            detail.append("columns out of order")
        raise SchemaError(f"{path}: {'; '.join(detail)}")
    frame.columns = columns

    rows = frame.to_dict(orient="records")
    unknown = sorted(
        {r["main_heating"] for r in rows if _label_key(r["main_heating"]) not in HEATING_SYNONYMS}
    )
    if unknown:
        raise UnknownHeatingLabel(unknown)

    records = []
    seen: set[str] = set()
    for line, row in enumerate(rows, start=2):
        where = f"{path}:{line} ({row['id']})"
        try:
            record = _row_record(row)
        except ValidationError as e:
            raise _schema_error(where, e) from e
        except ValueError as e:
            raise SchemaError(f"{where}: {e}") from e
        if record.property_id in seen:
            raise SchemaError(f"{where}: duplicate property id")
        seen.add(record.property_id)
        records.append(record)
    return records


# --- Assessments ---


class StageFailure(BaseModel):
    """A stage that produced no usable text (LLM error or missing prerequisite)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    prompt_id: PromptId
    kind: str
    message: str


class PropertyAssessment(BaseModel):
    """Everything the pipeline learned about one property.

    Raw texts are kept even when parsing fails; parsed values are None when absent.
    """

    model_config = ConfigDict(extra="forbid")

    property_id: str
    model_name: str
    stages_run: list[PromptId] = Field(default_factory=list)
    raw_texts: dict[PromptId, str] = Field(default_factory=dict)
    age_band: AgeBand | None = None
    building_type: BuildingType | None = None
    heating_observation: HeatingObservation | None = None
    heating_type: HeatingType | None = None
    energy_source: EnergySource | None = None
    window_type: WindowType | None = None
    lighting: int | None = Field(default=None, ge=0, le=100)
    energy_estimate: EnergyEstimate | None = None
    recommendation: str | None = None
    diagnostics: list[ParseDiagnostic] = Field(default_factory=list)
    failures: list[StageFailure] = Field(default_factory=list)
    started_at: datetime | None = None
    finished_at: datetime | None = None

    @property
    def wholly_failed(self) -> bool:
        """True when no stage returned any text."""
        return not self.raw_texts


def _dump_line(assessment: PropertyAssessment) -> str:
    return assessment.model_dump_json() + "\n"


def write_assessments(path: Path, assessments: Iterable[PropertyAssessment]) -> None:
    """Replace ``path`` with one JSON record per line, atomically."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
                for assessment in assessments:
                    f.write(_dump_line(assessment))
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e.strerror or e}") from e


def append_assessment(path: Path, assessment: PropertyAssessment) -> None:
    """Append one record. Callers serialise concurrent appends."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8", newline="\n") as f:
            f.write(_dump_line(assessment))
    except OSError as e:
        raise IoError(f"Cannot append to {path}: {e.strerror or e}") from e


def read_assessments(path: Path) -> list[PropertyAssessment]:
    assessments = []
    for line_no, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            assessments.append(PropertyAssessment.model_validate_json(line))
        except ValidationError as e:
            raise _schema_error(f"{path}:{line_no}", e) from e
    return assessments
