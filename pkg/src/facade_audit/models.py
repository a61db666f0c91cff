"""Domain enumerations and value types shared by every module."""

from enum import IntEnum, StrEnum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AgeBand(StrEnum):
    """Construction-age bands, in the order the age prompt lists them."""

    BEFORE_1900 = "before 1900"
    Y1900_1930 = "1900-1930"
    Y1930_1950 = "1930-1950"
    Y1950_1970 = "1950-1970"
    Y1970_1990 = "1970-1990"
    Y1990_2020 = "1990-2020"
    Y2020_NOW = "2020-now"

    @property
    def option(self) -> int:
        """1-based option number in the age prompt."""
        return list(AgeBand).index(self) + 1

    @property
    def bounds(self) -> tuple[int | None, int | None]:
        """Half-open [start, end) interval; None marks an unbounded side."""
        return _AGE_BAND_BOUNDS[self]

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, AgeBand):
            return NotImplemented
        return self.option < other.option

    def __le__(self, other: object) -> bool:
        if not isinstance(other, AgeBand):
            return NotImplemented
        return self.option <= other.option

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, AgeBand):
            return NotImplemented
        return self.option > other.option

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, AgeBand):
            return NotImplemented
        return self.option >= other.option


_AGE_BAND_BOUNDS: dict[AgeBand, tuple[int | None, int | None]] = {
    AgeBand.BEFORE_1900: (None, 1900),
    AgeBand.Y1900_1930: (1900, 1930),
    AgeBand.Y1930_1950: (1930, 1950),
    AgeBand.Y1950_1970: (1950, 1970),
    AgeBand.Y1970_1990: (1970, 1990),
    AgeBand.Y1990_2020: (1990, 2020),
    AgeBand.Y2020_NOW: (2020, None),
}

# Unbounded bands have no midpoint; these sit near the bulk of plausible housing stock.
_OPEN_BAND_YEARS = {AgeBand.BEFORE_1900: 1890, AgeBand.Y2020_NOW: 2022}


class BuildingType(StrEnum):
    """EIA housing unit categories."""

    SINGLE_FAMILY_DETACHED = "Single-family detached"
    SINGLE_FAMILY_ATTACHED = "Single-family attached"
    UNITS_2_TO_4 = "Apartments in buildings with 2-4 units"
    UNITS_5_PLUS = "Apartments in buildings with 5 or more units"
    MOBILE_HOME = "Mobile home"

    @property
    def option(self) -> int:
        return list(BuildingType).index(self) + 1


class HeatingType(StrEnum):
    WATER_RADS = "water rads"
    ELECTRIC_PANELS = "electric panels"
    ELECTRIC_STORAGE = "electric storage"
    UNDERFLOOR = "underfloor"
    WARM_AIR = "warm air"
    UNKNOWN = "unknown"


class EnergySource(StrEnum):
    COMMUNITY = "community"
    GAS = "gas"
    ELECTRIC = "electric"
    UNKNOWN = "unknown"


class WindowType(IntEnum):
    """Glazing, ordinal. Neighbouring values 2 and 3 count as approximately right."""

    SINGLE_GLAZED = 1
    DOUBLE_GLAZED = 2
    HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE = 3

    @property
    def label(self) -> str:
        return _WINDOW_LABELS[self]


_WINDOW_LABELS = {
    WindowType.SINGLE_GLAZED: "single glazed",
    WindowType.DOUBLE_GLAZED: "double glazed",
    WindowType.HIGH_EFFICIENCY_DOUBLE_OR_TRIPLE: "high efficiency double or triple glazed",
}

# Percent of low-energy lighting for each lighting option, in option order.
LIGHTING_OPTIONS: tuple[int, ...] = (0, 20, 40, 60, 80, 100)


class EpcRating(StrEnum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"
    E = "E"
    F = "F"
    G = "G"


class HeatingObservation(BaseModel):
    """Y/N answers to the heating prompt. All five flags are always present."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    air_vent: bool
    radiators: bool
    water_filled: bool
    panel: bool
    storage: bool


class EnergyEstimate(BaseModel):
    """Energy consumption estimate in kWh/m² per year; a point estimate has low == high."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    low_kwh_m2: float = Field(ge=0)
    high_kwh_m2: float = Field(ge=0)

    @model_validator(mode="after")
    def _check_order(self) -> "EnergyEstimate":
        if self.high_kwh_m2 < self.low_kwh_m2:
            raise ValueError(f"high ({self.high_kwh_m2}) is below low ({self.low_kwh_m2})")
        return self

    @property
    def point_kwh_m2(self) -> float:
        return (self.low_kwh_m2 + self.high_kwh_m2) / 2

    @classmethod
    def point(cls, value: float) -> "EnergyEstimate":
        return cls(low_kwh_m2=value, high_kwh_m2=value)


class GroundTruthAge(BaseModel):
    """Recorded construction age: either an exact year or only a band."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    exact_year: int | None = None
    band: AgeBand | None = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "GroundTruthAge":
        if (self.exact_year is None) == (self.band is None):
            raise ValueError("exactly one of exact_year or band must be set")
        return self

    @property
    def as_band(self) -> AgeBand:
        if self.band is not None:
            return self.band
        return age_band_for_year(self.exact_year)

    @property
    def as_year(self) -> int:
        if self.exact_year is not None:
            return self.exact_year
        return representative_year(self.band)


def age_band_for_year(year: int) -> AgeBand:
    """The unique half-open band containing ``year``."""
    for band, (start, end) in _AGE_BAND_BOUNDS.items():
        if (start is None or year >= start) and (end is None or year < end):
            return band
    raise AssertionError(f"age bands do not cover {year}")  # pragma: no cover


def representative_year(band: AgeBand) -> int:
    """Interval midpoint for bounded bands, a fixed constant for the two open ones."""
    if band in _OPEN_BAND_YEARS:
        return _OPEN_BAND_YEARS[band]
    start, end = band.bounds
    return (start + end) // 2


def epc_numeric(rating: EpcRating) -> int:
    """A=1 ... G=7."""
    return list(EpcRating).index(rating) + 1
