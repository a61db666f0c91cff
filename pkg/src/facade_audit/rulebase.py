"""Domain rule base turning heating observations into heating type and energy source.

The clauses are kept as ordered tables so their order stays visible and auditable:

    heating: if/elif chain (water rads -> electric panels -> electric storage), then two
             standalone checks (underfloor, warm air)
    source:  if/elif chain (community -> gas -> electric)

A rule that does not fire leaves the result ``unknown``; gaps are never filled with a guess.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass

from facade_audit.models import (
    AgeBand,
    BuildingType,
    EnergySource,
    HeatingObservation,
    HeatingType,
)

logger = logging.getLogger(__name__)

# Bands starting at or after 1970.
MODERN_BANDS = frozenset({AgeBand.Y1970_1990, AgeBand.Y1990_2020, AgeBand.Y2020_NOW})


@dataclass(frozen=True)
class HeatingRule:
    name: str
    when: Callable[[HeatingObservation], bool]
    then: HeatingType


@dataclass(frozen=True)
class SourceFacts:
    band: AgeBand
    btype: BuildingType
    obs: HeatingObservation
    heating: HeatingType


@dataclass(frozen=True)
class SourceRule:
    name: str
    when: Callable[[SourceFacts], bool]
    then: EnergySource


def _no_emitters(o: HeatingObservation) -> bool:
    return not o.radiators and not o.panel and not o.storage


HEATING_CHAIN: tuple[HeatingRule, ...] = (
    HeatingRule("water-rads", lambda o: o.radiators and o.water_filled, HeatingType.WATER_RADS),
    HeatingRule("electric-panels", lambda o: o.panel, HeatingType.ELECTRIC_PANELS),
    HeatingRule("electric-storage", lambda o: o.storage, HeatingType.ELECTRIC_STORAGE),
)

HEATING_STANDALONE: tuple[HeatingRule, ...] = (
    HeatingRule("underfloor", lambda o: not o.air_vent and _no_emitters(o), HeatingType.UNDERFLOOR),
    HeatingRule("warm-air", lambda o: o.air_vent and _no_emitters(o), HeatingType.WARM_AIR),
)

SOURCE_CHAIN: tuple[SourceRule, ...] = (
    SourceRule(
        "community",
        lambda f: (
            f.band in MODERN_BANDS
            and f.btype == BuildingType.UNITS_5_PLUS
            and not f.obs.panel
            and not f.obs.storage
        ),
        EnergySource.COMMUNITY,
    ),
    SourceRule("gas", lambda f: f.obs.water_filled, EnergySource.GAS),
    SourceRule(
        "electric",
        lambda f: f.heating == HeatingType.UNDERFLOOR or f.obs.panel or f.obs.storage,
        EnergySource.ELECTRIC,
    ),
)


def _heating_trace(obs: HeatingObservation) -> tuple[HeatingType, list[str]]:
    result = HeatingType.UNKNOWN
    fired: list[str] = []
    for rule in HEATING_CHAIN:
        if rule.when(obs):
            result = rule.then
            fired.append(rule.name)
            break
    # Standalone checks run regardless of the chain; a later firing overwrites.
    for rule in HEATING_STANDALONE:
        if rule.when(obs):
            result = rule.then
            fired.append(rule.name)
    return result, fired


def _source_trace(facts: SourceFacts) -> tuple[EnergySource, list[str]]:
    for rule in SOURCE_CHAIN:
        if rule.when(facts):
            return rule.then, [rule.name]
    return EnergySource.UNKNOWN, []


def infer_heating_type(obs: HeatingObservation) -> HeatingType:
    """Main heating type implied by the observed emitters."""
    return _heating_trace(obs)[0]


def infer_energy_source(
    band: AgeBand,
    btype: BuildingType,
    obs: HeatingObservation,
    heating: HeatingType,
) -> EnergySource:
    """Heating energy source; ``heating`` must be infer_heating_type(obs)."""
    return _source_trace(SourceFacts(band, btype, obs, heating))[0]


def explain(band: AgeBand, btype: BuildingType, obs: HeatingObservation) -> list[str]:
    """Names of the clauses that fired, heating rules first, in evaluation order."""
    heating, heating_fired = _heating_trace(obs)
    _, source_fired = _source_trace(SourceFacts(band, btype, obs, heating))
    return [f"heating:{name}" for name in heating_fired] + [
        f"source:{name}" for name in source_fired
    ]


def apply(
    band: AgeBand,
    btype: BuildingType,
    obs: HeatingObservation,
) -> tuple[HeatingType, EnergySource]:
    """Run both rule tables on one property."""
    heating = infer_heating_type(obs)
    source = infer_energy_source(band, btype, obs, heating)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"Rule base fired {explain(band, btype, obs)} -> {heating}, {source}")
    return heating, source
