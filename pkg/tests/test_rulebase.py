import logging
from itertools import product

import pytest

from facade_audit import rulebase
from facade_audit.models import (
    AgeBand,
    BuildingType,
    EnergySource,
    HeatingObservation,
    HeatingType,
)


def _obs(air_vent=False, radiators=False, water_filled=False, panel=False, storage=False):
    return HeatingObservation(
        air_vent=air_vent,
        radiators=radiators,
        water_filled=water_filled,
        panel=panel,
        storage=storage,
    )


ALL_OBSERVATIONS = [
    _obs(*flags) for flags in product([False, True], repeat=5)
]


def _oracle(band: AgeBand, btype: BuildingType, obs: HeatingObservation) -> tuple[str, str]:
    """Line-by-line restatement of the rule table over Y/N strings."""
    yn = {True: "Y", False: "N"}
    air_vent = yn[obs.air_vent]
    radiators = yn[obs.radiators]
    water_filled = yn[obs.water_filled]
    panel = yn[obs.panel]
    storage = yn[obs.storage]

    main_heating = "unknown"
    if radiators == "Y" and water_filled == "Y":
        main_heating = "water rads"
    elif panel == "Y":
        main_heating = "electric panels"
    elif storage == "Y":
        main_heating = "electric storage"
    if air_vent == "N" and radiators == "N" and panel == "N" and storage == "N":
        main_heating = "underfloor"
    if air_vent == "Y" and radiators == "N" and panel == "N" and storage == "N":
        main_heating = "warm air"

    start_year = {
        AgeBand.BEFORE_1900: 0,
        AgeBand.Y1900_1930: 1900,
        AgeBand.Y1930_1950: 1930,
        AgeBand.Y1950_1970: 1950,
        AgeBand.Y1970_1990: 1970,
        AgeBand.Y1990_2020: 1990,
        AgeBand.Y2020_NOW: 2020,
    }[band]
    energy_source = "unknown"
    if (
        start_year >= 1970
        and btype == BuildingType.UNITS_5_PLUS
        and panel == "N"
        and storage == "N"
    ):
        energy_source = "community"
    elif water_filled == "Y":
        energy_source = "gas"
    elif main_heating == "underfloor" or panel == "Y" or storage == "Y":
        energy_source = "electric"
    return main_heating, energy_source


class TestInferHeatingType:
    def test_warm_air(self):
        assert rulebase.infer_heating_type(_obs(air_vent=True)) == HeatingType.WARM_AIR

    def test_underfloor_when_nothing_seen(self):
        assert rulebase.infer_heating_type(_obs()) == HeatingType.UNDERFLOOR

    def test_water_radiators(self):
        obs = _obs(radiators=True, water_filled=True)
        assert rulebase.infer_heating_type(obs) == HeatingType.WATER_RADS

    def test_dry_radiators_are_unknown(self):
        obs = _obs(radiators=True)
        assert rulebase.infer_heating_type(obs) == HeatingType.UNKNOWN

    def test_chain_order(self):
        # Water rads win over panels, panels over storage.
        everything = _obs(radiators=True, water_filled=True, panel=True, storage=True)
        assert rulebase.infer_heating_type(everything) == HeatingType.WATER_RADS
        assert rulebase.infer_heating_type(_obs(panel=True, storage=True)) == (
            HeatingType.ELECTRIC_PANELS
        )
        assert rulebase.infer_heating_type(_obs(storage=True)) == HeatingType.ELECTRIC_STORAGE

    def test_gap_is_exactly_dry_radiators_alone(self):
        unknown = [
            o for o in ALL_OBSERVATIONS if rulebase.infer_heating_type(o) == HeatingType.UNKNOWN
        ]
        assert len(unknown) == 2
        assert {o.air_vent for o in unknown} == {False, True}
        for o in unknown:
            assert o.radiators and not o.water_filled and not o.panel and not o.storage


class TestInferEnergySource:
    def test_community_scheme(self):
        obs = _obs()
        source = rulebase.infer_energy_source(
            AgeBand.Y1990_2020, BuildingType.UNITS_5_PLUS, obs, HeatingType.UNDERFLOOR
        )
        assert source == EnergySource.COMMUNITY

    def test_gas(self):
        obs = _obs(radiators=True, water_filled=True)
        source = rulebase.infer_energy_source(
            AgeBand.BEFORE_1900, BuildingType.UNITS_2_TO_4, obs, HeatingType.WATER_RADS
        )
        assert source == EnergySource.GAS

    def test_electric(self):
        obs = _obs(panel=True)
        source = rulebase.infer_energy_source(
            AgeBand.BEFORE_1900, BuildingType.UNITS_2_TO_4, obs, HeatingType.ELECTRIC_PANELS
        )
        assert source == EnergySource.ELECTRIC

    def test_unknown(self):
        obs = _obs(radiators=True)
        source = rulebase.infer_energy_source(
            AgeBand.BEFORE_1900, BuildingType.UNITS_2_TO_4, obs, HeatingType.UNKNOWN
        )
        assert source == EnergySource.UNKNOWN

    def test_age_threshold_is_band_start(self):
        obs = _obs()
        older = rulebase.infer_energy_source(
            AgeBand.Y1950_1970, BuildingType.UNITS_5_PLUS, obs, HeatingType.UNDERFLOOR
        )
        newer = rulebase.infer_energy_source(
            AgeBand.Y1970_1990, BuildingType.UNITS_5_PLUS, obs, HeatingType.UNDERFLOOR
        )
        assert older == EnergySource.ELECTRIC
        assert newer == EnergySource.COMMUNITY


class TestOracle:
    @pytest.mark.parametrize("band", list(AgeBand))
    def test_matches_oracle_everywhere(self, band):
        for btype, obs in product(BuildingType, ALL_OBSERVATIONS):
            heating, source = rulebase.apply(band, btype, obs)
            assert (heating.value, source.value) == _oracle(band, btype, obs), (band, btype, obs)

    def test_covers_every_tuple(self):
        tuples = list(product(AgeBand, BuildingType, ALL_OBSERVATIONS))
        assert len(tuples) == 1120
        for band, btype, obs in tuples:
            heating, source = rulebase.apply(band, btype, obs)
            assert isinstance(heating, HeatingType)
            assert isinstance(source, EnergySource)

    def test_water_radiators_never_electric(self):
        for band, btype, obs in product(AgeBand, BuildingType, ALL_OBSERVATIONS):
            heating, source = rulebase.apply(band, btype, obs)
            if heating == HeatingType.WATER_RADS:
                assert source in (EnergySource.GAS, EnergySource.COMMUNITY)

    def test_deterministic(self):
        obs = _obs(air_vent=True, panel=True)
        first = rulebase.apply(AgeBand.Y2020_NOW, BuildingType.UNITS_5_PLUS, obs)
        assert all(
            rulebase.apply(AgeBand.Y2020_NOW, BuildingType.UNITS_5_PLUS, obs) == first
            for _ in range(10)
        )


class TestExplain:
    def test_warm_air_community(self):
        fired = rulebase.explain(AgeBand.Y2020_NOW, BuildingType.UNITS_5_PLUS, _obs(air_vent=True))
        assert fired == ["heating:warm-air", "source:community"]

    def test_nothing_fires(self):
        fired = rulebase.explain(
            AgeBand.BEFORE_1900, BuildingType.UNITS_2_TO_4, _obs(radiators=True)
        )
        assert fired == []


class TestApplyLogging:
    def test_trace_skipped_unless_debug(self, monkeypatch, caplog):
        def fail(*args):
            raise AssertionError("explain() ran with DEBUG off")

        monkeypatch.setattr(rulebase, "explain", fail)
        with caplog.at_level(logging.INFO, logger="facade_audit.rulebase"):
            heating, _ = rulebase.apply(
                AgeBand.Y2020_NOW, BuildingType.UNITS_5_PLUS, _obs(air_vent=True)
            )
        assert heating == HeatingType.WARM_AIR

    def test_trace_logged_at_debug(self, caplog):
        with caplog.at_level(logging.DEBUG, logger="facade_audit.rulebase"):
            rulebase.apply(AgeBand.Y2020_NOW, BuildingType.UNITS_5_PLUS, _obs(air_vent=True))
        assert "heating:warm-air" in caplog.text
        assert "source:community" in caplog.text
