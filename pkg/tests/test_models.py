import pytest
from pydantic import ValidationError

from facade_audit.models import (
    AgeBand,
    BuildingType,
    EnergyEstimate,
    EpcRating,
    GroundTruthAge,
    HeatingObservation,
    WindowType,
    age_band_for_year,
    epc_numeric,
    representative_year,
)


class TestAgeBand:
    def test_option_numbers_follow_prompt_order(self):
        assert [b.option for b in AgeBand] == [1, 2, 3, 4, 5, 6, 7]

    def test_ordering(self):
        assert AgeBand.BEFORE_1900 < AgeBand.Y1970_1990 < AgeBand.Y2020_NOW
        assert AgeBand.Y1970_1990 >= AgeBand.Y1970_1990
        assert sorted([AgeBand.Y2020_NOW, AgeBand.BEFORE_1900]) == [
            AgeBand.BEFORE_1900,
            AgeBand.Y2020_NOW,
        ]

    @pytest.mark.parametrize(
        "year,band",
        [
            (1850, AgeBand.BEFORE_1900),
            (1899, AgeBand.BEFORE_1900),
            (1900, AgeBand.Y1900_1930),
            (1929, AgeBand.Y1900_1930),
            (1930, AgeBand.Y1930_1950),
            (1970, AgeBand.Y1970_1990),
            (2014, AgeBand.Y1990_2020),
            (2019, AgeBand.Y1990_2020),
            (2020, AgeBand.Y2020_NOW),
            (2031, AgeBand.Y2020_NOW),
        ],
    )
    def test_year_falls_in_one_half_open_band(self, year, band):
        assert age_band_for_year(year) == band

    def test_every_year_has_exactly_one_band(self):
        for year in range(1700, 2100):
            containing = [
                b
                for b in AgeBand
                if (b.bounds[0] is None or year >= b.bounds[0])
                and (b.bounds[1] is None or year < b.bounds[1])
            ]
            assert containing == [age_band_for_year(year)]

    def test_representative_years(self):
        assert representative_year(AgeBand.Y1900_1930) == 1915
        assert representative_year(AgeBand.Y1990_2020) == 2005
        assert representative_year(AgeBand.BEFORE_1900) == 1890
        assert representative_year(AgeBand.Y2020_NOW) == 2022
        for band in AgeBand:
            assert age_band_for_year(representative_year(band)) == band


class TestGroundTruthAge:
    def test_exact_year(self):
        age = GroundTruthAge(exact_year=2014)
        assert age.as_band == AgeBand.Y1990_2020
        assert age.as_year == 2014

    def test_band_only(self):
        age = GroundTruthAge(band=AgeBand.BEFORE_1900)
        assert age.as_band == AgeBand.BEFORE_1900
        assert age.as_year == 1890

    def test_needs_exactly_one(self):
        with pytest.raises(ValidationError):
            GroundTruthAge()
        with pytest.raises(ValidationError):
            GroundTruthAge(exact_year=1990, band=AgeBand.Y1990_2020)


class TestEnergyEstimate:
    def test_point_is_midpoint(self):
        assert EnergyEstimate(low_kwh_m2=35, high_kwh_m2=50).point_kwh_m2 == 42.5

    def test_single_value(self):
        estimate = EnergyEstimate.point(180)
        assert estimate.low_kwh_m2 == estimate.high_kwh_m2 == 180

    def test_rejects_inverted_range(self):
        with pytest.raises(ValidationError):
            EnergyEstimate(low_kwh_m2=50, high_kwh_m2=35)

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            EnergyEstimate.point(-1)


class TestSmallTypes:
    def test_window_labels(self):
        assert WindowType(3).label == "high efficiency double or triple glazed"
        assert WindowType.DOUBLE_GLAZED == 2

    def test_building_type_options(self):
        assert BuildingType.UNITS_5_PLUS.option == 4

    def test_epc_numeric(self):
        assert epc_numeric(EpcRating.A) == 1
        assert epc_numeric(EpcRating.G) == 7

    def test_heating_observation_is_strict(self):
        with pytest.raises(ValidationError):
            HeatingObservation(air_vent=True, radiators=False, water_filled=False, panel=False)
        with pytest.raises(ValidationError):
            HeatingObservation(
                air_vent=True,
                radiators=False,
                water_filled=False,
                panel=False,
                storage=False,
                boiler=True,
            )
