import math

import pytest

from gridconstraint.core import (
    Cell,
    DataError,
    GeoPoint,
    HorizonYear,
    NetworkScenario,
    Pathway,
    Region,
    Sector,
    scenario_grid,
)

from conftest import make_nonpoint, make_site, make_substation


def test_grid_has_27_cells_plus_baseline():
    grid = scenario_grid()
    assert len(grid) == 27
    assert grid.baseline is HorizonYear.Y2024
    assert all(c.year is not HorizonYear.Y2024 for c in grid)
    assert len(set(grid)) == 27


def test_grid_order():
    grid = scenario_grid()
    assert grid[0] == (HorizonYear.Y2030, NetworkScenario.FALLING_SHORT, Pathway.BALANCED)
    assert grid[-1] == (HorizonYear.Y2050, NetworkScenario.LEADING_THE_WAY, Pathway.MAX_ELECTRIFICATION)
    assert [c.year for c in grid] == sorted(c.year for c in grid)
    assert (HorizonYear.Y2050, NetworkScenario.LEADING_THE_WAY, Pathway.MAX_ELECTRIFICATION) in grid
    assert list(scenario_grid()) == list(grid)


def test_closed_enumerations():
    assert len(Region) == 11
    assert len(Sector) == 10
    assert len(NetworkScenario) == 3
    assert len(Pathway) == 3
    assert HorizonYear.baseline() is HorizonYear.Y2024


@pytest.mark.parametrize("label, expected", [
    ("Leading The Way", NetworkScenario.LEADING_THE_WAY),
    ("Steady Progression", NetworkScenario.FALLING_SHORT),
    ("falling_short", NetworkScenario.FALLING_SHORT),
    ("No REEE", Pathway.NO_REEE),
    ("Max electrification", Pathway.MAX_ELECTRIFICATION),
    ("Yorkshire and the Humber", Region.YORKSHIRE_AND_THE_HUMBER),
    ("Food & Drink", Sector.FOOD_AND_DRINK),
    ("Cement and lime", Sector.CEMENT_AND_LIME),
])
def test_label_parsing(label, expected):
    assert type(expected).parse(label) is expected


@pytest.mark.parametrize("enum_cls, label", [(Sector, "Textiles"), (Region, "Northern Ireland"),
                                              (NetworkScenario, "System Transformation")])
def test_unknown_labels_rejected(enum_cls, label):
    with pytest.raises(DataError):
        enum_cls.parse(label)


@pytest.mark.parametrize("lat, lon", [(91, 0), (-90.5, 0), (0, 180.1), (math.nan, 0), (0, math.inf)])
def test_geopoint_range(lat, lon):
    with pytest.raises(DataError):
        GeoPoint(lat, lon)


def test_cell_key_roundtrip():
    for cell in scenario_grid():
        assert Cell.parse(cell.key) == cell


def test_substation_headroom_total_and_negative():
    sub = make_substation("S", headroom=-4.0)
    assert all(sub.headroom_at(y, s) == -4.0 for y in HorizonYear for s in NetworkScenario)
    with pytest.raises(DataError):
        make_substation("S", headroom=1.0).__class__(
            "T", "NPG", GeoPoint(0, 0), 33.0, Region.LONDON, {(HorizonYear.Y2024, NetworkScenario.FALLING_SHORT): 1})


def test_substation_voltage_limit():
    sub = make_substation("S")
    with pytest.raises(DataError):
        type(sub)("S", "NPG", sub.location, 132.0, sub.region, dict(sub.headroom))


def test_site_baseline_need_is_zero():
    site = make_site("A", need=5.0)
    assert all(site.need(HorizonYear.Y2024, p) == 0 for p in Pathway)
    assert site.need(HorizonYear.Y2050, Pathway.BALANCED) == 5.0
    with pytest.raises(DataError):
        type(site)("B", site.sector, site.region, site.location,
                   {**site.capacity_need, (HorizonYear.Y2024, Pathway.BALANCED): 1.0})


def test_nonpoint_need_may_be_negative():
    d = make_nonpoint(Region.WALES, need=-2.0)
    assert d.need(HorizonYear.Y2040, Pathway.BALANCED) == -2.0
    assert d.need(HorizonYear.Y2024, Pathway.BALANCED) == 0.0


def test_types_are_immutable():
    site = make_site("A")
    with pytest.raises(Exception):
        site.id = "B"
    with pytest.raises(TypeError):
        site.capacity_need[(HorizonYear.Y2030, Pathway.BALANCED)] = 3.0


def test_negative_emissions_rejected():
    with pytest.raises(DataError):
        make_site("A", emissions_2030=-1.0)
