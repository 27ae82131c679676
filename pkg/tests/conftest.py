import shutil
from pathlib import Path

import pytest

from gridconstraint.core import (
    GeoPoint,
    HorizonYear,
    NetworkScenario,
    Pathway,
    PointSite,
    Region,
    RegionalNonPointDemand,
    Sector,
    Substation,
)

DATA = Path(__file__).parent / "data"


def make_substation(sid, lat=53.0, lon=-1.5, headroom=0.0, region=Region.NORTH_WEST, dno="NPG"):
    """``headroom`` is a constant or a {(year, scenario): MW} mapping filled with 0 elsewhere."""
    if isinstance(headroom, dict):
        cells = {(y, s): headroom.get((y, s), 0.0) for y in HorizonYear for s in NetworkScenario}
    else:
        cells = {(y, s): float(headroom) for y in HorizonYear for s in NetworkScenario}
    return Substation(sid, dno, GeoPoint(lat, lon), 33.0, region, cells)


def make_site(sid, lat=53.0, lon=-1.5, need=0.0, region=Region.NORTH_WEST, sector=Sector.CHEMICALS,
              emissions_2030=1.0, emissions_2024=None):
    """``need`` is a constant future need or a {(year, pathway): MW} mapping."""
    if isinstance(need, dict):
        needs = {(y, p): need.get((y, p), 0.0) for y in HorizonYear.future() for p in Pathway}
    else:
        needs = {(y, p): float(need) for y in HorizonYear.future() for p in Pathway}
    em = {p: emissions_2030 for p in Pathway} if emissions_2030 is not None else {}
    return PointSite(sid, sector, region, GeoPoint(lat, lon), needs, em, emissions_2024)


def make_nonpoint(region, sector=Sector.OTHER_INDUSTRY, need=0.0):
    return RegionalNonPointDemand(region, sector,
                                  {(y, p): float(need) for y in HorizonYear.future() for p in Pathway})


@pytest.fixture
def toy_dir(tmp_path):
    dest = tmp_path / "toy"
    shutil.copytree(DATA / "toy", dest)
    return dest


# Acceptance bookkeeping: one summary line per criterion number.
_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not (report.failed or report.skipped)):
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "states": []})
    entry["states"].append("FAIL" if report.failed else "SKIP" if report.skipped else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        states = entry["states"]
        state = "FAIL" if "FAIL" in states else "PASS" if "PASS" in states else "SKIP"
        terminalreporter.write_line(f"{state}  criterion {number:>2}: {entry['title']}")
