"""Canonical dataset files: the only inputs the analysis stages read.

Canonical files keep full float precision (``repr``) so a run from files
matches a run from memory; rounding is applied only to reports.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from .core import (
    DataError,
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

SUBSTATIONS_FILE = "substations.csv"
SITES_FILE = "sites.csv"
NONPOINT_FILE = "nonpoint.csv"
DIAGNOSTICS_FILE = "diagnostics.csv"


class SchemaError(DataError):
    pass


def _headroom_cols():
    return [f"headroom_{int(y)}_{s.value}" for y in HorizonYear for s in NetworkScenario]


def _need_cols():
    return [f"need_{int(y)}_{p.value}" for y in HorizonYear.future() for p in Pathway]


SUBSTATION_HEADER = ["substation_id", "dno", "region", "lat", "lon", "voltage_kv", *_headroom_cols()]
SITE_HEADER = ["site_id", "sector", "region", "lat", "lon", "emissions_2024",
               *[f"emissions_2030_{p.value}" for p in Pathway], *_need_cols()]
NONPOINT_HEADER = ["region", "sector", *_need_cols()]


def _num(value) -> str:
    return "" if value is None else repr(float(value))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Comma-separated, header row, UTF-8, LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def read_csv(path, header: Sequence[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(header):
            raise SchemaError(f"{path}: header does not match the current canonical schema")
        return list(reader)


def write_substations(path, substations: Iterable[Substation]) -> None:
    rows = []
    for s in sorted(substations, key=lambda s: s.id):
        rows.append([s.id, s.dno, s.region.value, _num(s.location.lat), _num(s.location.lon), _num(s.voltage_kv),
                     *[_num(s.headroom_at(y, sc)) for y in HorizonYear for sc in NetworkScenario]])
    write_csv(path, SUBSTATION_HEADER, rows)


def read_substations(path) -> list[Substation]:
    out = []
    for row in read_csv(path, SUBSTATION_HEADER):
        headroom = {(y, s): float(row[f"headroom_{int(y)}_{s.value}"]) for y in HorizonYear for s in NetworkScenario}
        out.append(Substation(row["substation_id"], row["dno"], GeoPoint(float(row["lat"]), float(row["lon"])),
                              float(row["voltage_kv"]), Region.parse(row["region"]), headroom))
    return out


def write_sites(path, sites: Iterable[PointSite]) -> None:
    rows = []
    for s in sorted(sites, key=lambda s: s.id):
        rows.append([s.id, s.sector.value, s.region.value, _num(s.location.lat), _num(s.location.lon),
                     _num(s.emissions_2024), *[_num(s.emissions_2030.get(p)) for p in Pathway],
                     *[_num(s.need(y, p)) for y in HorizonYear.future() for p in Pathway]])
    write_csv(path, SITE_HEADER, rows)


def _needs(row) -> dict:
    return {(y, p): float(row[f"need_{int(y)}_{p.value}"]) for y in HorizonYear.future() for p in Pathway}


def read_sites(path) -> list[PointSite]:
    out = []
    for row in read_csv(path, SITE_HEADER):
        em30 = {p: float(row[f"emissions_2030_{p.value}"]) for p in Pathway if row[f"emissions_2030_{p.value}"]}
        out.append(PointSite(row["site_id"], Sector.parse(row["sector"]), Region.parse(row["region"]),
                             GeoPoint(float(row["lat"]), float(row["lon"])), _needs(row), em30,
                             float(row["emissions_2024"]) if row["emissions_2024"] else None))
    return out


def write_nonpoint(path, demands: Iterable[RegionalNonPointDemand]) -> None:
    rows = [[d.region.value, d.sector.value, *[_num(d.need(y, p)) for y in HorizonYear.future() for p in Pathway]]
            for d in demands]
    write_csv(path, NONPOINT_HEADER, rows)


def read_nonpoint(path) -> list[RegionalNonPointDemand]:
    return [RegionalNonPointDemand(Region.parse(r["region"]), Sector.parse(r["sector"]), _needs(r))
            for r in read_csv(path, NONPOINT_HEADER)]


def write_diagnostics(path, diagnostics) -> None:
    rows = [[d.file, "" if d.row is None else d.row, d.severity, d.reason]
            for d in sorted(diagnostics, key=lambda d: d.sort_key())]
    write_csv(path, ["file", "row", "severity", "reason"], rows)


def write_dataset(directory, substations, sites, nonpoint) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / SUBSTATIONS_FILE, directory / SITES_FILE, directory / NONPOINT_FILE]
    write_substations(paths[0], substations)
    write_sites(paths[1], sites)
    write_nonpoint(paths[2], nonpoint)
    return paths


def read_dataset(directory):
    directory = Path(directory)
    for name in (SUBSTATIONS_FILE, SITES_FILE):
        if not (directory / name).exists():
            raise FileNotFoundError(f"canonical file {directory / name} not found")
    nonpoint = directory / NONPOINT_FILE
    return (read_substations(directory / SUBSTATIONS_FILE), read_sites(directory / SITES_FILE),
            read_nonpoint(nonpoint) if nonpoint.exists() else [])
