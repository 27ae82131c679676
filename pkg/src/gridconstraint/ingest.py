"""Harmonize operator headroom files and industrial demand files into canonical records.

Each distribution operator publishes headroom in its own layout. A
:class:`DnoProfile` describes one layout (column names, units, which raw years
and scenario labels map onto the study grid, season handling) and profiles are
loaded from a YAML document so new operators need no code changes.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from .core import (
    MAX_VOLTAGE_KV,
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
    _norm,
)

log = logging.getLogger(__name__)

HOURS_PER_YEAR = 8760
DEFAULT_POWER_FACTOR = 0.9
DEFAULT_LOAD_FACTOR = 0.9

ALREADY_MW = "already_MW"
CONVERT_MVA = "convert_MVA_with_pf"
UNIT_RULES = (ALREADY_MW, CONVERT_MVA)
SEASON_NONE = "none"
TAKE_WINTER = "take_winter"
SEASON_RULES = (SEASON_NONE, TAKE_WINTER)

HEADROOM_FIELDS = ("substation_id", "lat", "lon", "voltage_kv", "region", "year", "scenario", "season",
                   "headroom", "unit")
_OPTIONAL_HEADROOM_FIELDS = {"season", "unit"}
POINT_FIELDS = ("site_id", "sector", "region", "lat", "lon", "year", "pathway", "electricity_mwh",
                "emissions_mtco2e")
NONPOINT_FIELDS = ("region", "sector", "year", "pathway", "electricity_mwh")


class IngestError(Exception):
    """Fatal ingest failure; ``diagnostics`` holds every problem found."""

    def __init__(self, message: str, diagnostics: Sequence["Diagnostic"] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class Diagnostic:
    file: str
    row: int | None
    severity: str  # "error", "rejected" or "skipped"
    reason: str

    @property
    def fatal(self) -> bool:
        return self.severity == "error"

    def sort_key(self):
        return (self.file, -1 if self.row is None else self.row, self.severity, self.reason)


class Diagnostics(list):
    def add(self, file, row, severity, reason):
        self.append(Diagnostic(str(file), row, severity, reason))

    @property
    def fatal(self) -> list[Diagnostic]:
        return [d for d in self if d.fatal]

    def ordered(self) -> list[Diagnostic]:
        return sorted(self, key=Diagnostic.sort_key)

    def raise_if_fatal(self, what: str):
        errors = sorted(self.fatal, key=Diagnostic.sort_key)
        if errors:
            first = errors[0]
            where = f"{first.file}" + (f" row {first.row}" if first.row is not None else "")
            raise IngestError(f"{what}: {len(errors)} error(s); first at {where}: {first.reason}", self.ordered())


def _identity_years() -> dict[int, int]:
    return {int(y): int(y) for y in HorizonYear}


@dataclass(frozen=True)
class DnoProfile:
    dno_id: str
    unit_rule: str = ALREADY_MW
    year_remap: Mapping[int, int] = field(default_factory=_identity_years)
    scenario_remap: Mapping[str, str] = field(default_factory=dict)
    season_rule: str = SEASON_NONE
    multi_file: bool = False
    columns: Mapping[str, str] = field(default_factory=dict)
    unit: str | None = None

    def __post_init__(self):
        if self.unit_rule not in UNIT_RULES:
            raise DataError(f"profile {self.dno_id}: unit_rule must be one of {UNIT_RULES}")
        if self.season_rule not in SEASON_RULES:
            raise DataError(f"profile {self.dno_id}: season_rule must be one of {SEASON_RULES}")
        object.__setattr__(self, "year_remap", {int(k): int(v) for k, v in self.year_remap.items()})
        object.__setattr__(self, "scenario_remap",
                           {_norm(k): NetworkScenario.parse(v).value for k, v in self.scenario_remap.items()})
        unknown = set(self.columns) - set(HEADROOM_FIELDS)
        if unknown:
            raise DataError(f"profile {self.dno_id}: unknown column keys {sorted(unknown)}")

    def column(self, name: str) -> str:
        return self.columns.get(name, name)


def default_profiles() -> dict[str, DnoProfile]:
    """Built-in harmonization rules for the six GB operators."""
    enw_years = {2024: 2024, 2031: 2030, 2041: 2040, 2046: 2045, 2051: 2050}
    spm_scenarios = {"Baseline": "FallingShort", "Low": "ConsumerTransformation", "High": "LeadingTheWay"}
    return {
        "ENW": DnoProfile("ENW", unit_rule=CONVERT_MVA, year_remap=enw_years, unit="MVA"),
        "NPG": DnoProfile("NPG"),
        "SPM_SPD": DnoProfile("SPM_SPD", scenario_remap=spm_scenarios),
        "SEPD_SHEPD": DnoProfile("SEPD_SHEPD", unit_rule=CONVERT_MVA, season_rule=TAKE_WINTER, unit="MVA"),
        "UKPN": DnoProfile("UKPN"),
        "NGED": DnoProfile("NGED", multi_file=True),
    }


def load_profiles(path, base: Mapping[str, DnoProfile] | None = None) -> dict[str, DnoProfile]:
    """Read a profile document; entries override same-named built-in profiles field by field."""
    profiles = dict(default_profiles() if base is None else base)
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    entries = doc.get("profiles", doc)
    if not isinstance(entries, Mapping):
        raise DataError(f"{path}: expected a mapping of profiles")
    for dno_id, spec in entries.items():
        spec = dict(spec or {})
        known = {"unit_rule", "year_remap", "scenario_remap", "season_rule", "multi_file", "columns", "unit"}
        extra = set(spec) - known
        if extra:
            raise DataError(f"{path}: profile {dno_id} has unknown keys {sorted(extra)}")
        start = profiles.get(dno_id, DnoProfile(str(dno_id)))
        profiles[str(dno_id)] = replace(start, **spec)
    return profiles


def mva_to_mw(apparent: float, power_factor: float = DEFAULT_POWER_FACTOR) -> float:
    """Apparent power (MVA) to active power (MW); sign is preserved."""
    if not 0 < power_factor <= 1:
        raise ValueError(f"power factor must be in (0, 1], got {power_factor}")
    return apparent * power_factor


def annual_energy_to_capacity(energy_mwh: float, load_factor: float = DEFAULT_LOAD_FACTOR) -> float:
    """Annual energy (MWh/yr) to the connection capacity (MW) that delivers it at ``load_factor``."""
    if not 0 < load_factor <= 1:
        raise ValueError(f"load factor must be in (0, 1], got {load_factor}")
    return energy_mwh / (HOURS_PER_YEAR * load_factor)


def remap_year(raw_year: int, profile: DnoProfile) -> HorizonYear | None:
    """Study year for a raw plan year, or None when the year is not used."""
    target = profile.year_remap.get(int(raw_year))
    if target is None:
        return None
    try:
        return HorizonYear(target)
    except ValueError:
        return None


def remap_scenario(raw_label: str, profile: DnoProfile) -> NetworkScenario:
    mapped = profile.scenario_remap.get(_norm(raw_label))
    if mapped is not None:
        return NetworkScenario(mapped)
    return NetworkScenario.parse(raw_label)


@dataclass(frozen=True)
class RawHeadroomRecord:
    substation_id: str
    dno_id: str
    lat: float
    lon: float
    voltage: float
    raw_year: int
    raw_scenario_label: str
    raw_season: str | None
    magnitude: float
    unit: str
    region: str = ""
    file: str = ""
    row: int | None = None


def select_season(records: Sequence[RawHeadroomRecord], profile: DnoProfile) -> RawHeadroomRecord:
    """Pick the one record that represents a (substation, year, scenario) cell."""
    candidates = list(records)
    if profile.season_rule == TAKE_WINTER:
        candidates = [r for r in candidates if r.raw_season and "winter" in r.raw_season.lower()]
        if not candidates:
            raise IngestError(f"no winter record for substation {records[0].substation_id}")
    if len(candidates) != 1:
        rows = ", ".join(f"{r.file}:{r.row}" for r in candidates)
        raise IngestError(f"duplicate headroom records for one cell of substation "
                          f"{candidates[0].substation_id} ({rows})")
    return candidates[0]


def _read_rows(path: Path):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        rows = [(i, row) for i, row in enumerate(reader, start=2)]
    return header, rows


def _float(value, what: str) -> float:
    try:
        out = float(str(value).strip())
    except (TypeError, ValueError):
        raise DataError(f"{what} is not a number: {value!r}") from None
    if not math.isfinite(out):
        raise DataError(f"{what} is not finite: {value!r}")
    return out


def _int_year(value) -> int:
    try:
        return int(float(str(value).strip()))
    except (TypeError, ValueError):
        raise DataError(f"year is not an integer: {value!r}") from None


def read_headroom_file(path, profile: DnoProfile, diagnostics: Diagnostics) -> list[RawHeadroomRecord]:
    path = Path(path)
    header, rows = _read_rows(path)
    need = [f for f in HEADROOM_FIELDS if f not in _OPTIONAL_HEADROOM_FIELDS]
    if profile.unit is None:
        need.append("unit")
    if profile.season_rule == TAKE_WINTER:
        need.append("season")
    missing = [profile.column(f) for f in need if profile.column(f) not in header]
    if missing:
        diagnostics.add(path, 1, "error", f"schema mismatch for profile {profile.dno_id}: missing columns {missing}")
        return []

    col = profile.column
    out = []
    for row_no, row in rows:
        try:
            unit = (row.get(col("unit")) or "").strip() if col("unit") in header else ""
            unit = (unit or profile.unit or "").strip().upper()
            if unit not in ("MW", "MVA"):
                raise DataError(f"bad unit tag {unit!r}")
            season = row.get(col("season")) if col("season") in header else None
            out.append(RawHeadroomRecord(
                substation_id=str(row[col("substation_id")]).strip(),
                dno_id=profile.dno_id,
                lat=_float(row[col("lat")], "lat"),
                lon=_float(row[col("lon")], "lon"),
                voltage=_float(row[col("voltage_kv")], "voltage"),
                raw_year=_int_year(row[col("year")]),
                raw_scenario_label=str(row[col("scenario")] or "").strip(),
                raw_season=(season or "").strip() or None,
                magnitude=_float(row[col("headroom")], "headroom"),
                unit=unit,
                region=str(row[col("region")] or "").strip(),
                file=str(path),
                row=row_no,
            ))
            if not out[-1].substation_id:
                raise DataError("empty substation id")
        except DataError as exc:
            diagnostics.add(path, row_no, "error", str(exc))
    return out


def _to_mw(rec: RawHeadroomRecord, profile: DnoProfile, power_factor: float) -> float:
    if profile.unit_rule == CONVERT_MVA:
        if rec.unit != "MVA":
            raise DataError(f"unit tag {rec.unit} but profile {profile.dno_id} converts from MVA")
        return mva_to_mw(rec.magnitude, power_factor)
    if rec.unit != "MW":
        raise DataError(f"unit tag {rec.unit} but profile {profile.dno_id} expects MW")
    return rec.magnitude


def ingest_headroom(
    files: Mapping[str, Sequence],
    profiles: Mapping[str, DnoProfile],
    *,
    power_factor: float = DEFAULT_POWER_FACTOR,
    diagnostics: Diagnostics | None = None,
) -> list[Substation]:
    """Build canonical substations from per-operator files.

    ``files`` maps an operator id to its file paths (several only for
    multi-file operators, which are merged). Substations lacking any
    (year, scenario) cell are rejected with a diagnostic; structural problems
    raise :class:`IngestError` once every file has been read.
    """
    diags = Diagnostics() if diagnostics is None else diagnostics
    if not 0 < power_factor <= 1:
        raise ValueError(f"power factor must be in (0, 1], got {power_factor}")

    cells = defaultdict(list)   # (sub id, year, scenario) -> records
    meta: dict[str, set] = defaultdict(set)
    owner: dict[str, set] = defaultdict(set)
    for dno_id in sorted(files):
        paths = list(files[dno_id])
        profile = profiles.get(dno_id)
        if profile is None:
            diags.add(",".join(map(str, paths)), None, "error", f"unknown DNO {dno_id!r}: no profile")
            continue
        if len(paths) > 1 and not profile.multi_file:
            diags.add(",".join(map(str, paths)), None, "error",
                      f"profile {dno_id} is single-file but {len(paths)} files were given")
            continue
        for path in paths:
            if not Path(path).exists():
                diags.add(path, None, "error", "file not found")
                continue
            skipped_years = Counter()
            skipped_season = 0
            for rec in read_headroom_file(path, profile, diags):
                try:
                    GeoPoint(rec.lat, rec.lon)
                    region = Region.parse(rec.region)
                    if rec.voltage > MAX_VOLTAGE_KV:
                        diags.add(path, rec.row, "rejected",
                                  f"voltage {rec.voltage:g} kV above {MAX_VOLTAGE_KV:g} kV")
                        continue
                    mw = _to_mw(rec, profile, power_factor)
                    year = remap_year(rec.raw_year, profile)
                    if year is None:
                        skipped_years[rec.raw_year] += 1
                        continue
                    if profile.season_rule == TAKE_WINTER and not (
                            rec.raw_season and "winter" in rec.raw_season.lower()):
                        skipped_season += 1
                        continue
                    if rec.raw_scenario_label:
                        scenarios = [remap_scenario(rec.raw_scenario_label, profile)]
                    elif year is HorizonYear.Y2024:
                        scenarios = list(NetworkScenario)
                    else:
                        raise DataError(f"missing scenario label for year {rec.raw_year}")
                except DataError as exc:
                    diags.add(path, rec.row, "error", str(exc))
                    continue
                owner[rec.substation_id].add(dno_id)
                meta[rec.substation_id].add((rec.lat, rec.lon, rec.voltage, region))
                for scenario in scenarios:
                    cells[(rec.substation_id, year, scenario)].append((replace(rec, magnitude=mw)))
            if skipped_years:
                years = ", ".join(str(y) for y in sorted(skipped_years))
                diags.add(path, None, "skipped",
                          f"{sum(skipped_years.values())} record(s) with unused years ({years})")
                log.info("%s: skipped %d records with unused years", path, sum(skipped_years.values()))
            if skipped_season:
                diags.add(path, None, "skipped", f"{skipped_season} non-winter record(s)")

    values: dict[str, dict] = defaultdict(dict)
    for (sub_id, year, scenario), recs in cells.items():
        dno = sorted(owner[sub_id])[0]
        try:
            rec = select_season(sorted(recs, key=lambda r: (r.file, r.row)), profiles[dno])
        except IngestError as exc:
            diags.add(recs[0].file, recs[0].row, "error", f"{exc} in {year.value}/{scenario.value}")
            continue
        values[sub_id][(year, scenario)] = rec.magnitude

    for sub_id in sorted(owner):
        if len(owner[sub_id]) > 1:
            diags.add("", None, "error", f"substation id {sub_id} appears under DNOs {sorted(owner[sub_id])}")
        if len(meta[sub_id]) > 1:
            diags.add("", None, "error", f"substation {sub_id} has inconsistent location/voltage/region")
    diags.raise_if_fatal("headroom ingest failed")

    out = []
    for sub_id in sorted(values):
        missing = [f"{y.value}/{s.value}" for y in HorizonYear for s in NetworkScenario
                   if (y, s) not in values[sub_id]]
        if missing:
            diags.add("", None, "rejected", f"substation {sub_id} lacks headroom for {', '.join(missing)}")
            continue
        lat, lon, voltage, region = next(iter(meta[sub_id]))
        out.append(Substation(sub_id, sorted(owner[sub_id])[0], GeoPoint(lat, lon), voltage, region,
                              values[sub_id]))
    if not out:
        diags.add("", None, "error", "no substations")
        diags.raise_if_fatal("headroom ingest failed")
    return out



def _site_header_check(path: Path, header, fields, diags) -> bool:
    missing = [f for f in fields if f not in header]
    if missing:
        diags.add(path, 1, "error", f"schema mismatch: missing columns {missing}")
        return False
    return True


def _pathways(label: str, year: HorizonYear) -> list[Pathway]:
    if label.strip():
        return [Pathway.parse(label)]
    if year is HorizonYear.Y2024:
        return list(Pathway)
    raise DataError(f"missing pathway for year {int(year)}")


def _rebase(owner: str, energy: Mapping, load_factor: float) -> dict:
    """Capacity need per (year, pathway) relative to the same pathway's 2024 capacity."""
    needs = {}
    for pathway in Pathway:
        base = energy.get((HorizonYear.Y2024, pathway))
        if base is None:
            raise DataError(f"{owner}: no baseline-year (2024) record for pathway {pathway.value}")
        base_mw = annual_energy_to_capacity(base, load_factor)
        for year in HorizonYear.future():
            value = energy.get((year, pathway))
            if value is None:
                raise DataError(f"{owner}: no record for {int(year)}/{pathway.value}")
            needs[(year, pathway)] = annual_energy_to_capacity(value, load_factor) - base_mw
    return needs


def _read_energy(value, what: str) -> float:
    energy = _float(value, what)
    if energy < 0:
        raise DataError(f"{what} must be >= 0, got {energy}")
    return energy


def ingest_sites(
    point_file,
    nonpoint_file=None,
    load_factor: float = DEFAULT_LOAD_FACTOR,
    *,
    diagnostics: Diagnostics | None = None,
) -> tuple[list[PointSite], list[RegionalNonPointDemand]]:
    """Read point-source and non-point industrial demand files.

    Both files are long format, one row per (entity, year, pathway) with
    annual electricity use in MWh. Rows for 2024 may leave the pathway blank
    to apply to every pathway. Needs are converted to MW and re-based against
    2024; other years are ignored.
    """
    if not 0 < load_factor <= 1:
        raise ValueError(f"load factor must be in (0, 1], got {load_factor}")
    diags = Diagnostics() if diagnostics is None else diagnostics
    sites = _ingest_points(Path(point_file), load_factor, diags)
    nonpoint = _ingest_nonpoint(Path(nonpoint_file), load_factor, diags) if nonpoint_file else []
    diags.raise_if_fatal("site ingest failed")
    return sites, nonpoint


def _ingest_points(path: Path, load_factor: float, diags: Diagnostics) -> list[PointSite]:
    if not path.exists():
        diags.add(path, None, "error", "file not found")
        return []
    header, rows = _read_rows(path)
    if not _site_header_check(path, header, POINT_FIELDS, diags):
        return []
    meta: dict[str, set] = defaultdict(set)
    energy: dict[str, dict] = defaultdict(dict)
    emissions: dict[str, dict] = defaultdict(dict)
    first_row: dict[str, int] = {}
    skipped = 0
    for row_no, row in rows:
        try:
            site_id = str(row["site_id"]).strip()
            if not site_id:
                raise DataError("empty site id")
            sector, region = Sector.parse(row["sector"]), Region.parse(row["region"])
            loc = GeoPoint(_float(row["lat"], "lat"), _float(row["lon"], "lon"))
            raw_year = _int_year(row["year"])
            try:
                year = HorizonYear(raw_year)
            except ValueError:
                skipped += 1
                continue
            mwh = _read_energy(row["electricity_mwh"], "electricity_mwh")
            em_raw = str(row.get("emissions_mtco2e") or "").strip()
            em = _read_energy(em_raw, "emissions_mtco2e") if em_raw else None
            pathways = _pathways(str(row.get("pathway") or ""), year)
        except DataError as exc:
            diags.add(path, row_no, "error", str(exc))
            continue
        first_row.setdefault(site_id, row_no)
        meta[site_id].add((sector, region, loc))
        for pathway in pathways:
            if (year, pathway) in energy[site_id]:
                diags.add(path, row_no, "error",
                          f"duplicate record for site {site_id} {int(year)}/{pathway.value}")
                continue
            energy[site_id][(year, pathway)] = mwh
            if em is not None:
                emissions[site_id][(year, pathway)] = em
    if skipped:
        diags.add(path, None, "skipped", f"{skipped} record(s) for years outside the study grid")

    sites = []
    for site_id in sorted(energy):
        try:
            if len(meta[site_id]) > 1:
                raise DataError(f"site {site_id} has inconsistent sector/region/location across rows")
            sector, region, loc = next(iter(meta[site_id]))
            needs = _rebase(f"site {site_id}", energy[site_id], load_factor)
            em = emissions[site_id]
            base = {em[(HorizonYear.Y2024, p)] for p in Pathway if (HorizonYear.Y2024, p) in em}
            if len(base) > 1:
                raise DataError(f"site {site_id} has conflicting 2024 emissions across pathways")
            sites.append(PointSite(
                site_id, sector, region, loc, needs,
                emissions_2030={p: em[(HorizonYear.Y2030, p)] for p in Pathway if (HorizonYear.Y2030, p) in em},
                emissions_2024=base.pop() if base else None,
            ))
        except DataError as exc:
            diags.add(path, first_row[site_id], "error", str(exc))
    return sites


def _ingest_nonpoint(path: Path, load_factor: float, diags: Diagnostics) -> list[RegionalNonPointDemand]:
    if not path.exists():
        diags.add(path, None, "error", "file not found")
        return []
    header, rows = _read_rows(path)
    if not _site_header_check(path, header, NONPOINT_FIELDS, diags):
        return []
    energy: dict[tuple, dict] = defaultdict(dict)
    first_row = {}
    for row_no, row in rows:
        try:
            key = (Region.parse(row["region"]), Sector.parse(row["sector"]))
            try:
                year = HorizonYear(_int_year(row["year"]))
            except ValueError:
                continue
            mwh = _read_energy(row["electricity_mwh"], "electricity_mwh")
            pathways = _pathways(str(row.get("pathway") or ""), year)
        except DataError as exc:
            diags.add(path, row_no, "error", str(exc))
            continue
        first_row.setdefault(key, row_no)
        for pathway in pathways:
            if (year, pathway) in energy[key]:
                diags.add(path, row_no, "error", f"duplicate non-point record {key[0].value}/{key[1].value} "
                                                 f"{int(year)}/{pathway.value}")
                continue
            energy[key][(year, pathway)] = mwh
    out = []
    order = {r: i for i, r in enumerate(Region)}
    sector_order = {s: i for i, s in enumerate(Sector)}
    for key in sorted(energy, key=lambda k: (order[k[0]], sector_order[k[1]])):
        try:
            out.append(RegionalNonPointDemand(key[0], key[1],
                                              _rebase(f"non-point {key[0].value}/{key[1].value}",
                                                      energy[key], load_factor)))
        except DataError as exc:
            diags.add(path, first_row[key], "error", str(exc))
    return out
