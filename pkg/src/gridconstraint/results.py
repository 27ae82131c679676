"""Result directory layout, fixed-point formatting and the run manifest."""

from __future__ import annotations

import hashlib
import shutil
from pathlib import Path
from typing import Mapping

from .allocation import ConstraintReason
from .analysis import ClusterCatalog, Dataset, LocationType, MatrixResult
from .canonical import NONPOINT_FILE, SITES_FILE, SUBSTATIONS_FILE, read_csv, write_csv, write_dataset
from .core import Region, Sector

MANIFEST = "manifest.txt"
SCHEMA = "gridconstraint-results/1"
CANONICAL_DIR = "canonical"
CELLS_DIR = "cells"
REPORT_DIR = "report"

OUTCOME_HEADER = ["year", "scenario", "pathway", "region", "site_id", "sector", "substation_id", "distance_km",
                  "demand_mw", "headroom_before_mw", "constrained_mw", "reason"]
BALANCE_HEADER = ["year", "scenario", "pathway", "region", "regional_headroom_mw", "point_need_mw",
                  "nonpoint_need_mw", "industrial_need_mw", "balance_mw", "unmet_industrial_need_mw"]
GB_HEADER = ["year", "scenario", "pathway", "total_headroom_mw", "network_shortfall_mw", "total_shortfall_mw",
             "industrial_need_mw", "unmet_industrial_need_mw", "total_capacity_need_mw",
             "point_source_constrained_mw", "point_source_industrial_constrained_mw",
             "nearest_substation_shortfall_mw", "point_source_total_need_mw", "n_sites",
             *[f"n_{r.value}" for r in ConstraintReason]]
SITE_SUMMARY_HEADER = ["year", "scenario", "pathway", "n_sites", "n_constrained", "constrained_pct",
                       *[f"n_{r.value}" for r in ConstraintReason],
                       "n_cluster", "n_dispersed", "n_constrained_cluster", "n_constrained_dispersed",
                       "emissions_2030_at_risk_mt", "emissions_2030_total_mt", "emissions_2030_share",
                       "emissions_2024_at_risk_mt"]
SECTOR_HEADER = ["year", "scenario", "pathway", "sector", "constrained_emissions_share"]
SENSITIVITY_HEADER = ["year", "scenario", "pathway", "delta_constrained_pct_points", "delta_constrained_mw",
                      "delta_emissions_2024_at_risk_mt"]
ASSIGNMENT_HEADER = ["region", "site_id", "sector", "substation_id", "distance_km", "location_type"]


def _fixed(value: float | None, places: int) -> str:
    if value is None:
        return ""
    text = f"{value:.{places}f}"
    if text.startswith("-") and not text.strip("-0."):
        text = text[1:]
    return text


def mw(value):
    return _fixed(value, 3)


def mt(value):
    return _fixed(value, 2)


def ratio(value):
    return _fixed(value, 4)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _cell_cols(cell):
    return [int(cell.year), cell.scenario.value, cell.pathway.value]


def write_results(result: MatrixResult, dataset: Dataset, out_dir, *, canonical_dir=None,
                  catalog: ClusterCatalog | None = None, echo: Mapping[str, str] | None = None) -> Path:
    """Write every output family plus a manifest listing each file's checksum."""
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        if not (out / MANIFEST).exists():
            raise FileExistsError(f"{out} is not empty and is not a previous result directory")
        shutil.rmtree(out)
    inputs = {}
    if canonical_dir is not None:
        for name in (SUBSTATIONS_FILE, SITES_FILE, NONPOINT_FILE):
            src = Path(canonical_dir) / name
            if src.exists():
                inputs[name] = sha256(src)
    write_dataset(out / CANONICAL_DIR, dataset.substations, dataset.sites, dataset.nonpoint)
    if catalog is not None:
        write_csv(out / CANONICAL_DIR / "clusters.csv", ["name", "lat", "lon"],
                  [[n, repr(p.lat), repr(p.lon)] for n, p in catalog.clusters])

    sites = dataset.site_map
    region_order = {r: i for i, r in enumerate(Region)}
    ordered_sites = sorted(dataset.sites, key=lambda s: (region_order[s.region], s.id))
    write_csv(out / "assignment.csv", ASSIGNMENT_HEADER, [
        [s.region.value, s.id, s.sector.value, result.assignment[s.id], mw(result.distances[s.id]),
         result.locations[s.id].value if s.id in result.locations else ""]
        for s in ordered_sites])

    gb_rows, site_rows, sector_rows = [], [], []
    for r in result.cells:
        cell_dir = out / CELLS_DIR / r.cell.key
        cell_dir.mkdir(parents=True)
        cc = _cell_cols(r.cell)
        write_csv(cell_dir / "outcomes.csv", OUTCOME_HEADER, [
            [*cc, sites[o.site_id].region.value, o.site_id, sites[o.site_id].sector.value, o.substation_id,
             mw(o.distance_km), mw(o.demand_mw), mw(o.headroom_before_mw), mw(o.constrained_mw), o.reason.value]
            for o in r.outcomes])
        write_csv(cell_dir / "regional_balances.csv", BALANCE_HEADER, [
            [*cc, b.region.value, mw(b.regional_headroom), mw(b.point_need), mw(b.nonpoint_need),
             mw(b.industrial_need), mw(b.balance), mw(b.unmet_industrial_need)]
            for b in r.balances])
        s = r.summary
        gb_rows.append([*cc, mw(s.total_headroom), mw(s.network_shortfall), mw(s.total_shortfall),
                        mw(s.industrial_need_total), mw(s.unmet_industrial_need), mw(s.total_capacity_need),
                        mw(s.point_source_constrained_capacity), mw(s.point_source_industrial_constrained),
                        mw(s.nearest_substation_shortfall), mw(s.point_source_total_need), s.n_sites,
                        *[s.reason_counts[k] for k in ConstraintReason]])
        st = r.stats
        site_rows.append([*cc, s.n_sites, st.constrained, _fixed(100 * s.constrained_fraction, 2),
                          *[s.reason_counts[k] for k in ConstraintReason],
                          st.by_location[LocationType.CLUSTER], st.by_location[LocationType.DISPERSED],
                          st.constrained_by_location[LocationType.CLUSTER],
                          st.constrained_by_location[LocationType.DISPERSED],
                          mt(st.emissions_2030.at_risk), mt(st.emissions_2030.total), ratio(st.emissions_2030.share),
                          mt(st.emissions_2024.at_risk)])
        sector_rows.extend([*cc, sec.value, ratio(r.sector_shares[sec])] for sec in Sector)
    write_csv(out / "gb_summary.csv", GB_HEADER, gb_rows)
    write_csv(out / "site_summary.csv", SITE_SUMMARY_HEADER, site_rows)
    write_csv(out / "sector_shares.csv", SECTOR_HEADER, sector_rows)
    write_csv(out / "sensitivity.csv", SENSITIVITY_HEADER, [
        [int(x.year), x.scenario.value, x.pathway.value, _fixed(x.delta_constrained_points, 2),
         mw(x.delta_constrained_mw), mt(x.delta_emissions_2024_at_risk)]
        for x in result.sensitivity()])

    write_manifest(out, echo or {}, inputs, [r.cell.key for r in result.cells])
    return out


def _output_files(out: Path) -> list[str]:
    rels = (p.relative_to(out) for p in out.rglob("*") if p.is_file())
    return sorted(r.as_posix() for r in rels if r.as_posix() != MANIFEST and r.parts[0] != REPORT_DIR)


def write_manifest(out: Path, echo: Mapping[str, str], inputs: Mapping[str, str], cells: list[str]) -> None:
    lines = [f"schema={SCHEMA}"]
    lines += [f"config.{k}={echo[k]}" for k in sorted(echo)]
    lines += [f"input.{k}.sha256={inputs[k]}" for k in sorted(inputs)]
    lines.append(f"cells.count={len(cells)}")
    lines.append(f"cells={','.join(cells)}")
    lines += [f"file.{rel}.sha256={sha256(out / rel)}" for rel in _output_files(out)]
    (out / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")


def read_manifest(out) -> dict[str, str]:
    entries = {}
    for line in (Path(out) / MANIFEST).read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            entries[key] = value
    return entries


def verify_manifest(out) -> list[str]:
    """Problems found comparing the directory against its manifest; empty when intact."""
    out = Path(out)
    manifest = read_manifest(out)
    problems = []
    if manifest.get("schema") != SCHEMA:
        problems.append(f"unsupported result schema {manifest.get('schema')!r}")
    listed = {k[len("file."):-len(".sha256")]: v for k, v in manifest.items() if k.startswith("file.")}
    present = set(_output_files(out))
    for rel in sorted(present - set(listed)):
        problems.append(f"{rel} not listed in manifest")
    for rel, digest in sorted(listed.items()):
        if rel not in present:
            problems.append(f"{rel} listed but missing")
        elif sha256(out / rel) != digest:
            problems.append(f"{rel} checksum mismatch")
    return problems


def read_table(path, header) -> list[dict]:
    return read_csv(path, header)
