"""Summary tables and geographic features built from a result directory."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from pathlib import Path
from typing import TextIO

from .allocation import ConstraintReason
from .canonical import read_dataset, write_csv
from .core import Sector
from .results import (
    CANONICAL_DIR,
    CELLS_DIR,
    GB_HEADER,
    OUTCOME_HEADER,
    REPORT_DIR,
    SECTOR_HEADER,
    SITE_SUMMARY_HEADER,
    _fixed,
    mw,
    read_manifest,
    read_table,
    verify_manifest,
)

FORMATS = ("text", "csv", "geojson", "all")


class ReportError(Exception):
    pass


def _cell_key(row) -> str:
    return f"{row['year']}_{row['scenario']}_{row['pathway']}"


def load_results(result_dir):
    result_dir = Path(result_dir)
    if not (result_dir / "manifest.txt").exists():
        raise ReportError(f"{result_dir} has no manifest; is it a run output?")
    problems = verify_manifest(result_dir)
    if problems:
        raise ReportError("result directory failed verification: " + "; ".join(problems))
    manifest = read_manifest(result_dir)
    cells = [c for c in manifest.get("cells", "").split(",") if c]
    outcomes = {c: read_table(result_dir / CELLS_DIR / c / "outcomes.csv", OUTCOME_HEADER) for c in cells}
    gb = {_cell_key(r): r for r in read_table(result_dir / "gb_summary.csv", GB_HEADER)}
    sites = {_cell_key(r): r for r in read_table(result_dir / "site_summary.csv", SITE_SUMMARY_HEADER)}
    shares = defaultdict(dict)
    for r in read_table(result_dir / "sector_shares.csv", SECTOR_HEADER):
        shares[_cell_key(r)][r["sector"]] = r["constrained_emissions_share"]
    return cells, outcomes, gb, sites, shares


def _reconcile(cell: str, rows: list[dict], gb: dict) -> dict:
    counts = Counter(r["reason"] for r in rows)
    constrained_mw = sum(float(r["constrained_mw"]) for r in rows)
    industrial = sum(min(float(r["constrained_mw"]), max(float(r["demand_mw"]), 0.0)) for r in rows)
    if len(rows) != int(gb["n_sites"]):
        raise ReportError(f"{cell}: {len(rows)} outcome rows but summary lists {gb['n_sites']} sites")
    for reason in ConstraintReason:
        if counts[reason.value] != int(gb[f"n_{reason.value}"]):
            raise ReportError(f"{cell}: {reason.value} count differs between outcomes and summary")
    # rows carry 3-decimal values, so allow the accumulated rounding
    if abs(constrained_mw - float(gb["point_source_constrained_mw"])) > 0.0005 * (len(rows) + 1):
        raise ReportError(f"{cell}: constrained capacity differs between outcomes and summary")
    return {"counts": counts, "constrained_mw": constrained_mw, "industrial_mw": industrial}


def feature_collection(rows: list[dict], sites: dict, substations: dict) -> dict:
    """Constrained sites as points, plus the substations serving them."""
    features = []
    served = defaultdict(list)
    for r in rows:
        if r["reason"] == ConstraintReason.UNCONSTRAINED.value:
            continue
        site = sites[r["site_id"]]
        served[r["substation_id"]].append(r)
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [site.location.lon, site.location.lat]},
            "properties": {"kind": "site", "id": r["site_id"], "sector": r["sector"], "reason": r["reason"],
                           "constrained_mw": float(r["constrained_mw"]), "substation_id": r["substation_id"]},
        })
    for sub_id in sorted(served):
        sub = substations[sub_id]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [sub.location.lon, sub.location.lat]},
            "properties": {"kind": "substation", "id": sub_id, "sector": None, "reason": None,
                           "constrained_mw": float(mw(sum(float(r["constrained_mw"]) for r in served[sub_id]))),
                           "n_constrained_sites": len(served[sub_id])},
        })
    return {"type": "FeatureCollection", "features": features}


def build_report(result_dir, fmt: str = "all", out_dir=None, stream: TextIO | None = None) -> list[Path]:
    """Render summary tables (csv/text) and per-cell feature collections (geojson)."""
    if fmt not in FORMATS:
        raise ReportError(f"unknown report format {fmt!r}; choose from {', '.join(FORMATS)}")
    result_dir = Path(result_dir)
    cells, outcomes, gb, site_summary, shares = load_results(result_dir)
    out = Path(out_dir) if out_dir is not None else result_dir / REPORT_DIR
    out.mkdir(parents=True, exist_ok=True)
    written = []

    recon = {}
    for c in cells:
        if c not in gb or c not in site_summary:
            raise ReportError(f"cell {c} missing from summary tables")
        recon[c] = _reconcile(c, outcomes[c], gb[c])

    reasons = [r.value for r in ConstraintReason]
    constrained_rows, shortfall_rows, emission_rows, location_rows, sector_rows = [], [], [], [], []
    for c in cells:
        g, s, rc = gb[c], site_summary[c], recon[c]
        cc = [g["year"], g["scenario"], g["pathway"]]
        n = len(outcomes[c])
        n_con = n - rc["counts"][ConstraintReason.UNCONSTRAINED.value]
        constrained_rows.append([*cc, n, n_con, _fixed(100 * n_con / n if n else 0.0, 2),
                                 *[rc["counts"][r] for r in reasons], mw(rc["constrained_mw"]),
                                 mw(rc["industrial_mw"])])
        shortfall_rows.append([*cc, *[g[k] for k in (
            "total_headroom_mw", "network_shortfall_mw", "total_shortfall_mw", "industrial_need_mw",
            "unmet_industrial_need_mw", "total_capacity_need_mw", "point_source_industrial_constrained_mw",
            "nearest_substation_shortfall_mw", "point_source_total_need_mw")]])
        emission_rows.append([*cc, s["emissions_2030_at_risk_mt"], s["emissions_2030_total_mt"],
                              s["emissions_2030_share"], s["emissions_2024_at_risk_mt"]])
        nc, nd = int(s["n_constrained_cluster"]), int(s["n_constrained_dispersed"])
        location_rows.append([*cc, s["n_cluster"], s["n_dispersed"], nc, nd, _fixed(nd / nc, 2) if nc else ""])
        sector_rows.append([*cc, *[shares[c].get(sec.value, "") for sec in Sector]])

    if fmt in ("csv", "all"):
        tables = {
            "constrained_sites.csv": (["year", "scenario", "pathway", "n_sites", "n_constrained", "constrained_pct",
                                       *[f"n_{r}" for r in reasons], "constrained_mw",
                                       "industrial_constrained_mw"], constrained_rows),
            "shortfalls.csv": (["year", "scenario", "pathway", "total_headroom_mw", "network_shortfall_mw",
                                "total_shortfall_mw", "industrial_need_mw", "unmet_industrial_need_mw",
                                "total_capacity_need_mw", "point_source_industrial_constrained_mw",
                                "nearest_substation_shortfall_mw", "point_source_total_need_mw"], shortfall_rows),
            "emissions_at_risk.csv": (["year", "scenario", "pathway", "emissions_2030_at_risk_mt",
                                       "emissions_2030_total_mt", "emissions_2030_share",
                                       "emissions_2024_at_risk_mt"], emission_rows),
            "location_split.csv": (["year", "scenario", "pathway", "n_cluster", "n_dispersed",
                                    "n_constrained_cluster", "n_constrained_dispersed",
                                    "dispersed_to_cluster_ratio"], location_rows),
            "sector_shares.csv": (["year", "scenario", "pathway", *[sec.value for sec in Sector]], sector_rows),
        }
        for name, (header, rows) in tables.items():
            write_csv(out / name, header, rows)
            written.append(out / name)

    if fmt in ("geojson", "all"):
        substations, sites, _ = read_dataset(result_dir / CANONICAL_DIR)
        site_map, sub_map = {s.id: s for s in sites}, {s.id: s for s in substations}
        geo_dir = out / "geo"
        geo_dir.mkdir(exist_ok=True)
        for c in cells:
            path = geo_dir / f"{c}.geojson"
            path.write_text(json.dumps(feature_collection(outcomes[c], site_map, sub_map), indent=2) + "\n",
                            encoding="utf-8", newline="")
            written.append(path)

    if fmt in ("text", "all") and stream is not None:
        _render_text(stream, constrained_rows, shortfall_rows, emission_rows)
    return written


def _render_text(stream: TextIO, constrained_rows, shortfall_rows, emission_rows) -> None:
    header = f"{'cell':<46} {'sites':>6} {'constr':>6} {'%':>7} {'constr MW':>11} {'shortfall MW':>13} {'MtCO2e':>7}"
    stream.write(header + "\n" + "-" * len(header) + "\n")
    for con, sh, em in zip(constrained_rows, shortfall_rows, emission_rows):
        cell = f"{con[0]} {con[1]} {con[2]}"
        stream.write(f"{cell:<46} {con[3]:>6} {con[4]:>6} {con[5]:>7} {con[-2]:>11} {sh[5]:>13} {em[3]:>7}\n")
