"""Command-line entry point: ``ingest``, ``run`` and ``report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .analysis import AnalysisError, ClusterCatalog, Dataset, MatrixConfig, run_matrix
from .allocation import AllocationError
from .canonical import DIAGNOSTICS_FILE, read_dataset, write_dataset, write_diagnostics
from .config import ConfigError, RunConfig, select_cells
from .core import DataError
from .ingest import Diagnostics, IngestError, default_profiles, ingest_headroom, ingest_sites, load_profiles
from .report import FORMATS, ReportError, build_report
from .results import write_results

EXIT_OK = 0
EXIT_INGEST = 3
EXIT_RUN = 4
EXIT_REPORT = 5

log = logging.getLogger("gridconstraint")


def _config(args) -> RunConfig:
    cfg = RunConfig.from_yaml(args.config) if args.config else RunConfig()
    overrides = {
        "out": getattr(args, "out", None),
        "power_factor": getattr(args, "power_factor", None),
        "load_factor": getattr(args, "load_factor", None),
        "cluster_threshold_km": getattr(args, "cluster_km", None),
        "jobs": getattr(args, "jobs", None),
        "canonical_dir": getattr(args, "canonical", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, Path(value) if key in ("out", "canonical_dir") else value)
    if getattr(args, "cells", None):
        cfg.cells = [args.cells]
    return cfg.validate()


def cmd_ingest(args) -> int:
    try:
        cfg = _config(args)
        if not cfg.headroom_files:
            raise ConfigError("no headroom files configured")
        if cfg.point_sites is None:
            raise ConfigError("no point-site file configured")
        profiles = load_profiles(cfg.profiles) if cfg.profiles else default_profiles()
    except (ConfigError, DataError, OSError) as exc:
        print(f"ingest: {exc}", file=sys.stderr)
        return EXIT_INGEST

    out = Path(args.out) if args.out else cfg.canonical_dir
    out.mkdir(parents=True, exist_ok=True)
    diags = Diagnostics()
    try:
        substations = ingest_headroom(cfg.headroom_files, profiles, power_factor=cfg.power_factor,
                                      diagnostics=diags)
        sites, nonpoint = ingest_sites(cfg.point_sites, cfg.nonpoint_sites, cfg.load_factor, diagnostics=diags)
    except IngestError as exc:
        write_diagnostics(out / DIAGNOSTICS_FILE, diags)
        print(f"ingest: {exc}", file=sys.stderr)
        print(f"ingest: diagnostics written to {out / DIAGNOSTICS_FILE}", file=sys.stderr)
        return EXIT_INGEST
    write_dataset(out, substations, sites, nonpoint)
    write_diagnostics(out / DIAGNOSTICS_FILE, diags)
    print(f"ingest: {len(substations)} substations, {len(sites)} point sites, "
          f"{len(nonpoint)} non-point records -> {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = _config(args)
        substations, sites, nonpoint = read_dataset(cfg.canonical_dir)
        dataset = Dataset(substations, sites, nonpoint)
        catalog = ClusterCatalog.from_csv(cfg.clusters, cfg.cluster_threshold_km) if cfg.clusters else None
        result = run_matrix(dataset, MatrixConfig(select_cells(cfg.cells), catalog, cfg.jobs))
        out = write_results(result, dataset, cfg.out, canonical_dir=cfg.canonical_dir, catalog=catalog,
                            echo=cfg.echo())
    except (ConfigError, DataError, AnalysisError, AllocationError, OSError, KeyError) as exc:
        print(f"run: {exc}", file=sys.stderr)
        return EXIT_RUN
    print(f"run: {len(result.cells)} cells -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        build_report(args.results, args.format, args.out, stream=sys.stdout)
    except (ReportError, DataError, OSError) as exc:
        print(f"report: {exc}", file=sys.stderr)
        return EXIT_REPORT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridconstraint",
        description="Distribution-network headroom constraints on industrial decarbonisation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="harmonize raw headroom and demand files into canonical files")
    ing.add_argument("--config", help="run configuration (YAML)")
    ing.add_argument("--out", help="canonical output directory (default: config canonical_dir)")
    ing.add_argument("--power-factor", type=float)
    ing.add_argument("--load-factor", type=float)
    ing.set_defaults(func=cmd_ingest)

    run = sub.add_parser("run", help="assign, allocate and aggregate over the scenario matrix")
    run.add_argument("--config", help="run configuration (YAML)")
    run.add_argument("--canonical", help="canonical dataset directory (default: config canonical_dir)")
    run.add_argument("--out", help="result directory (default: config out)")
    run.add_argument("--cells", help="comma-separated YEAR:SCENARIO:PATHWAY patterns, '*' as wildcard")
    run.add_argument("--cluster-km", type=float)
    run.add_argument("--jobs", type=int)
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="summary tables and feature collections from a result directory")
    rep.add_argument("results", help="result directory written by 'run'")
    rep.add_argument("--format", default="all", help=f"one of {', '.join(FORMATS)}")
    rep.add_argument("--out", help="report directory (default: RESULTS/report)")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
