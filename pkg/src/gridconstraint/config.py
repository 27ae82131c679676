"""Run configuration: one YAML document, overridable from the command line."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import yaml

from .analysis import DEFAULT_CLUSTER_KM
from .core import Cell, DataError, HorizonYear, NetworkScenario, Pathway, scenario_grid
from .ingest import DEFAULT_LOAD_FACTOR, DEFAULT_POWER_FACTOR


class ConfigError(DataError):
    pass


@dataclass
class RunConfig:
    profiles: Path | None = None
    headroom_files: dict[str, list[Path]] = field(default_factory=dict)
    point_sites: Path | None = None
    nonpoint_sites: Path | None = None
    clusters: Path | None = None
    canonical_dir: Path = Path("canonical")
    out: Path = Path("results")
    power_factor: float = DEFAULT_POWER_FACTOR
    load_factor: float = DEFAULT_LOAD_FACTOR
    cluster_threshold_km: float = DEFAULT_CLUSTER_KM
    cells: list[str] = field(default_factory=list)
    jobs: int = 1

    def validate(self) -> "RunConfig":
        for name in ("power_factor", "load_factor"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        if not self.cluster_threshold_km > 0:
            raise ConfigError(f"cluster_threshold_km must be positive, got {self.cluster_threshold_km}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        select_cells(self.cells)
        return self

    @classmethod
    def from_yaml(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"{path}: unknown keys {sorted(extra)}")
        base = path.parent

        def resolve(p):
            return None if p is None else (base / p)

        cfg = cls()
        for key, value in doc.items():
            if key in ("profiles", "point_sites", "nonpoint_sites", "clusters", "canonical_dir", "out"):
                value = resolve(value)
            elif key == "headroom_files":
                value = {str(dno): [resolve(p) for p in ([paths] if isinstance(paths, str) else paths)]
                         for dno, paths in (value or {}).items()}
            elif key == "cells":
                value = [value] if isinstance(value, str) else list(value or [])
            elif key in ("power_factor", "load_factor", "cluster_threshold_km"):
                value = float(value)
            elif key == "jobs":
                value = int(value)
            setattr(cfg, key, value)
        return cfg

    def echo(self) -> dict[str, str]:
        """Settings that shape results; parallelism is left out because it must not."""
        return {
            "power_factor": repr(self.power_factor),
            "load_factor": repr(self.load_factor),
            "cluster_threshold_km": repr(self.cluster_threshold_km),
            "cells": ";".join(self.cells) if self.cells else "*",
        }


def _match(pattern: str, value, parse) -> bool:
    return pattern in ("*", "") or parse(pattern) == value


def select_cells(patterns: Sequence[str] | None) -> list[Cell]:
    """Cells matching any ``YEAR:SCENARIO:PATHWAY`` pattern (``*`` matches anything)."""
    grid = list(scenario_grid())
    if not patterns:
        return grid
    chosen = set()
    for raw in patterns:
        for pattern in str(raw).split(","):
            pattern = pattern.strip()
            if not pattern:
                continue
            parts = pattern.split(":")
            if len(parts) != 3:
                raise ConfigError(f"cell pattern {pattern!r} must look like YEAR:SCENARIO:PATHWAY")
            y, s, p = parts
            try:
                chosen.update(c for c in grid if _match(y, c.year, HorizonYear.parse)
                              and _match(s, c.scenario, NetworkScenario.parse)
                              and _match(p, c.pathway, Pathway.parse))
            except DataError as exc:
                raise ConfigError(f"cell pattern {pattern!r}: {exc}") from None
    cells = [c for c in grid if c in chosen]
    if not cells:
        raise ConfigError(f"cell filter {list(patterns)} selects no cells")
    return cells
