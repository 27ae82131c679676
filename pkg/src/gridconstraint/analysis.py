"""Regional and GB aggregation over allocation outcomes, and the scenario matrix runner."""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .allocation import AllocationOutcome, ConstraintReason, allocate_cell
from .core import (
    Cell,
    GeoPoint,
    HorizonYear,
    NetworkScenario,
    Pathway,
    PointSite,
    Region,
    RegionalNonPointDemand,
    Sector,
    Substation,
    scenario_grid,
)
from .geo import SubstationIndex, assign_all, haversine_distance

DEFAULT_CLUSTER_KM = 25.0


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    substations: tuple[Substation, ...]
    sites: tuple[PointSite, ...]
    nonpoint: tuple[RegionalNonPointDemand, ...] = ()

    def __post_init__(self):
        for name in ("substations", "sites", "nonpoint"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name, items in (("substation", self.substations), ("site", self.sites)):
            ids = [x.id for x in items]
            if len(set(ids)) != len(ids):
                raise AnalysisError(f"duplicate {name} id in dataset")

    @cached_property
    def substation_map(self) -> dict[str, Substation]:
        return {s.id: s for s in self.substations}

    @cached_property
    def site_map(self) -> dict[str, PointSite]:
        return {s.id: s for s in self.sites}


@dataclass(frozen=True)
class RegionalBalance:
    region: Region
    cell: Cell
    regional_headroom: float
    industrial_need: float
    balance: float
    unmet_industrial_need: float
    point_need: float = 0.0
    nonpoint_need: float = 0.0

    @property
    def network_shortfall(self) -> float:
        return max(-self.regional_headroom, 0.0)

    @property
    def shortfall(self) -> float:
        return max(-self.balance, 0.0)


def regional_balance(dataset: Dataset, outcomes: Iterable[AllocationOutcome] | None,
                     region: Region, cell: Cell) -> RegionalBalance:
    """Signed headroom against non-negative industrial need for one region.

    The unmet need is the part of the industrial need that the region's
    positive headroom cannot cover; a region with no headroom leaves all of
    it unmet.
    """
    if not isinstance(region, Region):
        region = Region.parse(region)
    headroom = math.fsum(s.headroom_at(cell.year, cell.scenario)
                         for s in dataset.substations if s.region is region)
    if outcomes is None:
        point = [s.need(cell.year, cell.pathway) for s in dataset.sites if s.region is region]
    else:
        sites = dataset.site_map
        point = [o.demand_mw for o in outcomes if sites[o.site_id].region is region]
    point_need = math.fsum(max(p, 0.0) for p in point)
    nonpoint_need = math.fsum(max(d.need(cell.year, cell.pathway), 0.0)
                              for d in dataset.nonpoint if d.region is region)
    need = point_need + nonpoint_need
    return RegionalBalance(
        region=region,
        cell=cell,
        regional_headroom=headroom,
        industrial_need=need,
        balance=headroom - need,
        unmet_industrial_need=max(need - max(headroom, 0.0), 0.0),
        point_need=point_need,
        nonpoint_need=nonpoint_need,
    )


@dataclass(frozen=True)
class GBSummary:
    cell: Cell
    total_headroom: float
    network_shortfall: float
    total_shortfall: float
    industrial_need_total: float
    unmet_industrial_need: float
    point_source_constrained_capacity: float
    point_source_industrial_constrained: float
    nearest_substation_shortfall: float
    reason_counts: Mapping[ConstraintReason, int]
    n_sites: int

    @property
    def total_capacity_need(self) -> float:
        """Network shortfall plus industrial need the network cannot serve."""
        return self.network_shortfall + self.unmet_industrial_need

    @property
    def point_source_total_need(self) -> float:
        return self.point_source_industrial_constrained + self.nearest_substation_shortfall

    @property
    def constrained_count(self) -> int:
        return self.n_sites - self.reason_counts[ConstraintReason.UNCONSTRAINED]

    @property
    def constrained_fraction(self) -> float:
        return self.constrained_count / self.n_sites if self.n_sites else 0.0


def gb_summary(balances: Sequence[RegionalBalance], outcomes: Sequence[AllocationOutcome], cell: Cell,
               substations: Mapping[str, Substation] | None = None) -> GBSummary:
    """GB totals for one cell. Shortfalls rectify per region; nothing nets across regions."""
    by_region = {b.region: b for b in balances}
    missing = [r.value for r in Region if r not in by_region]
    if missing:
        raise AnalysisError(f"missing regional balance for {', '.join(missing)}")
    ordered = [by_region[r] for r in Region]
    counts = Counter({r: 0 for r in ConstraintReason})
    counts.update(o.reason for o in outcomes)
    nearest = 0.0
    if substations is not None:
        used = sorted({o.substation_id for o in outcomes})
        nearest = math.fsum(max(-substations[s].headroom_at(cell.year, cell.scenario), 0.0) for s in used)
    return GBSummary(
        cell=cell,
        total_headroom=math.fsum(b.regional_headroom for b in ordered),
        network_shortfall=math.fsum(b.network_shortfall for b in ordered),
        total_shortfall=math.fsum(b.shortfall for b in ordered),
        industrial_need_total=math.fsum(b.industrial_need for b in ordered),
        unmet_industrial_need=math.fsum(b.unmet_industrial_need for b in ordered),
        point_source_constrained_capacity=math.fsum(o.constrained_mw for o in outcomes),
        point_source_industrial_constrained=math.fsum(min(o.constrained_mw, max(o.demand_mw, 0.0))
                                                      for o in outcomes),
        nearest_substation_shortfall=nearest,
        reason_counts=dict(counts),
        n_sites=len(outcomes),
    )


@dataclass(frozen=True)
class EmissionsAtRisk:
    at_risk: float
    total: float

    @property
    def share(self) -> float | None:
        return self.at_risk / self.total if self.total > 0 else None


def _emissions(site: PointSite, pathway: Pathway, baseline: bool) -> float | None:
    return site.emissions_2024 if baseline else site.emissions_2030.get(pathway)


def emissions_at_risk(sites: Iterable[PointSite], outcomes: Iterable[AllocationOutcome], pathway: Pathway,
                      *, baseline: bool = False) -> EmissionsAtRisk:
    """Emissions of the sites an outcome set marks as constrained.

    Uses each site's 2030 emissions under ``pathway``; ``baseline=True``
    switches to 2024 emissions.
    """
    constrained = {o.site_id for o in outcomes if o.reason.constrained}
    at_risk, total = [], []
    for site in sites:
        value = _emissions(site, pathway, baseline)
        if value is None:
            if site.id in constrained:
                raise AnalysisError(f"no emissions data for constrained site {site.id}")
            continue
        total.append(value)
        if site.id in constrained:
            at_risk.append(value)
    return EmissionsAtRisk(math.fsum(at_risk), math.fsum(total))


class LocationType(enum.Enum):
    CLUSTER = "Cluster"
    DISPERSED = "Dispersed"


@dataclass(frozen=True)
class ClusterCatalog:
    clusters: tuple[tuple[str, GeoPoint], ...]
    threshold_km: float = DEFAULT_CLUSTER_KM

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        if not self.threshold_km > 0:
            raise AnalysisError(f"cluster threshold must be positive, got {self.threshold_km}")

    @classmethod
    def from_csv(cls, path, threshold_km: float = DEFAULT_CLUSTER_KM) -> "ClusterCatalog":
        with open(path, newline="", encoding="utf-8-sig") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple((r["name"], GeoPoint(float(r["lat"]), float(r["lon"]))) for r in rows), threshold_km)


def classify_site_location(site, catalog: ClusterCatalog) -> LocationType:
    """Dispersed when every cluster centroid is at least the threshold away."""
    if not catalog.clusters:
        raise AnalysisError("cluster catalog is empty")
    point = site if isinstance(site, GeoPoint) else site.location
    nearest = min(haversine_distance(point, centroid) for _, centroid in catalog.clusters)
    return LocationType.DISPERSED if nearest >= catalog.threshold_km else LocationType.CLUSTER


def sector_constrained_share(sites: Iterable[PointSite], outcomes: Iterable[AllocationOutcome],
                             pathway: Pathway) -> dict[Sector, float | None]:
    """Per sector, constrained sites' 2030 emissions over all point-source 2030 emissions.

    Sectors without emissions map to None rather than 0.
    """
    constrained = {o.site_id for o in outcomes if o.reason.constrained}
    totals = {s: [] for s in Sector}
    hits = {s: [] for s in Sector}
    for site in sites:
        value = site.emissions_2030.get(pathway)
        if value is None:
            continue
        totals[site.sector].append(value)
        if site.id in constrained:
            hits[site.sector].append(value)
    out = {}
    for sector in Sector:
        total = math.fsum(totals[sector])
        out[sector] = math.fsum(hits[sector]) / total if total > 0 else None
    return out


@dataclass(frozen=True)
class SiteStats:
    constrained: int
    by_location: Mapping[LocationType, int]
    constrained_by_location: Mapping[LocationType, int]
    emissions_2030: EmissionsAtRisk
    emissions_2024: EmissionsAtRisk


@dataclass(frozen=True)
class CellResult:
    cell: Cell
    outcomes: tuple[AllocationOutcome, ...]
    balances: tuple[RegionalBalance, ...]
    summary: GBSummary
    stats: SiteStats
    sector_shares: Mapping[Sector, float | None]


@dataclass(frozen=True)
class SensitivityRow:
    year: HorizonYear
    scenario: NetworkScenario
    pathway: Pathway
    delta_constrained_points: float
    delta_constrained_mw: float
    delta_emissions_2024_at_risk: float


@dataclass
class MatrixConfig:
    cells: Sequence[Cell] | None = None
    catalog: ClusterCatalog | None = None
    jobs: int = 1


@dataclass
class MatrixResult:
    assignment: dict[str, str]
    distances: dict[str, float]
    locations: dict[str, LocationType]
    cells: list[CellResult] = field(default_factory=list)

    def cell(self, cell: Cell) -> CellResult:
        for r in self.cells:
            if r.cell == cell:
                return r
        raise KeyError(cell)

    def sensitivity(self) -> list[SensitivityRow]:
        """Change of each alternative pathway against Balanced in the same year and network scenario."""
        index = {r.cell: r for r in self.cells}
        rows = []
        for r in self.cells:
            base = index.get(Cell(r.cell.year, r.cell.scenario, Pathway.BALANCED))
            if r.cell.pathway is Pathway.BALANCED or base is None:
                continue
            rows.append(SensitivityRow(
                r.cell.year, r.cell.scenario, r.cell.pathway,
                100.0 * (r.summary.constrained_fraction - base.summary.constrained_fraction),
                r.summary.point_source_constrained_capacity - base.summary.point_source_constrained_capacity,
                r.stats.emissions_2024.at_risk - base.stats.emissions_2024.at_risk,
            ))
        return rows


def _sorted_outcomes(outcomes, sites: Mapping[str, PointSite]) -> tuple:
    region_order = {r: i for i, r in enumerate(Region)}
    return tuple(sorted(outcomes, key=lambda o: (region_order[sites[o.site_id].region], o.site_id)))


def evaluate_cell(dataset: Dataset, assignment: Mapping[str, str], cell: Cell,
                  locations: Mapping[str, LocationType] | None = None) -> CellResult:
    outcomes = allocate_cell(dataset.sites, assignment, dataset.substation_map, cell)
    outcomes = _sorted_outcomes(outcomes, dataset.site_map)
    balances = tuple(regional_balance(dataset, outcomes, r, cell) for r in Region)
    summary = gb_summary(balances, outcomes, cell, dataset.substation_map)
    locations = locations or {}
    by_loc = Counter({t: 0 for t in LocationType})
    hit_loc = Counter({t: 0 for t in LocationType})
    for o in outcomes:
        loc = locations.get(o.site_id)
        if loc is not None:
            by_loc[loc] += 1
            if o.reason.constrained:
                hit_loc[loc] += 1
    has_2024 = any(s.emissions_2024 is not None for s in dataset.sites)
    has_2030 = any(cell.pathway in s.emissions_2030 for s in dataset.sites)
    stats = SiteStats(
        constrained=summary.constrained_count,
        by_location=dict(by_loc),
        constrained_by_location=dict(hit_loc),
        emissions_2030=(emissions_at_risk(dataset.sites, outcomes, cell.pathway)
                        if has_2030 else EmissionsAtRisk(0.0, 0.0)),
        emissions_2024=(emissions_at_risk(dataset.sites, outcomes, cell.pathway, baseline=True)
                        if has_2024 else EmissionsAtRisk(0.0, 0.0)),
    )
    shares = sector_constrained_share(dataset.sites, outcomes, cell.pathway)
    return CellResult(cell, outcomes, balances, summary, stats, shares)


def run_matrix(dataset: Dataset, config: MatrixConfig | None = None) -> MatrixResult:
    """Assign every site once, then allocate and aggregate each requested cell.

    Cells are independent and run on ``config.jobs`` threads; results keep the
    canonical cell order whatever the parallelism.
    """
    config = config or MatrixConfig()
    if not dataset.substations:
        raise AnalysisError("dataset has no substations")
    index = SubstationIndex(dataset.substations)
    assignment = assign_all(dataset.sites, index)
    subs = dataset.substation_map
    distances = {s.id: haversine_distance(s.location, subs[assignment[s.id]].location) for s in dataset.sites}
    locations = {}
    if config.catalog is not None and config.catalog.clusters:
        locations = {s.id: classify_site_location(s, config.catalog) for s in dataset.sites}

    cells = list(scenario_grid()) if config.cells is None else list(config.cells)
    if config.jobs > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(lambda c: evaluate_cell(dataset, assignment, c, locations), cells))
    else:
        results = [evaluate_cell(dataset, assignment, c, locations) for c in cells]
    return MatrixResult(assignment, distances, locations, results)
