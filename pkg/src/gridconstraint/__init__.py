"""Electricity-network headroom constraints on industrial decarbonisation."""

from .allocation import (
    AllocationOutcome,
    ConstraintReason,
    allocate_cell,
    allocate_substation,
    constrained_capacity,
    oracle_allocate,
)
from .analysis import (
    ClusterCatalog,
    Dataset,
    MatrixConfig,
    classify_site_location,
    emissions_at_risk,
    gb_summary,
    regional_balance,
    run_matrix,
    sector_constrained_share,
)
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
from .geo import SubstationIndex, assign_all, haversine_distance, nearest_substation
from .ingest import annual_energy_to_capacity, ingest_headroom, ingest_sites, mva_to_mw

__version__ = "0.1.0"
