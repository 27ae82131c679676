"""Constrained-capacity rule and smallest-first headroom allocation."""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .core import Cell, PointSite, Substation
from .geo import haversine_distance


class ConstraintReason(enum.Enum):
    UNCONSTRAINED = "Unconstrained"
    SUBSTATION_ALREADY_CONSTRAINED = "SubstationAlreadyConstrained"
    INSUFFICIENT_HEADROOM = "InsufficientHeadroom"

    @property
    def constrained(self) -> bool:
        return self is not ConstraintReason.UNCONSTRAINED

    def __str__(self) -> str:
        return self.value


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class AllocationOutcome:
    site_id: str
    substation_id: str
    demand_mw: float
    constrained_mw: float
    reason: ConstraintReason
    cell: Cell | None = None
    distance_km: float | None = None
    headroom_before_mw: float | None = None


@dataclass
class SubstationLedger:
    substation_id: str
    initial_headroom: float
    remaining_headroom: float = None
    processed: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.remaining_headroom is None:
            self.remaining_headroom = self.initial_headroom

    def consume(self, site_id: str, demand: float) -> None:
        self.remaining_headroom -= demand
        self.processed.append(site_id)


def constrained_capacity(p: float, headroom: float) -> float:
    """Capacity a site cannot get from its substation.

    Positive headroom absorbs demand up to its size; negative headroom adds its
    deficit to the demand. Zero headroom or non-positive demand gives 0.
    """
    if headroom > 0 and p > 0:
        return max(p - headroom, 0.0)
    if headroom < 0 and p > 0:
        return abs(headroom) + p
    return 0.0


def _classify(p: float, remaining: float) -> tuple[float, ConstraintReason]:
    if p <= 0:
        return 0.0, ConstraintReason.UNCONSTRAINED
    if remaining <= 0:
        # At exactly zero headroom the site still needs all of p; the literal
        # rule's "otherwise" branch would report 0 here.
        amount = p if remaining == 0 else constrained_capacity(p, remaining)
        return amount, ConstraintReason.SUBSTATION_ALREADY_CONSTRAINED
    amount = constrained_capacity(p, remaining)
    if amount > 0:
        return amount, ConstraintReason.INSUFFICIENT_HEADROOM
    return 0.0, ConstraintReason.UNCONSTRAINED


def allocate_substation(
    headroom: float,
    demands: Sequence[tuple[str, float]],
    *,
    substation_id: str = "",
    cell: Cell | None = None,
    ledger: SubstationLedger | None = None,
) -> list[AllocationOutcome]:
    """Allocate one substation's headroom to its sites, smallest demand first.

    Sites with non-positive demand are unconstrained and leave the headroom
    untouched. Every other site is judged against the headroom remaining when
    it is reached, and then the full demand is deducted whether or not it fit.
    Outcomes come back in processing order.
    """
    ids = [sid for sid, _ in demands]
    if len(set(ids)) != len(ids):
        raise AllocationError(f"duplicate site id in demands for substation {substation_id!r}")
    if ledger is None:
        ledger = SubstationLedger(substation_id, headroom)

    outcomes = []
    idle = sorted((d for d in demands if d[1] <= 0), key=lambda d: d[0])
    for sid, p in idle:
        outcomes.append(AllocationOutcome(sid, substation_id, p, 0.0, ConstraintReason.UNCONSTRAINED,
                                          cell, headroom_before_mw=ledger.remaining_headroom))
    active = sorted((d for d in demands if d[1] > 0), key=lambda d: (d[1], d[0]))
    for sid, p in active:
        before = ledger.remaining_headroom
        amount, reason = _classify(p, before)
        outcomes.append(AllocationOutcome(sid, substation_id, p, amount, reason, cell, headroom_before_mw=before))
        ledger.consume(sid, p)
    return outcomes


def allocate_cell(
    sites: Iterable[PointSite],
    assignment: Mapping[str, str],
    substations: Mapping[str, Substation],
    cell: Cell,
    *,
    ledgers: dict[str, SubstationLedger] | None = None,
) -> list[AllocationOutcome]:
    """Run the per-substation allocation for every site group in one cell.

    Each substation starts from its own headroom for the cell's year and
    network scenario; nothing carries over between cells. Result order is by
    substation id, then processing order.
    """
    groups: dict[str, list[PointSite]] = defaultdict(list)
    for site in sites:
        try:
            sub_id = assignment[site.id]
        except KeyError:
            raise AllocationError(f"site {site.id} has no substation assignment") from None
        if sub_id not in substations:
            raise AllocationError(f"site {site.id} assigned to unknown substation {sub_id!r}")
        groups[sub_id].append(site)

    outcomes = []
    for sub_id in sorted(groups):
        sub = substations[sub_id]
        members = {s.id: s for s in groups[sub_id]}
        ledger = SubstationLedger(sub_id, sub.headroom_at(cell.year, cell.scenario))
        if ledgers is not None:
            ledgers[sub_id] = ledger
        demands = [(s.id, s.need(cell.year, cell.pathway)) for s in groups[sub_id]]
        for o in allocate_substation(ledger.initial_headroom, demands, substation_id=sub_id, cell=cell,
                                     ledger=ledger):
            dist = haversine_distance(members[o.site_id].location, sub.location)
            outcomes.append(AllocationOutcome(o.site_id, o.substation_id, o.demand_mw, o.constrained_mw,
                                              o.reason, cell, dist, o.headroom_before_mw))
    return outcomes


ORACLE_LIMIT = 20


def oracle_allocate(headroom: float, demands: Sequence) -> tuple:
    """Largest subset of positive demands that fits inside the headroom.

    Exhaustive enumeration, for checking the greedy allocator on small cases.
    ``demands`` holds plain numbers or (id, demand) pairs; the indices of the
    chosen demands are returned.
    """
    values = [d[1] if isinstance(d, tuple) else d for d in demands]
    if len(values) > ORACLE_LIMIT:
        raise AllocationError(f"oracle limited to {ORACLE_LIMIT} demands, got {len(values)}")
    positive = [i for i, v in enumerate(values) if v > 0]
    if headroom <= 0:
        return ()
    for size in range(len(positive), 0, -1):
        for subset in combinations(positive, size):
            if sum(values[i] for i in subset) <= headroom:
                return subset
    return ()
