"""Domain types, enumerations and the scenario grid shared across the engine."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from itertools import product
from types import MappingProxyType
from typing import Iterator, Mapping, NamedTuple


class DataError(ValueError):
    """An input value falls outside a closed domain (unknown label, bad range)."""


def _norm(label: str) -> str:
    return re.sub(r"[^a-z0-9]", "", str(label).lower().replace("&", "and"))


class _LabelledEnum(enum.Enum):
    """Enum whose members parse from loosely formatted labels."""

    @classmethod
    def aliases(cls) -> dict[str, str]:
        return {}

    @classmethod
    def parse(cls, label):
        if isinstance(label, cls):
            return label
        key = _norm(label)
        for member in cls:
            if key in (_norm(member.name), _norm(member.value)):
                return member
        alias = cls.aliases().get(key)
        if alias is not None:
            return cls[alias]
        raise DataError(f"unknown {cls.__name__} {label!r}")

    def __str__(self) -> str:
        return str(self.value)


class NetworkScenario(_LabelledEnum):
    FALLING_SHORT = "FallingShort"
    CONSUMER_TRANSFORMATION = "ConsumerTransformation"
    LEADING_THE_WAY = "LeadingTheWay"

    @classmethod
    def aliases(cls):
        # Steady Progression is treated as the same business-as-usual scenario.
        return {"steadyprogression": "FALLING_SHORT"}


class Pathway(_LabelledEnum):
    BALANCED = "Balanced"
    NO_REEE = "NoREEE"
    MAX_ELECTRIFICATION = "MaxElectrification"

    @classmethod
    def aliases(cls):
        return {
            "noresourceandenergyefficiency": "NO_REEE",
            "maxelec": "MAX_ELECTRIFICATION",
        }


class HorizonYear(enum.IntEnum):
    Y2024 = 2024
    Y2030 = 2030
    Y2040 = 2040
    Y2050 = 2050

    @classmethod
    def baseline(cls) -> "HorizonYear":
        return cls.Y2024

    @classmethod
    def future(cls) -> tuple["HorizonYear", ...]:
        return tuple(y for y in cls if y is not cls.Y2024)

    @classmethod
    def parse(cls, value) -> "HorizonYear":
        if isinstance(value, cls):
            return value
        try:
            return cls(int(str(value).strip().lstrip("Yy")))
        except ValueError:
            raise DataError(f"unknown HorizonYear {value!r}") from None

    def __str__(self) -> str:
        return str(int(self))


class Region(_LabelledEnum):
    NORTH_EAST = "North East"
    NORTH_WEST = "North West"
    YORKSHIRE_AND_THE_HUMBER = "Yorkshire and The Humber"
    EAST_MIDLANDS = "East Midlands"
    WEST_MIDLANDS = "West Midlands"
    EAST_OF_ENGLAND = "East of England"
    LONDON = "London"
    SOUTH_EAST = "South East"
    SOUTH_WEST = "South West"
    WALES = "Wales"
    SCOTLAND = "Scotland"

    @classmethod
    def aliases(cls):
        return {
            "yorkshireandhumber": "YORKSHIRE_AND_THE_HUMBER",
            "yorkshire": "YORKSHIRE_AND_THE_HUMBER",
            "eastern": "EAST_OF_ENGLAND",
            "eastofengland": "EAST_OF_ENGLAND",
        }


class Sector(_LabelledEnum):
    IRON_AND_STEEL = "Iron and Steel"
    CHEMICALS = "Chemicals"
    CEMENT_AND_LIME = "Cement and Lime"
    FOOD_AND_DRINK = "Food and Drink"
    GLASS = "Glass"
    PAPER = "Paper"
    OTHER_MINERALS = "Other Minerals"
    NON_FERROUS_METALS = "Non-Ferrous Metals"
    VEHICLES = "Vehicles"
    OTHER_INDUSTRY = "Other Industry"

    @classmethod
    def aliases(cls):
        return {
            "ironsteel": "IRON_AND_STEEL",
            "foodanddrinks": "FOOD_AND_DRINK",
            "cementlime": "CEMENT_AND_LIME",
            "cement": "CEMENT_AND_LIME",
            "paperandpulp": "PAPER",
            "pulpandpaper": "PAPER",
            "nonferrous": "NON_FERROUS_METALS",
        }


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise DataError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= lat <= 90.0:
            raise DataError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise DataError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


class Cell(NamedTuple):
    """One analysis cell of the study matrix."""

    year: HorizonYear
    scenario: NetworkScenario
    pathway: Pathway

    @property
    def key(self) -> str:
        return f"{int(self.year)}_{self.scenario.value}_{self.pathway.value}"

    @classmethod
    def parse(cls, key: str) -> "Cell":
        parts = re.split(r"[_:/]", key.strip())
        if len(parts) != 3:
            raise DataError(f"malformed cell key {key!r}")
        return cls(HorizonYear.parse(parts[0]), NetworkScenario.parse(parts[1]),
                   Pathway.parse(parts[2]))


@dataclass(frozen=True)
class ScenarioGrid:
    """The 27 analysis cells in canonical order, plus the baseline year."""

    baseline: HorizonYear
    cells: tuple[Cell, ...]

    def __iter__(self) -> Iterator[Cell]:
        return iter(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __getitem__(self, i):
        return self.cells[i]

    def __contains__(self, cell) -> bool:
        return tuple(cell) in {tuple(c) for c in self.cells}


def scenario_grid() -> ScenarioGrid:
    """Years ascending, then scenarios and pathways in declaration order."""
    cells = tuple(Cell(y, s, p) for y, s, p in product(HorizonYear.future(), NetworkScenario, Pathway))
    return ScenarioGrid(HorizonYear.baseline(), cells)


def _frozen(mapping) -> Mapping:
    return MappingProxyType(dict(mapping))


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DataError(f"{name} must be finite, got {value}")
    return value


def _check_emissions(name: str, value: float) -> float:
    value = _check_finite(name, value)
    if value < 0:
        raise DataError(f"{name} must be >= 0, got {value}")
    return value


MAX_VOLTAGE_KV = 66.0


@dataclass(frozen=True)
class Substation:
    id: str
    dno: str
    location: GeoPoint
    voltage_kv: float
    region: Region
    headroom: Mapping[tuple[HorizonYear, NetworkScenario], float] = field(repr=False)

    def __post_init__(self):
        if self.voltage_kv > MAX_VOLTAGE_KV:
            raise DataError(f"substation {self.id}: voltage {self.voltage_kv} kV above {MAX_VOLTAGE_KV:g} kV")
        cells = {}
        for (year, scenario), value in self.headroom.items():
            cells[(HorizonYear.parse(year), NetworkScenario.parse(scenario))] = _check_finite(
                f"headroom of {self.id}", value)
        missing = [(y, s) for y in HorizonYear for s in NetworkScenario if (y, s) not in cells]
        if missing:
            raise DataError(f"substation {self.id}: headroom missing for {len(missing)} cell(s)")
        object.__setattr__(self, "headroom", _frozen(cells))

    def headroom_at(self, year: HorizonYear, scenario: NetworkScenario) -> float:
        return self.headroom[(year, scenario)]


@dataclass(frozen=True)
class PointSite:
    id: str
    sector: Sector
    region: Region
    location: GeoPoint
    capacity_need: Mapping[tuple[HorizonYear, Pathway], float] = field(repr=False)
    emissions_2030: Mapping[Pathway, float] = field(default_factory=dict, repr=False)
    emissions_2024: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "capacity_need", _baseline_relative(self.id, self.capacity_need))
        object.__setattr__(self, "emissions_2030", _frozen(
            {Pathway.parse(p): _check_emissions("emissions_2030", v) for p, v in self.emissions_2030.items()}))
        if self.emissions_2024 is not None:
            object.__setattr__(self, "emissions_2024", _check_emissions("emissions_2024", self.emissions_2024))

    def need(self, year: HorizonYear, pathway: Pathway) -> float:
        return self.capacity_need[(year, pathway)]


@dataclass(frozen=True)
class RegionalNonPointDemand:
    region: Region
    sector: Sector
    capacity_need: Mapping[tuple[HorizonYear, Pathway], float] = field(repr=False)

    def __post_init__(self):
        label = f"non-point {self.region.value}/{self.sector.value}"
        object.__setattr__(self, "capacity_need", _baseline_relative(label, self.capacity_need))

    def need(self, year: HorizonYear, pathway: Pathway) -> float:
        return self.capacity_need[(year, pathway)]


def _baseline_relative(owner: str, needs) -> Mapping:
    out = {}
    for (year, pathway), value in needs.items():
        year, pathway = HorizonYear.parse(year), Pathway.parse(pathway)
        value = _check_finite(f"capacity need of {owner}", value)
        if year is HorizonYear.Y2024 and value != 0:
            raise DataError(f"{owner}: capacity need at the baseline year must be 0, got {value}")
        out[(year, pathway)] = value
    for pathway in Pathway:
        out.setdefault((HorizonYear.Y2024, pathway), 0.0)
    missing = [(y, p) for y in HorizonYear for p in Pathway if (y, p) not in out]
    if missing:
        raise DataError(f"{owner}: capacity need missing for {len(missing)} (year, pathway) cell(s)")
    return _frozen(out)
