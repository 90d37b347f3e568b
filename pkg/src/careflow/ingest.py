"""Visit-record ingestion: parsing, train/test splitting, visitation-consistency
profiles, instance assembly, and synthetic dataset generation.

The input CSV schema is::

    caregiver_id,patient_id,discipline,visit_date,visit_length_hours,
    origin_lat,origin_lon,dest_lat,dest_lon,leg_kind

Each row is one travel leg.  A leg whose origin or destination is the
caregiver's home is a ``HomeLeg``; legs between two patient locations are
``PatientLeg``.  A leg counts as a visit to ``patient_id`` when its
destination is not the caregiver's home (return trips revisit nobody).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, TextIO

import numpy as np

from .config import Config
from .geo import DistanceMatrix, GeoPoint, build_distance_matrix

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "caregiver_id",
    "patient_id",
    "discipline",
    "visit_date",
    "visit_length_hours",
    "origin_lat",
    "origin_lon",
    "dest_lat",
    "dest_lon",
    "leg_kind",
)

# Coordinates are matched up to this many decimal degrees when inferring
# home/patient locations (≈ 0.4 inches at the equator).
_COORD_DECIMALS = 7


class SchemaError(Exception):
    """CSV header is missing required columns."""


class EmptyDataset(Exception):
    """CSV contained no data rows."""


class NoTravelData(Exception):
    """No records available for the requested discipline."""


class NoCaregivers(Exception):
    """Instance assembly found no caregiver with an inferable home."""


class Discipline(str, Enum):
    RN = "RN"
    PT = "PT"
    PTA = "PTA"
    CNA = "CNA"
    LPN = "LPN"
    OT = "OT"
    COTA = "COTA"
    CH = "CH"
    SLP = "SLP"
    MSW = "MSW"
    BSW = "BSW"


class LegKind(str, Enum):
    HOME = "HomeLeg"
    PATIENT = "PatientLeg"


_LEG_ALIASES = {
    "homeleg": LegKind.HOME,
    "home": LegKind.HOME,
    "home_leg": LegKind.HOME,
    "patientleg": LegKind.PATIENT,
    "patient": LegKind.PATIENT,
    "patient_leg": LegKind.PATIENT,
}


@dataclass(frozen=True)
class VisitRecord:
    """One travel leg from the agency's visit log."""

    caregiver_id: str
    patient_id: str
    discipline: Discipline
    visit_date: dt.date
    visit_length: float
    origin: GeoPoint
    destination: GeoPoint
    leg_kind: LegKind

    def __post_init__(self) -> None:
        if self.visit_length <= 0:
            raise ValueError(f"visit_length must be positive, got {self.visit_length}")


@dataclass(frozen=True)
class GammaProfile:
    """Visitation-consistency coefficients for one discipline."""

    discipline: Discipline
    n_total: int
    n_home: int
    gamma_curr: float
    gamma_lim: float

    def __post_init__(self) -> None:
        if self.n_home > self.n_total:
            raise ValueError("n_home exceeds n_total")
        if not 0.0 <= self.gamma_curr <= 1.0:
            raise ValueError("gamma_curr outside [0, 1]")
        if not 0.0 <= self.gamma_lim <= 1.0:
            raise ValueError("gamma_lim outside [0, 1]")


@dataclass(frozen=True)
class Patient:
    id: str
    location: GeoPoint
    weekly_visits: int
    visit_length: float

    def __post_init__(self) -> None:
        if self.weekly_visits < 1:
            raise ValueError(f"weekly_visits must be >= 1, got {self.weekly_visits}")
        if self.visit_length <= 0:
            raise ValueError(f"visit_length must be positive, got {self.visit_length}")


@dataclass(frozen=True)
class Caregiver:
    id: str
    home: GeoPoint
    hours_min: float
    hours_max: float

    def __post_init__(self) -> None:
        if self.hours_min > self.hours_max:
            raise ValueError(f"hours_min {self.hours_min} exceeds hours_max {self.hours_max}")


@dataclass(frozen=True)
class InstanceModel:
    """A per-discipline allocation instance: who must be visited, by whom,
    how often, and at what travel cost."""

    discipline: Discipline
    patients: tuple[Patient, ...]
    caregivers: tuple[Caregiver, ...]
    distance: DistanceMatrix
    travel_rate: float
    road_coeff: float = 1.285

    def __post_init__(self) -> None:
        if self.travel_rate <= 0:
            raise ValueError("travel_rate must be positive")
        if self.road_coeff <= 0:
            raise ValueError("road_coeff must be positive")
        ids = [p.id for p in self.patients] + [c.id for c in self.caregivers]
        if len(set(ids)) != len(ids):
            raise ValueError("patient and caregiver ids must be unique across the instance")
        if set(ids) != set(self.distance.labels):
            raise ValueError("distance labels do not cover patients ∪ caregivers")

    @property
    def patient_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.patients)

    @property
    def caregiver_ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.caregivers)


@dataclass
class ParseStats:
    """Row-level accounting from one parse pass."""

    total_rows: int = 0
    dropped: int = 0
    reasons: Counter = field(default_factory=Counter)


def parse_visit_records(source: TextIO | str, stats: ParseStats | None = None) -> list[VisitRecord]:
    """Parse the visit-log CSV, dropping (and counting) malformed rows.

    Raises SchemaError when required columns are missing and EmptyDataset
    when the file has no data rows.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise EmptyDataset("no rows in input")
    missing = [col for col in CSV_COLUMNS if col not in reader.fieldnames]
    if missing:
        raise SchemaError(f"missing required columns: {', '.join(missing)}")

    stats = stats if stats is not None else ParseStats()
    records: list[VisitRecord] = []
    for line_no, row in enumerate(reader, start=2):
        stats.total_rows += 1
        try:
            records.append(_parse_row(row))
        except (ValueError, KeyError) as exc:
            stats.dropped += 1
            reason = str(exc)
            stats.reasons[reason] += 1
            log.warning("dropped row %d: %s", line_no, reason)
    if stats.total_rows == 0:
        raise EmptyDataset("no data rows in input")
    if stats.dropped:
        log.info("parsed %d rows, dropped %d", stats.total_rows, stats.dropped)
    return records


def _parse_row(row: dict) -> VisitRecord:
    try:
        discipline = Discipline(row["discipline"].strip())
    except ValueError:
        raise ValueError(f"unknown discipline {row['discipline']!r}")
    leg_raw = row["leg_kind"].strip().lower()
    if leg_raw not in _LEG_ALIASES:
        raise ValueError(f"unknown leg_kind {row['leg_kind']!r}")
    return VisitRecord(
        caregiver_id=row["caregiver_id"].strip(),
        patient_id=row["patient_id"].strip(),
        discipline=discipline,
        visit_date=dt.date.fromisoformat(row["visit_date"].strip()),
        visit_length=float(row["visit_length_hours"]),
        origin=GeoPoint(float(row["origin_lat"]), float(row["origin_lon"])),
        destination=GeoPoint(float(row["dest_lat"]), float(row["dest_lon"])),
        leg_kind=_LEG_ALIASES[leg_raw],
    )


def records_to_csv(records: Iterable[VisitRecord], stream: TextIO) -> None:
    """Serialize records back to the documented CSV schema."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(
            [
                rec.caregiver_id,
                rec.patient_id,
                rec.discipline.value,
                rec.visit_date.isoformat(),
                repr(rec.visit_length),
                repr(rec.origin.latitude),
                repr(rec.origin.longitude),
                repr(rec.destination.latitude),
                repr(rec.destination.longitude),
                rec.leg_kind.value,
            ]
        )


def split_train_test(
    records: Sequence[VisitRecord], cutoff_date: dt.date
) -> tuple[list[VisitRecord], list[VisitRecord]]:
    """Chronological split: train strictly before the cutoff, test on/after."""
    if not records:
        raise ValueError("cannot split an empty record list")
    train = [r for r in records if r.visit_date < cutoff_date]
    test = [r for r in records if r.visit_date >= cutoff_date]
    if not train:
        log.warning("cutoff %s precedes every record; training side is empty", cutoff_date)
    if not test:
        log.warning("cutoff %s follows every record; test side is empty", cutoff_date)
    return train, test


def compute_gamma(records: Sequence[VisitRecord], reduction: float = 0.2) -> GammaProfile:
    """Visitation-consistency profile for one discipline's records.

    gamma_curr is the share of travel legs that touch the caregiver's home;
    gamma_lim scales it down by ``reduction`` (default 20%).
    """
    if not records:
        raise NoTravelData("no records for discipline")
    if not 0.0 <= reduction <= 1.0:
        raise ValueError(f"reduction must lie in [0, 1], got {reduction}")
    disciplines = {r.discipline for r in records}
    if len(disciplines) != 1:
        raise ValueError(f"records span multiple disciplines: {sorted(d.value for d in disciplines)}")
    n_total = len(records)
    n_home = sum(1 for r in records if r.leg_kind is LegKind.HOME)
    gamma_curr = n_home / n_total
    return GammaProfile(
        discipline=next(iter(disciplines)),
        n_total=n_total,
        n_home=n_home,
        gamma_curr=gamma_curr,
        gamma_lim=(1.0 - reduction) * gamma_curr,
    )


def _coord_key(point: GeoPoint) -> tuple[float, float]:
    return (round(point.latitude, _COORD_DECIMALS), round(point.longitude, _COORD_DECIMALS))


def _modal_coordinate(counts: Counter) -> tuple[float, float]:
    # Highest count wins; ties go to the numerically smallest (lat, lon).
    best = max(counts.items(), key=lambda kv: (kv[1], (-kv[0][0], -kv[0][1])))
    return best[0]


def build_instance(records: Sequence[VisitRecord], discipline: Discipline, config: Config) -> InstanceModel:
    """Assemble an allocation instance from one discipline's training records.

    Caregiver homes are inferred as the modal endpoint of each caregiver's
    home legs; patient locations as the modal non-home endpoint of the
    patient's legs.  Weekly visit demand is the mean count over a patient's
    active weeks, rounded up; service length is the mean over their visits.
    """
    discipline = Discipline(discipline)
    recs = [r for r in records if r.discipline is discipline]
    if not recs:
        raise NoCaregivers(f"no records (hence no caregivers) for discipline {discipline.value}")

    home_counts: dict[str, Counter] = defaultdict(Counter)
    for r in recs:
        if r.leg_kind is LegKind.HOME:
            home_counts[r.caregiver_id][_coord_key(r.origin)] += 1
            home_counts[r.caregiver_id][_coord_key(r.destination)] += 1
    homes = {cid: _modal_coordinate(counts) for cid, counts in home_counts.items()}
    if not homes:
        raise NoCaregivers(f"no caregiver with an inferable home for {discipline.value}")
    skipped = {r.caregiver_id for r in recs} - set(homes)
    if skipped:
        log.warning("caregivers without home legs skipped: %s", ", ".join(sorted(skipped)))

    patient_coord_counts: dict[str, Counter] = defaultdict(Counter)
    visit_weeks: dict[str, Counter] = defaultdict(Counter)
    lengths: dict[str, list[float]] = defaultdict(list)
    for r in recs:
        home = homes.get(r.caregiver_id)
        # Destinations weigh double: the visited patient is where the leg
        # ends, while the origin may be a previously visited neighbor.
        for endpoint, weight in ((r.origin, 1), (r.destination, 2)):
            key = _coord_key(endpoint)
            if key != home:
                patient_coord_counts[r.patient_id][key] += weight
        if _coord_key(r.destination) != home:
            iso = r.visit_date.isocalendar()
            visit_weeks[r.patient_id][(iso[0], iso[1])] += 1
            lengths[r.patient_id].append(r.visit_length)

    patients = []
    for pid in sorted(patient_coord_counts):
        lat, lon = _modal_coordinate(patient_coord_counts[pid])
        weeks = visit_weeks.get(pid)
        if weeks:
            mu = math.ceil(sum(weeks.values()) / len(weeks))
            length = sum(lengths[pid]) / len(lengths[pid])
        else:
            mu, length = 1, float(np.mean([r.visit_length for r in recs if r.patient_id == pid]))
        patients.append(Patient(pid, GeoPoint(lat, lon), mu, length))

    caregivers = [
        Caregiver(cid, GeoPoint(*homes[cid]), config.hours_min, config.hours_max)
        for cid in sorted(homes)
    ]
    points = [(p.id, p.location) for p in patients] + [(c.id, c.home) for c in caregivers]
    return InstanceModel(
        discipline=discipline,
        patients=tuple(patients),
        caregivers=tuple(caregivers),
        distance=build_distance_matrix(points, config.road_coeff),
        travel_rate=config.travel_rate,
        road_coeff=config.road_coeff,
    )


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic visit-log generator."""

    n_caregivers: int
    n_patients: int
    cluster_spread: float
    region: tuple[float, float, float, float]  # lat_min, lat_max, lon_min, lon_max
    weeks: int
    discipline: Discipline = Discipline.RN
    n_centers: int | None = None
    min_center_separation: float | None = None

    def __post_init__(self) -> None:
        if self.n_caregivers < 1 or self.n_patients < 1:
            raise ValueError("n_caregivers and n_patients must be positive")
        if self.weeks < 1:
            raise ValueError("weeks must be positive")
        if self.cluster_spread <= 0:
            raise ValueError("cluster_spread must be positive")
        lat_min, lat_max, lon_min, lon_max = self.region
        if lat_max <= lat_min or lon_max <= lon_min:
            raise ValueError("region box has zero area")
        if self.n_centers is not None and self.n_centers < 1:
            raise ValueError("n_centers must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        region = raw["region"]
        box = (
            float(region["lat_min"]),
            float(region["lat_max"]),
            float(region["lon_min"]),
            float(region["lon_max"]),
        )
        return cls(
            n_caregivers=int(raw["n_caregivers"]),
            n_patients=int(raw["n_patients"]),
            cluster_spread=float(raw["cluster_spread"]),
            region=box,
            weeks=int(raw["weeks"]),
            discipline=Discipline(raw.get("discipline", "RN")),
            n_centers=int(raw["n_centers"]) if "n_centers" in raw else None,
            min_center_separation=(
                float(raw["min_center_separation"]) if "min_center_separation" in raw else None
            ),
        )


@dataclass(frozen=True)
class SyntheticTruth:
    """Planted structure behind a synthetic dataset."""

    centers: tuple[GeoPoint, ...]
    patient_center: dict[str, int]
    caregiver_homes: dict[str, GeoPoint]


_SYNTH_START = dt.date(2019, 7, 1)  # a Monday


def generate_synthetic_dataset(
    config: SynthConfig, seed: int
) -> tuple[list[VisitRecord], SyntheticTruth]:
    """Deterministically synthesize a visit log with planted patient clusters.

    Patients scatter normally around planted centers; each caregiver serves
    the patients of one center, touring them weekday by weekday so the log
    carries a realistic mix of home and patient-to-patient legs.
    """
    rng = np.random.default_rng(seed)
    lat_min, lat_max, lon_min, lon_max = config.region
    n_centers = config.n_centers if config.n_centers is not None else config.n_caregivers

    margin = 2.0 * config.cluster_spread
    lat_lo, lat_hi = lat_min + margin, lat_max - margin
    lon_lo, lon_hi = lon_min + margin, lon_max - margin
    if lat_hi <= lat_lo or lon_hi <= lon_lo:
        lat_lo, lat_hi, lon_lo, lon_hi = lat_min, lat_max, lon_min, lon_max

    centers: list[GeoPoint] = []
    for _ in range(10_000):
        lat = float(rng.uniform(lat_lo, lat_hi))
        lon = float(rng.uniform(lon_lo, lon_hi))
        if config.min_center_separation is not None and any(
            math.hypot(lat - c.latitude, lon - c.longitude) < config.min_center_separation
            for c in centers
        ):
            continue
        centers.append(GeoPoint(lat, lon))
        if len(centers) == n_centers:
            break
    if len(centers) < n_centers:
        raise ValueError("could not place centers with the requested separation")

    def jitter(center: GeoPoint) -> GeoPoint:
        lat = float(np.clip(center.latitude + rng.normal(0, config.cluster_spread), lat_min, lat_max))
        lon = float(np.clip(center.longitude + rng.normal(0, config.cluster_spread), lon_min, lon_max))
        return GeoPoint(lat, lon)

    width = len(str(config.n_caregivers))
    caregiver_ids = [f"c{str(i).zfill(width)}" for i in range(config.n_caregivers)]
    caregiver_homes = {
        cid: jitter(centers[i % n_centers]) for i, cid in enumerate(caregiver_ids)
    }
    center_caregivers: dict[int, list[str]] = defaultdict(list)
    for i, cid in enumerate(caregiver_ids):
        center_caregivers[i % n_centers].append(cid)

    pwidth = len(str(config.n_patients))
    patient_ids = [f"p{str(i).zfill(pwidth)}" for i in range(config.n_patients)]
    patient_center = {pid: i % n_centers for i, pid in enumerate(patient_ids)}
    patient_location = {pid: jitter(centers[patient_center[pid]]) for pid in patient_ids}
    weekly_visits = {pid: int(rng.integers(1, 4)) for pid in patient_ids}
    visit_length = {pid: round(float(rng.uniform(0.5, 2.0)), 2) for pid in patient_ids}
    patient_caregiver = {}
    for center_idx in range(n_centers):
        pool = center_caregivers.get(center_idx) or [caregiver_ids[center_idx % config.n_caregivers]]
        members = [pid for pid in patient_ids if patient_center[pid] == center_idx]
        for j, pid in enumerate(members):
            patient_caregiver[pid] = pool[j % len(pool)]

    # (caregiver, date) -> ordered patient tour
    tours: dict[tuple[str, dt.date], list[str]] = defaultdict(list)
    for pid in patient_ids:
        for week in range(config.weeks):
            days = sorted(rng.choice(5, size=weekly_visits[pid], replace=False).tolist())
            for day in days:
                date = _SYNTH_START + dt.timedelta(days=7 * week + day)
                tours[(patient_caregiver[pid], date)].append(pid)

    records: list[VisitRecord] = []
    for (cid, date), tour in sorted(tours.items()):
        home = caregiver_homes[cid]
        stops = [patient_location[pid] for pid in tour]
        path = [home] + stops + [home]
        for i, pid in enumerate(tour + [tour[-1]]):
            origin, destination = path[i], path[i + 1]
            is_home = i == 0 or i == len(tour)
            records.append(
                VisitRecord(
                    caregiver_id=cid,
                    patient_id=pid,
                    discipline=config.discipline,
                    visit_date=date,
                    visit_length=visit_length[pid],
                    origin=origin,
                    destination=destination,
                    leg_kind=LegKind.HOME if is_home else LegKind.PATIENT,
                )
            )
    truth = SyntheticTruth(tuple(centers), patient_center, caregiver_homes)
    return records, truth
