"""Baseline construction and weekly patient allocation.

A baseline pins each cluster to a caregiver (greedy globally-nearest
matching on cluster medoids).  Incoming patients are then allocated by
1-nearest-neighbor against the baseline's training points, with an
exclusion-retry loop that removes overloaded caregivers' clusters from the
index and re-places only the affected patients.

`exact_small_oracle` solves the underlying arc-flow program by enumeration
on instances of at most 8 nodes, for verifying the heuristic pipeline.
"""

from __future__ import annotations

import datetime as dt
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence, TextIO

import numpy as np

from .clustering import ClusterAssignment, SpectralParams
from .geo import DistanceMatrix, GeoPoint, corrected_distance, haversine_miles
from .ingest import Discipline, InstanceModel, Patient

log = logging.getLogger(__name__)


class CardinalityError(Exception):
    """Cluster count and caregiver count differ."""


class NoFeasibleAllocation(Exception):
    """Every caregiver was excluded before a feasible allocation emerged."""


class TooLarge(Exception):
    """Instance exceeds the exact oracle's node cap."""


class Infeasible(Exception):
    """No assignment satisfies the working-hours constraints."""


class FeasibilityStatus(str, Enum):
    FEASIBLE = "Feasible"
    BELOW_MIN = "BelowMin"
    ABOVE_MAX = "AboveMax"


@dataclass(frozen=True)
class Baseline:
    """A tuned clustering with caregivers attached, ready to allocate against."""

    discipline: Discipline
    assignment: ClusterAssignment
    training_points: tuple[GeoPoint, ...]
    caregivers: tuple[tuple[str, GeoPoint], ...]
    created_at: str
    params_used: SpectralParams

    def __post_init__(self) -> None:
        if len(self.training_points) != len(self.assignment.patient_ids):
            raise ValueError("training points do not align with the assignment")
        centroid_of = self.assignment.centroid_of
        if centroid_of is None:
            raise ValueError("baseline requires centroid_of to be filled")
        caregiver_ids = {cid for cid, _ in self.caregivers}
        if set(centroid_of) != set(range(self.assignment.C)) or len(
            set(centroid_of.values())
        ) != self.assignment.C or not set(centroid_of.values()) <= caregiver_ids:
            raise ValueError("centroid_of must be a bijection between clusters and caregivers")

    @cached_property
    def extrapolation_threshold(self) -> float:
        """95th percentile of each training point's nearest-neighbor distance."""
        points = self.training_points
        if len(points) < 2:
            return math.inf
        nn = [
            min(haversine_miles(p, q) for j, q in enumerate(points) if j != i)
            for i, p in enumerate(points)
        ]
        return float(np.percentile(nn, 95))

    def to_dict(self) -> dict:
        return {
            "discipline": self.discipline.value,
            "assignment": self.assignment.to_dict(),
            "training": [
                {"id": pid, "lat": p.latitude, "lon": p.longitude, "cluster": lab}
                for pid, p, lab in zip(
                    self.assignment.patient_ids, self.training_points, self.assignment.labels
                )
            ],
            "centroid_of": {str(k): v for k, v in (self.assignment.centroid_of or {}).items()},
            "caregivers": [
                {"id": cid, "lat": p.latitude, "lon": p.longitude} for cid, p in self.caregivers
            ],
            "created_at": self.created_at,
            "params": self.params_used.to_dict(),
            "seed": self.assignment.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Baseline":
        params = SpectralParams.from_dict(raw["params"])
        training = raw["training"]
        assignment = ClusterAssignment(
            discipline=Discipline(raw["discipline"]),
            C=int(raw["assignment"]["C"]),
            labels=tuple(int(t["cluster"]) for t in training),
            patient_ids=tuple(t["id"] for t in training),
            params=params,
            seed=int(raw["seed"]),
            centroid_of={int(k): v for k, v in raw["centroid_of"].items()},
        )
        return cls(
            discipline=Discipline(raw["discipline"]),
            assignment=assignment,
            training_points=tuple(GeoPoint(t["lat"], t["lon"]) for t in training),
            caregivers=tuple(
                (c["id"], GeoPoint(c["lat"], c["lon"])) for c in raw["caregivers"]
            ),
            created_at=raw["created_at"],
            params_used=params,
        )


@dataclass
class AllocationDecision:
    """Patient → caregiver mapping plus bookkeeping from the retry loop."""

    assignments: dict[str, str]
    workloads: dict[str, float] = field(default_factory=dict)
    extrapolated: dict[str, bool] = field(default_factory=dict)
    retry_round: dict[str, int] = field(default_factory=dict)

    def to_csv(self, stream: TextIO) -> None:
        stream.write("patient_id,caregiver_id,extrapolated,retry_round\n")
        for pid, cid in self.assignments.items():
            flag = "true" if self.extrapolated.get(pid, False) else "false"
            stream.write(f"{pid},{cid},{flag},{self.retry_round.get(pid, 0)}\n")


@dataclass(frozen=True)
class FeasibilityEntry:
    status: FeasibilityStatus
    workload: float
    hours_min: float
    hours_max: float


@dataclass(frozen=True)
class FeasibilityReport:
    entries: dict[str, FeasibilityEntry]

    @property
    def violations(self) -> list[str]:
        return [
            cid
            for cid, e in self.entries.items()
            if e.status is not FeasibilityStatus.FEASIBLE
        ]

    def to_dict(self) -> dict:
        return {
            cid: {
                "status": e.status.value,
                "workload": e.workload,
                "hours_min": e.hours_min,
                "hours_max": e.hours_max,
            }
            for cid, e in self.entries.items()
        }


def _cluster_medoid(members: list[str], D: DistanceMatrix) -> str:
    """Member minimizing total distance to the rest; lowest index on ties."""
    best_id, best_total = members[0], math.inf
    for pid in members:
        total = sum(D.between(pid, other) for other in members if other != pid)
        if total < best_total - 1e-12:
            best_id, best_total = pid, total
    return best_id


def attach_centroids(
    clusters: ClusterAssignment,
    caregivers: Sequence[tuple[str, GeoPoint]],
    D: DistanceMatrix,
    patients: Sequence[tuple[str, GeoPoint]],
    created_at: str | None = None,
) -> Baseline:
    """Match caregivers to clusters greedily by distance to cluster medoids.

    The closest unmatched (caregiver, medoid) pair is fixed first, then the
    next, until the bijection is complete.
    """
    if clusters.C != len(caregivers):
        raise CardinalityError(
            f"{clusters.C} clusters cannot be matched to {len(caregivers)} caregivers"
        )
    point_of = dict(patients)
    if set(clusters.patient_ids) - set(point_of):
        raise ValueError("patients must cover every clustered id")
    medoids = [_cluster_medoid(members, D) for members in clusters.members]
    pairs = sorted(
        (
            (D.between(cid, medoids[k]), ci, k)
            for ci, (cid, _) in enumerate(caregivers)
            for k in range(clusters.C)
        ),
        key=lambda t: (t[0], t[1], t[2]),
    )
    centroid_of: dict[int, str] = {}
    used_caregivers: set[int] = set()
    for _, ci, k in pairs:
        if k in centroid_of or ci in used_caregivers:
            continue
        centroid_of[k] = caregivers[ci][0]
        used_caregivers.add(ci)
        if len(centroid_of) == clusters.C:
            break
    assignment = ClusterAssignment(
        discipline=clusters.discipline,
        C=clusters.C,
        labels=clusters.labels,
        patient_ids=clusters.patient_ids,
        params=clusters.params,
        seed=clusters.seed,
        centroid_of=centroid_of,
    )
    stamp = created_at or dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    return Baseline(
        discipline=clusters.discipline,
        assignment=assignment,
        training_points=tuple(point_of[pid] for pid in clusters.patient_ids),
        caregivers=tuple(caregivers),
        created_at=stamp,
        params_used=clusters.params,
    )


def _nearest_training_index(
    baseline: Baseline, p: GeoPoint, excluded_clusters: frozenset[int] = frozenset()
) -> tuple[int, float]:
    best_idx, best_dist = -1, math.inf
    for i, (point, label) in enumerate(zip(baseline.training_points, baseline.assignment.labels)):
        if label in excluded_clusters:
            continue
        d = haversine_miles(p, point)
        if d < best_dist - 1e-12:
            best_idx, best_dist = i, d
    if best_idx < 0:
        raise NoFeasibleAllocation("no training points remain after exclusions")
    return best_idx, best_dist


def allocate_patient(
    baseline: Baseline, p: GeoPoint, excluded_clusters: frozenset[int] = frozenset()
) -> str:
    """Caregiver of the cluster whose training point lies nearest to ``p``.

    Ties break toward the lowest training-point index.
    """
    idx, _ = _nearest_training_index(baseline, p, excluded_clusters)
    label = baseline.assignment.labels[idx]
    assert baseline.assignment.centroid_of is not None
    return baseline.assignment.centroid_of[label]


def check_feasibility(
    decision: AllocationDecision,
    instance: InstanceModel,
    gamma: float,
    extra_patients: dict[str, Patient] | None = None,
) -> FeasibilityReport:
    """Weekly workload per caregiver against the [W_min, W_max] window.

    Workload = Σ μ_i·l_i over assigned patients plus a travel-hour estimate:
    visits × (2γ · mean home-leg + (1−γ) · mean inter-patient leg) × t̄.
    The tour itself stays unscheduled; the estimate prices the expected leg
    mix instead of a fixed route.
    """
    extra = extra_patients or {}
    patient_of: dict[str, Patient] = {p.id: p for p in instance.patients}
    caregiver_of = {c.id: c for c in instance.caregivers}
    known = set(instance.distance.labels)

    def dist(pid: str, other: str, fallback_a: GeoPoint, fallback_b: GeoPoint) -> float:
        if pid in known and other in known:
            return instance.distance.between(pid, other)
        return corrected_distance(fallback_a, fallback_b, instance.road_coeff)

    assigned: dict[str, list[Patient]] = {cid: [] for cid in caregiver_of}
    for pid, cid in decision.assignments.items():
        if cid not in caregiver_of:
            raise ValueError(f"unknown caregiver {cid!r} in decision")
        patient = patient_of.get(pid) or extra.get(pid)
        if patient is None:
            raise ValueError(f"unknown patient {pid!r} in decision")
        assigned[cid].append(patient)

    entries: dict[str, FeasibilityEntry] = {}
    for cid, caregiver in caregiver_of.items():
        members = assigned[cid]
        service = sum(p.weekly_visits * p.visit_length for p in members)
        travel = 0.0
        if members:
            visits = sum(p.weekly_visits for p in members)
            home_legs = [
                dist(p.id, cid, p.location, caregiver.home) for p in members
            ]
            mean_home = sum(home_legs) / len(home_legs)
            pair_legs = [
                dist(a.id, b.id, a.location, b.location)
                for a in members
                for b in members
                if a.id != b.id
            ]
            mean_pair = sum(pair_legs) / len(pair_legs) if pair_legs else 0.0
            travel = visits * (2.0 * gamma * mean_home + (1.0 - gamma) * mean_pair) * instance.travel_rate
        workload = service + travel
        if workload > caregiver.hours_max + 1e-9:
            status = FeasibilityStatus.ABOVE_MAX
        elif workload < caregiver.hours_min - 1e-9:
            status = FeasibilityStatus.BELOW_MIN
        else:
            status = FeasibilityStatus.FEASIBLE
        entries[cid] = FeasibilityEntry(status, workload, caregiver.hours_min, caregiver.hours_max)
    return FeasibilityReport(entries)


def run_weekly_allocation(
    baseline: Baseline,
    new_patients: Sequence[Patient],
    instance: InstanceModel,
    gamma: float,
    max_retries: int | None = None,
) -> tuple[AllocationDecision, FeasibilityReport, int]:
    """Allocate a week's incoming patients, excluding overloaded caregivers.

    Patients land on their 1-NN cluster's caregiver; any caregiver above
    W_max has their cluster dropped from the index and only their patients
    are re-placed.  Caregivers below W_min are warned about, not excluded —
    taking work away cannot raise their hours.
    """
    assert baseline.assignment.centroid_of is not None
    centroid_of = baseline.assignment.centroid_of
    if max_retries is None:
        max_retries = len(baseline.caregivers)
    extra = {p.id: p for p in new_patients}
    threshold = baseline.extrapolation_threshold

    excluded: set[int] = set()
    decision = AllocationDecision(assignments={})

    def place(patient: Patient) -> None:
        idx, d = _nearest_training_index(baseline, patient.location, frozenset(excluded))
        label = baseline.assignment.labels[idx]
        decision.assignments[patient.id] = centroid_of[label]
        decision.extrapolated[patient.id] = bool(d > threshold)

    for patient in new_patients:
        place(patient)
        decision.retry_round[patient.id] = 0

    retries = 0
    while True:
        report = check_feasibility(decision, instance, gamma, extra)
        for cid in report.entries:
            if report.entries[cid].status is FeasibilityStatus.BELOW_MIN:
                log.warning("caregiver %s below minimum hours (%.2f < %.2f)", cid, report.entries[cid].workload, report.entries[cid].hours_min)
        overloaded = [
            cid for cid, e in report.entries.items() if e.status is FeasibilityStatus.ABOVE_MAX
        ]
        if not overloaded or retries >= max_retries:
            break
        excluded.update(k for k, cid in centroid_of.items() if cid in overloaded)
        if len(excluded) >= baseline.assignment.C:
            raise NoFeasibleAllocation("every caregiver's cluster has been excluded")
        retries += 1
        affected = [p for p in new_patients if decision.assignments[p.id] in overloaded]
        for patient in affected:
            place(patient)
            decision.retry_round[patient.id] = retries

    decision.workloads = {cid: e.workload for cid, e in report.entries.items()}
    return decision, report, retries


# --- exact small-instance oracle ------------------------------------------

ORACLE_NODE_CAP = 8


@dataclass(frozen=True)
class OracleSolution:
    decision: AllocationDecision
    arcs: dict[str, tuple[tuple[str, str], ...]]
    objective: float


def _held_karp_tour(nodes: list[str], dist) -> tuple[float, list[tuple[str, str]]]:
    """Minimum circuit home → all nodes → home; nodes[0] is the home."""
    home, stops = nodes[0], nodes[1:]
    m = len(stops)
    if m == 0:
        return 0.0, []
    full = (1 << m) - 1
    dp = {(1 << i, i): (dist(home, stops[i]), -1) for i in range(m)}
    for mask in range(1, full + 1):
        for last in range(m):
            if not mask & (1 << last) or (mask, last) not in dp:
                continue
            base, _ = dp[(mask, last)]
            for nxt in range(m):
                if mask & (1 << nxt):
                    continue
                cand = base + dist(stops[last], stops[nxt])
                key = (mask | (1 << nxt), nxt)
                if key not in dp or cand < dp[key][0] - 1e-12:
                    dp[key] = (cand, last)
    best_cost, best_last = math.inf, -1
    for last in range(m):
        cost = dp[(full, last)][0] + dist(stops[last], home)
        if cost < best_cost - 1e-12:
            best_cost, best_last = cost, last
    order = []
    mask, last = full, best_last
    while last != -1:
        order.append(stops[last])
        _, prev = dp[(mask, last)]
        mask &= ~(1 << last)
        last = prev
    order.reverse()
    path = [home] + order + [home]
    return best_cost, list(zip(path[:-1], path[1:]))


def _solve_caregiver_routes(
    caregiver_id: str,
    members: tuple[str, ...],
    instance: InstanceModel,
    lo: float,
    hi: float,
) -> tuple[float, tuple[tuple[str, str], ...]] | None:
    """Cheapest binary arc set serving ``members`` with travel cost in [lo, hi].

    Arc sets must give each patient in-degree equal to μ, balance flow at
    every node, and stay connected through the caregiver.  Returns None when
    no such set exists.
    """
    D = instance.distance
    dist = D.between
    if not members:
        return (0.0, ()) if lo <= 0.0 else None
    mu = {p.id: p.weekly_visits for p in instance.patients if p.id in members}

    if all(m == 1 for m in mu.values()) and lo <= 1e-9:
        cost, arcs = _held_karp_tour([caregiver_id, *members], dist)
        return (cost, tuple(arcs)) if cost <= hi + 1e-9 else None

    ids = list(members)
    n = len(ids)
    for pid in ids:
        if mu[pid] > n:  # needs more distinct predecessors than nodes exist
            return None
    options: list[list[tuple[tuple[str, ...], float]]] = []
    for pid in ids:
        candidates = [caregiver_id] + [q for q in ids if q != pid]
        opts = []
        for combo in itertools.combinations(candidates, mu[pid]):
            opts.append((combo, sum(dist(i, pid) for i in combo)))
        opts.sort(key=lambda t: t[1])
        options.append(opts)

    best: tuple[float, tuple[tuple[str, str], ...]] | None = None

    def finish(arc_list: list[tuple[str, str]], appearances: dict[str, int], cost: float):
        nonlocal best
        arcs = list(arc_list)
        for pid in ids:
            deficit = mu[pid] - appearances.get(pid, 0)
            if deficit not in (0, 1):
                return
            if deficit == 1:
                arcs.append((pid, caregiver_id))
                cost += dist(pid, caregiver_id)
        if cost < lo - 1e-9 or cost > hi + 1e-9:
            return
        if best is not None and cost >= best[0] - 1e-12:
            return
        # connectivity through the caregiver
        adjacency: dict[str, set[str]] = {}
        for a, b in arcs:
            adjacency.setdefault(a, set()).add(b)
            adjacency.setdefault(b, set()).add(a)
        if caregiver_id not in adjacency:
            return
        seen = {caregiver_id}
        frontier = [caregiver_id]
        while frontier:
            node = frontier.pop()
            for neighbor in adjacency.get(node, ()):
                if neighbor not in seen:
                    seen.add(neighbor)
                    frontier.append(neighbor)
        if not set(ids) <= seen:
            return
        best = (cost, tuple(arcs))

    def dfs(idx: int, arc_list: list[tuple[str, str]], appearances: dict[str, int], cost: float):
        if best is not None and cost >= best[0] - 1e-12:
            return
        if cost > hi + 1e-9:
            return
        if idx == n:
            finish(arc_list, appearances, cost)
            return
        pid = ids[idx]
        for combo, combo_cost in options[idx]:
            ok = True
            for origin in combo:
                if origin != caregiver_id and appearances.get(origin, 0) + 1 > mu[origin]:
                    ok = False
                    break
            if not ok:
                continue
            for origin in combo:
                if origin != caregiver_id:
                    appearances[origin] = appearances.get(origin, 0) + 1
                arc_list.append((origin, pid))
            dfs(idx + 1, arc_list, appearances, cost + combo_cost)
            for origin in combo:
                if origin != caregiver_id:
                    appearances[origin] -= 1
                arc_list.pop()

    dfs(0, [], {}, 0.0)
    return best


def route_assignment(
    instance: InstanceModel, assignments: dict[str, str]
) -> tuple[dict[str, tuple[tuple[str, str], ...]], float]:
    """Optimal arc routing for a fixed patient→caregiver assignment.

    Raises Infeasible when some caregiver's subproblem has no hour-feasible
    arc set.
    """
    patient_of = {p.id: p for p in instance.patients}
    groups: dict[str, list[str]] = {c.id: [] for c in instance.caregivers}
    for pid, cid in assignments.items():
        if pid not in patient_of or cid not in groups:
            raise ValueError(f"assignment references unknown ids ({pid!r} → {cid!r})")
        groups[cid].append(pid)
    arcs: dict[str, tuple[tuple[str, str], ...]] = {}
    total = 0.0
    for caregiver in instance.caregivers:
        members = tuple(sorted(groups[caregiver.id]))
        service = sum(
            patient_of[pid].weekly_visits * patient_of[pid].visit_length for pid in members
        )
        lo = (caregiver.hours_min - service) / instance.travel_rate
        hi = (caregiver.hours_max - service) / instance.travel_rate
        solved = _solve_caregiver_routes(caregiver.id, members, instance, lo, hi)
        if solved is None:
            raise Infeasible(f"caregiver {caregiver.id} has no hour-feasible route")
        cost, caregiver_arcs = solved
        arcs[caregiver.id] = caregiver_arcs
        total += cost
    return arcs, total


def exact_small_oracle(instance: InstanceModel, node_cap: int = ORACLE_NODE_CAP) -> OracleSolution:
    """Exhaustive optimum of the weekly assignment-and-routing program.

    Enumerates every patient→caregiver map, solves each caregiver's arc
    subproblem exactly, filters by working hours, and returns the cheapest
    total mileage.  Only instances of at most ``node_cap`` nodes are
    accepted.
    """
    n_nodes = len(instance.patients) + len(instance.caregivers)
    if n_nodes > node_cap:
        raise TooLarge(f"{n_nodes} nodes exceed the oracle cap of {node_cap}")
    if not instance.caregivers:
        raise ValueError("instance has no caregivers")

    patient_ids = [p.id for p in instance.patients]
    patient_of = {p.id: p for p in instance.patients}
    caregiver_ids = [c.id for c in instance.caregivers]
    caregiver_of = {c.id: c for c in instance.caregivers}
    memo: dict[tuple[str, tuple[str, ...]], tuple[float, tuple[tuple[str, str], ...]] | None] = {}

    def solve(cid: str, members: tuple[str, ...]):
        key = (cid, members)
        if key not in memo:
            caregiver = caregiver_of[cid]
            service = sum(
                patient_of[pid].weekly_visits * patient_of[pid].visit_length for pid in members
            )
            lo = (caregiver.hours_min - service) / instance.travel_rate
            hi = (caregiver.hours_max - service) / instance.travel_rate
            memo[key] = _solve_caregiver_routes(cid, members, instance, lo, hi)
        return memo[key]

    best_total = math.inf
    best_assignment: dict[str, str] | None = None
    best_arcs: dict[str, tuple[tuple[str, str], ...]] = {}
    for combo in itertools.product(caregiver_ids, repeat=len(patient_ids)):
        groups: dict[str, list[str]] = {cid: [] for cid in caregiver_ids}
        for pid, cid in zip(patient_ids, combo):
            groups[cid].append(pid)
        total = 0.0
        arcs: dict[str, tuple[tuple[str, str], ...]] = {}
        feasible = True
        for cid in caregiver_ids:
            solved = solve(cid, tuple(groups[cid]))
            if solved is None:
                feasible = False
                break
            total += solved[0]
            arcs[cid] = solved[1]
            if total >= best_total - 1e-12:
                feasible = False
                break
        if feasible and total < best_total - 1e-12:
            best_total = total
            best_assignment = dict(zip(patient_ids, combo))
            best_arcs = arcs
    if best_assignment is None:
        raise Infeasible("no assignment satisfies the working-hours constraints")
    return OracleSolution(
        decision=AllocationDecision(assignments=best_assignment),
        arcs=best_arcs,
        objective=best_total,
    )
