"""Cluster-quality scoring.

Two families: classical validity indices (Calinski–Harabasz and
Davies–Bouldin, both evaluated on road-corrected distances rather than
Euclidean feature space) and the mileage objectives AMPM/ATPM, which blend
centroid travel with within-cluster pairwise travel using the
visitation-consistency coefficient γ.

Weighting of the pairwise term is configurable: ``additive`` uses (γ, 1+γ)
and ``complement`` uses (γ, 1−γ).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clustering import ClusterAssignment
from .geo import DistanceMatrix
from .ingest import Discipline


class CentroidMissing(Exception):
    """A cluster has no attached centroid caregiver."""


class UndefinedForSingleCluster(Exception):
    """Index requires at least two clusters."""


class UndefinedDegenerate(Exception):
    """Zero within-cluster dispersion makes the index undefined."""


class CoincidentCentroids(Exception):
    """Two cluster centroids share a location."""


@dataclass(frozen=True)
class MetricsReport:
    discipline: Discipline
    ampm: float
    atpm: float
    ch: float | None
    db: float | None
    gamma_used: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "discipline": self.discipline.value,
            "ampm": self.ampm,
            "atpm": self.atpm,
            "ch": self.ch,
            "db": self.db,
            "gamma_used": list(self.gamma_used),
        }


def _per_cluster_gamma(gamma: float | Sequence[float], C: int) -> list[float]:
    gammas = [float(gamma)] * C if np.isscalar(gamma) else [float(g) for g in gamma]
    if len(gammas) != C:
        raise ValueError(f"expected {C} per-cluster gamma values, got {len(gammas)}")
    if any(not 0.0 <= g <= 1.0 for g in gammas):
        raise ValueError("gamma values must lie in [0, 1]")
    return gammas


def _pair_weight(g: float, weighting: str) -> float:
    if weighting == "additive":
        return 1.0 + g
    if weighting == "complement":
        return 1.0 - g
    raise ValueError(f"unknown gamma weighting {weighting!r}")


def _centroid_id(assignment: ClusterAssignment, k: int) -> str:
    if assignment.centroid_of is None or k not in assignment.centroid_of:
        raise CentroidMissing(f"cluster {k} has no centroid caregiver")
    return assignment.centroid_of[k]


def _cluster_terms(
    assignment: ClusterAssignment, D: DistanceMatrix, k: int, members: list[str]
) -> tuple[float, float, int]:
    """(sum of member→centroid distances, sum over ordered member pairs, size)."""
    centroid = _centroid_id(assignment, k)
    centroid_sum = sum(D.between(pid, centroid) for pid in members)
    pair_sum = sum(
        D.between(a, b) for a in members for b in members if a != b
    )
    return centroid_sum, pair_sum, len(members)


def _mileage(
    assignment: ClusterAssignment,
    D: DistanceMatrix,
    gamma: float | Sequence[float],
    weighting: str,
    averaged: bool,
) -> float:
    if assignment.C < 1:
        raise ValueError("metric undefined for zero clusters")
    gammas = _per_cluster_gamma(gamma, assignment.C)
    total = 0.0
    for k, members in enumerate(assignment.members):
        centroid_sum, pair_sum, size = _cluster_terms(assignment, D, k, members)
        if averaged:
            centroid_term = centroid_sum / size
            pair_term = pair_sum / (size * (size - 1)) if size > 1 else 0.0
        else:
            centroid_term, pair_term = centroid_sum, pair_sum
        total += gammas[k] * centroid_term + _pair_weight(gammas[k], weighting) * pair_term
    return total / assignment.C


def ampm(
    assignment: ClusterAssignment,
    D: DistanceMatrix,
    gamma: float | Sequence[float],
    weighting: str = "additive",
) -> float:
    """Average of the mean pairwise mileage across clusters.

    Per cluster: γ_k times the mean member→centroid distance plus the pair
    weight times the mean over ordered member pairs (0 for singletons).
    """
    return _mileage(assignment, D, gamma, weighting, averaged=True)


def atpm(
    assignment: ClusterAssignment,
    D: DistanceMatrix,
    gamma: float | Sequence[float],
    weighting: str = "additive",
) -> float:
    """Average of the total pairwise mileage across clusters (sums, not means)."""
    return _mileage(assignment, D, gamma, weighting, averaged=False)


def calinski_harabasz(
    assignment: ClusterAssignment, D: DistanceMatrix, n_total_patients: int
) -> float:
    """Dispersion ratio: centroid-distance mass against within-cluster
    pairwise mass, degree-of-freedom corrected."""
    if assignment.C < 2:
        raise UndefinedForSingleCluster("need at least two clusters")
    between_sum = 0.0
    within_sum = 0.0
    for k, members in enumerate(assignment.members):
        centroid_sum, pair_sum, _ = _cluster_terms(assignment, D, k, members)
        between_sum += centroid_sum
        within_sum += pair_sum
    if within_sum <= 0.0:
        raise UndefinedDegenerate("zero within-cluster dispersion")
    return (between_sum / (assignment.C - 1)) * ((n_total_patients - assignment.C) / within_sum)


def davies_bouldin(assignment: ClusterAssignment, D: DistanceMatrix) -> float:
    """Worst-pair similarity averaged over clusters: R_uv compares two
    clusters' mean centroid distances against their centroid separation."""
    if assignment.C < 2:
        raise UndefinedForSingleCluster("need at least two clusters")
    scatter = []
    centroid_ids = []
    for k, members in enumerate(assignment.members):
        centroid_sum, _, size = _cluster_terms(assignment, D, k, members)
        scatter.append(centroid_sum / size)
        centroid_ids.append(_centroid_id(assignment, k))
    total = 0.0
    for u in range(assignment.C):
        worst = 0.0
        for v in range(assignment.C):
            if v == u:
                continue
            sep = D.between(centroid_ids[u], centroid_ids[v])
            if sep <= 0.0:
                raise CoincidentCentroids(f"clusters {u} and {v} share a centroid location")
            worst = max(worst, (scatter[u] + scatter[v]) / sep)
        total += worst
    return total / assignment.C


def percent_decrease(current: float, proposed: float) -> float:
    """Relative improvement of ``proposed`` over ``current``, in percent."""
    if current <= 0:
        raise ValueError(f"current must be positive, got {current}")
    return 100.0 * (current - proposed) / current


def metrics_report(
    assignment: ClusterAssignment,
    D: DistanceMatrix,
    gamma: float | Sequence[float],
    weighting: str = "additive",
) -> MetricsReport:
    """All four scores for one assignment; validity indices fall back to
    None where they are undefined (single cluster, degenerate geometry)."""
    gammas = tuple(_per_cluster_gamma(gamma, assignment.C))
    try:
        ch = calinski_harabasz(assignment, D, len(assignment.patient_ids))
    except (UndefinedForSingleCluster, UndefinedDegenerate):
        ch = None
    try:
        db = davies_bouldin(assignment, D)
    except (UndefinedForSingleCluster, CoincidentCentroids):
        db = None
    return MetricsReport(
        discipline=assignment.discipline,
        ampm=ampm(assignment, D, gammas, weighting),
        atpm=atpm(assignment, D, gammas, weighting),
        ch=ch,
        db=db,
        gamma_used=gammas,
    )
