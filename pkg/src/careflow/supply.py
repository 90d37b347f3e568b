"""Caregiver-supply sensitivity analysis.

What happens to the mileage objectives when the agency hires or loses
caregivers?  Scenarios perturb the caregiver pool (additions placed near
randomly sampled patients, removals drawn uniformly), replicated
re-clustering runs produce paired AMPM/ATPM samples, and the per-caregiver
average percentage change (APC) plus a paired t-test summarize each delta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.stats

from .allocation import Baseline, attach_centroids
from .clustering import SpectralParams, spectral_cluster
from .geo import MILES_PER_DEGREE, GeoPoint, build_distance_matrix
from .ingest import Caregiver, Discipline, InstanceModel
from .metrics import ampm, atpm

log = logging.getLogger(__name__)

SCENARIO_JITTER_MILES = 3.0


class DegenerateSamples(Exception):
    """Paired differences have zero variance; the t statistic is undefined."""

    def __init__(self, mean_diff: float):
        super().__init__(f"zero-variance differences (mean difference {mean_diff})")
        self.mean_diff = mean_diff


class MetricKind(str, Enum):
    AMPM = "AMPM"
    ATPM = "ATPM"


@dataclass(frozen=True)
class Scenario:
    """One caregiver-count perturbation."""

    discipline: Discipline
    delta: int
    placements: tuple[GeoPoint, ...]
    removed_ids: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if len(self.placements) != max(self.delta, 0):
            raise ValueError("placements must match positive delta")
        if len(self.removed_ids) != max(-self.delta, 0):
            raise ValueError("removed_ids must match negative delta")


@dataclass(frozen=True)
class APCReport:
    """Average percentage change of one metric per unit caregiver change."""

    discipline: Discipline
    metric: MetricKind
    baseline_value: float
    alt_value: float
    baseline_count: int
    alt_count: int
    apc: float

    def __post_init__(self) -> None:
        if self.baseline_count == self.alt_count:
            raise ValueError("caregiver counts must differ")


@dataclass(frozen=True)
class TTestResult:
    n: int
    mean_diff: float
    sd_diff: float
    t_stat: float
    df: int
    p_value: float
    significant: bool

    def __post_init__(self) -> None:
        if self.df != self.n - 1:
            raise ValueError("df must equal n − 1")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value outside [0, 1]")


def generate_scenario(instance: InstanceModel, delta: int, seed: int) -> Scenario:
    """Perturb the caregiver pool by ``delta``.

    Additions sample a patient uniformly and land within a 3-mile disk
    around them, weighting placement toward patient-dense areas; removals
    draw existing caregivers uniformly without replacement.
    """
    if delta == 0:
        raise ValueError("delta must be non-zero")
    rng = np.random.default_rng([seed, delta & 0xFFFF])
    placements: list[GeoPoint] = []
    removed: list[str] = []
    if delta > 0:
        for _ in range(delta):
            anchor = instance.patients[int(rng.integers(len(instance.patients)))].location
            radius = SCENARIO_JITTER_MILES * math.sqrt(float(rng.uniform()))
            bearing = float(rng.uniform(0.0, 2.0 * math.pi))
            dlat = radius * math.cos(bearing) / MILES_PER_DEGREE
            dlon = radius * math.sin(bearing) / (
                MILES_PER_DEGREE * max(math.cos(math.radians(anchor.latitude)), 1e-6)
            )
            placements.append(GeoPoint(anchor.latitude + dlat, anchor.longitude + dlon))
    else:
        if -delta >= len(instance.caregivers):
            raise ValueError("cannot remove every caregiver")
        picks = rng.choice(len(instance.caregivers), size=-delta, replace=False)
        removed = [instance.caregivers[int(i)].id for i in picks]
    return Scenario(
        discipline=instance.discipline,
        delta=delta,
        placements=tuple(placements),
        removed_ids=tuple(removed),
        seed=seed,
    )


def apply_scenario(instance: InstanceModel, scenario: Scenario) -> InstanceModel:
    """Instance with the scenario's caregiver pool; geometry rebuilt."""
    if scenario.discipline is not instance.discipline:
        raise ValueError("scenario discipline does not match instance")
    removed = set(scenario.removed_ids)
    caregivers = [c for c in instance.caregivers if c.id not in removed]
    template = instance.caregivers[0]
    existing = {c.id for c in instance.caregivers} | {p.id for p in instance.patients}
    for i, point in enumerate(scenario.placements):
        cid = f"added-{i}"
        while cid in existing:
            cid = f"added-{i}x"
        caregivers.append(Caregiver(cid, point, template.hours_min, template.hours_max))
    points = [(p.id, p.location) for p in instance.patients] + [
        (c.id, c.home) for c in caregivers
    ]
    return InstanceModel(
        discipline=instance.discipline,
        patients=instance.patients,
        caregivers=tuple(caregivers),
        distance=build_distance_matrix(points, instance.road_coeff),
        travel_rate=instance.travel_rate,
        road_coeff=instance.road_coeff,
    )


def apc(
    baseline_value: float,
    alt_value: float,
    baseline_count: int,
    alt_count: int,
    form: str = "normalized",
) -> float:
    """Average percentage change per unit change in caregiver count.

    ``normalized`` (default) reports the baseline-relative percent change
    divided by the absolute count difference; ``raw`` reports the plain
    metric difference per caregiver, in miles.
    """
    if baseline_count == alt_count:
        raise ValueError("caregiver counts must differ")
    if baseline_value <= 0:
        raise ValueError("baseline_value must be positive")
    span = abs(baseline_count - alt_count)
    if form == "normalized":
        return 100.0 * (alt_value - baseline_value) / baseline_value / span
    if form == "raw":
        return (baseline_value - alt_value) / span
    raise ValueError(f"unknown apc form {form!r}")


def paired_t_test(
    samples_a: Sequence[float], samples_b: Sequence[float], alpha: float = 0.05
) -> TTestResult:
    """Two-sided paired t-test on matched samples.

    Raises DegenerateSamples (carrying the mean difference) when the
    differences have zero variance, rather than faking a p-value.
    """
    if len(samples_a) != len(samples_b):
        raise ValueError("paired samples must have equal length")
    n = len(samples_a)
    if n < 2:
        raise ValueError("need at least two sample pairs")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    diffs = np.asarray(samples_a, dtype=float) - np.asarray(samples_b, dtype=float)
    mean_diff = float(diffs.mean())
    sd_diff = float(diffs.std(ddof=1))
    if sd_diff <= 0.0:
        raise DegenerateSamples(mean_diff)
    t_stat = mean_diff / (sd_diff / math.sqrt(n))
    df = n - 1
    p_value = float(2.0 * scipy.stats.t.sf(abs(t_stat), df))
    return TTestResult(
        n=n,
        mean_diff=mean_diff,
        sd_diff=sd_diff,
        t_stat=float(t_stat),
        df=df,
        p_value=p_value,
        significant=bool(p_value < alpha),
    )


@dataclass(frozen=True)
class SensitivityRow:
    delta: int
    metric: MetricKind
    baseline_mean: float
    alt_mean: float
    apc: float
    t_stat: float | None
    p_value: float
    significant: bool

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "metric": self.metric.value,
            "baseline_mean": self.baseline_mean,
            "alt_mean": self.alt_mean,
            "apc": self.apc,
            "t_stat": self.t_stat,
            "p_value": self.p_value,
            "significant": self.significant,
        }


@dataclass(frozen=True)
class SensitivityReport:
    discipline: Discipline
    replications: int
    alpha: float
    seed: int
    rows: tuple[SensitivityRow, ...]

    def to_dict(self) -> dict:
        return {
            "discipline": self.discipline.value,
            "replications": self.replications,
            "alpha": self.alpha,
            "seed": self.seed,
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SensitivityReport":
        return cls(
            discipline=Discipline(raw["discipline"]),
            replications=int(raw["replications"]),
            alpha=float(raw["alpha"]),
            seed=int(raw["seed"]),
            rows=tuple(
                SensitivityRow(
                    delta=int(r["delta"]),
                    metric=MetricKind(r["metric"]),
                    baseline_mean=float(r["baseline_mean"]),
                    alt_mean=float(r["alt_mean"]),
                    apc=float(r["apc"]),
                    t_stat=None if r["t_stat"] is None else float(r["t_stat"]),
                    p_value=float(r["p_value"]),
                    significant=bool(r["significant"]),
                )
                for r in raw["rows"]
            ),
        )


def _rep_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _params_for_count(params: SpectralParams, C_old: int, C_new: int, n: int) -> SpectralParams:
    """Carry tuned hyperparameters over to a different caregiver count:
    the embedding width follows the cluster count and the k-NN fan-out keeps
    its tuned multiple of C."""
    if C_old == C_new:
        return params
    multiple = max(1, min(10, round(params.knn_k / max(C_old, 1))))
    return replace(
        params,
        embed_dim=C_new,
        knn_k=max(1, min(multiple * C_new, n - 1)) if n > 1 else 1,
    )


def _metric_samples(
    instance: InstanceModel,
    params: SpectralParams,
    gamma: float,
    seed: int,
    weighting: str,
) -> tuple[float, float]:
    C = len(instance.caregivers)
    assignment = spectral_cluster(
        [p.location for p in instance.patients],
        C=C,
        params=params,
        seed=seed,
        discipline=instance.discipline,
        patient_ids=instance.patient_ids,
        distance=instance.distance.submatrix(instance.patient_ids),
    )
    baseline = attach_centroids(
        assignment,
        [(c.id, c.home) for c in instance.caregivers],
        instance.distance,
        [(p.id, p.location) for p in instance.patients],
        created_at="",
    )
    attached = baseline.assignment
    return (
        ampm(attached, instance.distance, gamma, weighting),
        atpm(attached, instance.distance, gamma, weighting),
    )


def run_sensitivity(
    instance: InstanceModel,
    baseline: Baseline,
    gamma: float,
    deltas: Sequence[int],
    replications: int = 100,
    alpha: float = 0.05,
    seed: int = 0,
    weighting: str = "additive",
    apc_form: str = "normalized",
) -> SensitivityReport:
    """Replicated supply analysis over caregiver-count deltas.

    Per delta, ``replications`` paired runs re-cluster the current and the
    perturbed instance under varying seeds (hyperparameters carried over
    from the baseline); each metric gets an APC value and a paired t-test
    against the replicate samples.
    """
    if replications < 2:
        raise ValueError("need at least two replications")
    params = baseline.params_used
    C_curr = len(instance.caregivers)
    n = len(instance.patients)
    base_params = _params_for_count(params, params.embed_dim, C_curr, n)
    rows: list[SensitivityRow] = []
    for d_idx, delta in enumerate(deltas):
        scenario = generate_scenario(instance, delta, _rep_seed(seed, 7, d_idx))
        alt_instance = apply_scenario(instance, scenario)
        C_alt = len(alt_instance.caregivers)
        alt_params = _params_for_count(params, params.embed_dim, C_alt, n)
        base_samples: dict[MetricKind, list[float]] = {m: [] for m in MetricKind}
        alt_samples: dict[MetricKind, list[float]] = {m: [] for m in MetricKind}
        for r in range(replications):
            rep = _rep_seed(seed, d_idx, r)
            b_ampm, b_atpm = _metric_samples(instance, base_params, gamma, rep, weighting)
            a_ampm, a_atpm = _metric_samples(alt_instance, alt_params, gamma, rep, weighting)
            base_samples[MetricKind.AMPM].append(b_ampm)
            base_samples[MetricKind.ATPM].append(b_atpm)
            alt_samples[MetricKind.AMPM].append(a_ampm)
            alt_samples[MetricKind.ATPM].append(a_atpm)
        for metric in MetricKind:
            base_mean = float(np.mean(base_samples[metric]))
            alt_mean = float(np.mean(alt_samples[metric]))
            apc_value = apc(base_mean, alt_mean, C_curr, C_alt, apc_form)
            t_stat: float | None
            try:
                tt = paired_t_test(base_samples[metric], alt_samples[metric], alpha)
                t_stat, p_value, significant = tt.t_stat, tt.p_value, tt.significant
            except DegenerateSamples as exc:
                # Every replicate produced the exact same pair of values, so
                # the shift is deterministic rather than sampled: a zero shift
                # is trivially insignificant, a nonzero one is certain (no
                # finite t statistic exists for it).
                if abs(exc.mean_diff) <= 1e-9:
                    t_stat, p_value, significant = 0.0, 1.0, False
                else:
                    t_stat, p_value, significant = None, 0.0, True
            rows.append(
                SensitivityRow(
                    delta=delta,
                    metric=metric,
                    baseline_mean=base_mean,
                    alt_mean=alt_mean,
                    apc=apc_value,
                    t_stat=t_stat,
                    p_value=p_value,
                    significant=significant,
                )
            )
    return SensitivityReport(
        discipline=instance.discipline,
        replications=replications,
        alpha=alpha,
        seed=seed,
        rows=tuple(rows),
    )
