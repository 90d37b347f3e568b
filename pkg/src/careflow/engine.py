"""Pipeline orchestration and flat-file persistence.

The engine owns a data directory of JSON/CSV artifacts — the uploaded
dataset, tune results, baselines, and sensitivity reports — and wires the
core modules together for the service and CLI.  Files are replaced
atomically; JSON is written with sorted keys so reruns are byte-stable.
"""

from __future__ import annotations

import datetime as dt
import io
import json
import logging
import os
import tempfile
from pathlib import Path

from .allocation import (
    Baseline,
    FeasibilityReport,
    attach_centroids,
    run_weekly_allocation,
)
from .clustering import SpectralParams, spectral_cluster
from .config import Config
from .ingest import (
    Discipline,
    GammaProfile,
    InstanceModel,
    ParseStats,
    Patient,
    VisitRecord,
    build_instance,
    compute_gamma,
    parse_visit_records,
)
from .supply import SensitivityReport, run_sensitivity
from .tuner import GAConfig, HyperparamSpace, TuneResult, ga_optimize

log = logging.getLogger(__name__)


class MissingDataset(Exception):
    """No dataset has been ingested yet."""


class MissingBaseline(Exception):
    """The discipline has no baseline to allocate against."""


def _atomic_write(path: Path, content: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


class Engine:
    """Stateful facade over the clustering/allocation pipeline."""

    def __init__(self, config: Config | None = None):
        self.config = config or Config()
        self.data_dir = Path(self.config.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._records: list[VisitRecord] | None = None

    # --- paths ---------------------------------------------------------

    @property
    def dataset_path(self) -> Path:
        return self.data_dir / "dataset.csv"

    def tune_path(self, discipline: Discipline) -> Path:
        return self.data_dir / f"tune-{discipline.value}.json"

    def baseline_path(self, discipline: Discipline) -> Path:
        return self.data_dir / f"baseline-{discipline.value}.json"

    def scenario_path(self, scenario_id: str) -> Path:
        return self.data_dir / f"scenario-{scenario_id}.json"

    def _now(self) -> str:
        if self.config.fixed_time:
            return self.config.fixed_time
        return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")

    # --- dataset -------------------------------------------------------

    def ingest_csv(self, text: str) -> dict:
        """Parse and persist an uploaded visit log; returns a summary."""
        stats = ParseStats()
        records = parse_visit_records(io.StringIO(text), stats)
        _atomic_write(self.dataset_path, text)
        self._records = records
        by_discipline: dict[str, int] = {}
        for rec in records:
            by_discipline[rec.discipline.value] = by_discipline.get(rec.discipline.value, 0) + 1
        gammas = {}
        for name in sorted(by_discipline):
            profile = self.gamma(Discipline(name))
            gammas[name] = {
                "n_total": profile.n_total,
                "n_home": profile.n_home,
                "gamma_curr": profile.gamma_curr,
                "gamma_lim": profile.gamma_lim,
            }
        return {
            "records": len(records),
            "dropped": stats.dropped,
            "disciplines": by_discipline,
            "gamma": gammas,
        }

    def records(self) -> list[VisitRecord]:
        if self._records is None:
            if not self.dataset_path.exists():
                raise MissingDataset("upload a dataset first")
            with open(self.dataset_path) as fh:
                self._records = parse_visit_records(fh)
        return self._records

    def instance(self, discipline: Discipline) -> InstanceModel:
        return build_instance(self.records(), discipline, self.config)

    def gamma(self, discipline: Discipline) -> GammaProfile:
        records = [r for r in self.records() if r.discipline is discipline]
        return compute_gamma(records, self.config.gamma_reduction)

    # --- tuning --------------------------------------------------------

    def tune(
        self,
        discipline: Discipline,
        seed: int = 0,
        generations: int | None = None,
        population: int | None = None,
    ) -> TuneResult:
        instance = self.instance(discipline)
        space = HyperparamSpace.for_instance(len(instance.caregivers), len(instance.patients))
        ga = GAConfig(
            population_size=population if population is not None else 40,
            max_iterations=generations if generations is not None else 100,
            seed=seed,
        )
        result = ga_optimize(
            space,
            instance,
            self.gamma(discipline).gamma_curr,
            ga,
            weighting=self.config.gamma_weighting,
        )
        payload = result.to_dict()
        payload["discipline"] = discipline.value
        payload["seed"] = seed
        _atomic_write(self.tune_path(discipline), _dump_json(payload))
        return result

    def tuned_params(self, discipline: Discipline) -> SpectralParams | None:
        path = self.tune_path(discipline)
        if not path.exists():
            return None
        with open(path) as fh:
            return TuneResult.from_dict(json.load(fh)).best_params

    # --- baselines -----------------------------------------------------

    def build_baseline(
        self,
        discipline: Discipline,
        seed: int = 0,
        params: SpectralParams | None = None,
        use_tuned: bool = True,
    ) -> Baseline:
        instance = self.instance(discipline)
        C, n = len(instance.caregivers), len(instance.patients)
        if params is None and use_tuned:
            params = self.tuned_params(discipline)
        if params is None:
            params = SpectralParams.defaults(C, n)
        assignment = spectral_cluster(
            [p.location for p in instance.patients],
            C=C,
            params=params,
            seed=seed,
            discipline=discipline,
            patient_ids=instance.patient_ids,
            distance=instance.distance.submatrix(instance.patient_ids),
        )
        baseline = attach_centroids(
            assignment,
            [(c.id, c.home) for c in instance.caregivers],
            instance.distance,
            [(p.id, p.location) for p in instance.patients],
            created_at=self._now(),
        )
        _atomic_write(self.baseline_path(discipline), _dump_json(baseline.to_dict()))
        return baseline

    def get_baseline(self, discipline: Discipline) -> Baseline | None:
        path = self.baseline_path(discipline)
        if not path.exists():
            return None
        with open(path) as fh:
            return Baseline.from_dict(json.load(fh))

    # --- allocation ----------------------------------------------------

    def allocate(
        self,
        discipline: Discipline,
        patients: list[Patient],
        max_retries: int | None = None,
    ) -> tuple[dict, FeasibilityReport, int]:
        baseline = self.get_baseline(discipline)
        if baseline is None:
            raise MissingBaseline(f"no baseline for {discipline.value}")
        instance = self.instance(discipline)
        gamma = self.gamma(discipline).gamma_curr
        decision, report, retries = run_weekly_allocation(
            baseline, patients, instance, gamma, max_retries
        )
        rows = [
            {
                "patient_id": pid,
                "caregiver_id": cid,
                "extrapolated": decision.extrapolated.get(pid, False),
                "retry_round": decision.retry_round.get(pid, 0),
            }
            for pid, cid in decision.assignments.items()
        ]
        return (
            {"discipline": discipline.value, "retries": retries, "assignments": rows},
            report,
            retries,
        )

    # --- sensitivity ---------------------------------------------------

    @staticmethod
    def scenario_id(discipline: Discipline, deltas: list[int], replications: int, seed: int) -> str:
        tags = "".join(f"{'m' if d < 0 else 'p'}{abs(d)}" for d in deltas)
        return f"{discipline.value}-d{tags}-r{replications}-s{seed}"

    def sensitivity(
        self,
        discipline: Discipline,
        deltas: list[int],
        replications: int = 100,
        alpha: float = 0.05,
        seed: int = 0,
    ) -> tuple[str, SensitivityReport]:
        baseline = self.get_baseline(discipline)
        if baseline is None:
            raise MissingBaseline(f"no baseline for {discipline.value}")
        instance = self.instance(discipline)
        report = run_sensitivity(
            instance,
            baseline,
            self.gamma(discipline).gamma_curr,
            deltas,
            replications=replications,
            alpha=alpha,
            seed=seed,
            weighting=self.config.gamma_weighting,
            apc_form=self.config.apc_form,
        )
        scenario_id = self.scenario_id(discipline, deltas, replications, seed)
        _atomic_write(self.scenario_path(scenario_id), _dump_json(report.to_dict()))
        return scenario_id, report

    def get_scenario(self, scenario_id: str) -> SensitivityReport | None:
        path = self.scenario_path(scenario_id)
        if not path.exists():
            return None
        with open(path) as fh:
            return SensitivityReport.from_dict(json.load(fh))
