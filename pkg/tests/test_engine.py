import io
import json

import pytest

from careflow.config import Config
from careflow.engine import Engine, MissingBaseline, MissingDataset
from careflow.geo import GeoPoint
from careflow.ingest import (
    Discipline,
    Patient,
    SynthConfig,
    generate_synthetic_dataset,
    records_to_csv,
)

FIXED = "2026-01-01T00:00:00+00:00"


def synth_csv(seed=0):
    config = SynthConfig(
        n_caregivers=2,
        n_patients=8,
        cluster_spread=0.05,
        region=(35.0, 36.0, -84.0, -83.0),
        weeks=2,
    )
    records, _ = generate_synthetic_dataset(config, seed=seed)
    buf = io.StringIO()
    records_to_csv(records, buf)
    return buf.getvalue()


@pytest.fixture()
def engine(tmp_path):
    return Engine(Config(data_dir=str(tmp_path / "data"), fixed_time=FIXED))


@pytest.fixture()
def loaded(engine):
    engine.ingest_csv(synth_csv())
    return engine


class TestDatasetPersistence:
    def test_missing_dataset_raises(self, engine):
        with pytest.raises(MissingDataset):
            engine.records()

    def test_ingest_writes_csv(self, loaded):
        assert loaded.dataset_path.exists()
        assert loaded.dataset_path.read_text() == synth_csv()
        assert not list(loaded.data_dir.glob(".dataset.csv.*"))  # no temp litter

    def test_fresh_engine_reloads_from_disk(self, loaded):
        again = Engine(loaded.config)
        records = again.records()
        assert len(records) == len(loaded.records())
        assert [r.patient_id for r in records] == [r.patient_id for r in loaded.records()]

    def test_reingest_replaces(self, loaded):
        loaded.ingest_csv(synth_csv(seed=9))
        assert loaded.dataset_path.read_text() == synth_csv(seed=9)


class TestTunePersistence:
    def test_tuned_params_absent(self, loaded):
        assert loaded.tuned_params(Discipline.RN) is None

    def test_tune_persists_and_reloads(self, loaded):
        result = loaded.tune(Discipline.RN, seed=0, generations=2, population=4)
        path = loaded.tune_path(Discipline.RN)
        assert path.exists()
        payload = json.loads(path.read_text())
        assert payload["discipline"] == "RN"
        fresh = Engine(loaded.config)
        assert fresh.tuned_params(Discipline.RN) == result.best_params


class TestBaselinePersistence:
    def test_get_baseline_none(self, loaded):
        assert loaded.get_baseline(Discipline.RN) is None

    def test_build_persists_fixed_time(self, loaded):
        baseline = loaded.build_baseline(Discipline.RN, seed=0)
        assert baseline.created_at == FIXED
        fresh = Engine(loaded.config)
        again = fresh.get_baseline(Discipline.RN)
        assert again is not None
        assert again.to_dict() == baseline.to_dict()

    def test_build_uses_tuned_params(self, loaded):
        loaded.tune(Discipline.RN, seed=0, generations=2, population=4)
        tuned = loaded.tuned_params(Discipline.RN)
        baseline = loaded.build_baseline(Discipline.RN, seed=0)
        assert baseline.assignment.params == tuned

    def test_rebuild_deterministic(self, loaded):
        a = loaded.build_baseline(Discipline.RN, seed=0).to_dict()
        b = loaded.build_baseline(Discipline.RN, seed=0).to_dict()
        assert a == b


class TestAllocation:
    def test_missing_baseline(self, loaded):
        patient = Patient(id="w1", location=GeoPoint(35.3, -83.7), weekly_visits=1, visit_length=1.0)
        with pytest.raises(MissingBaseline):
            loaded.allocate(Discipline.RN, [patient])

    def test_allocate_rows(self, loaded):
        loaded.build_baseline(Discipline.RN, seed=0)
        patients = [
            Patient(id="w1", location=GeoPoint(35.3, -83.7), weekly_visits=1, visit_length=1.0),
            Patient(id="w2", location=GeoPoint(35.6, -83.4), weekly_visits=2, visit_length=0.5),
        ]
        body, report, retries = loaded.allocate(Discipline.RN, patients)
        assert body["discipline"] == "RN"
        assert body["retries"] == retries
        assert {row["patient_id"] for row in body["assignments"]} == {"w1", "w2"}
        assert set(report.entries) == {c.id for c in loaded.instance(Discipline.RN).caregivers}


class TestScenarios:
    def test_scenario_id_format(self):
        assert Engine.scenario_id(Discipline.RN, [1, -1], 4, 0) == "RN-dp1m1-r4-s0"
        assert Engine.scenario_id(Discipline.COTA, [-2], 100, 7) == "COTA-dm2-r100-s7"

    def test_sensitivity_requires_baseline(self, loaded):
        with pytest.raises(MissingBaseline):
            loaded.sensitivity(Discipline.RN, [1], replications=2)

    def test_sensitivity_persists_and_reloads(self, loaded):
        loaded.build_baseline(Discipline.RN, seed=0)
        scenario_id, report = loaded.sensitivity(Discipline.RN, [1], replications=3, seed=0)
        assert scenario_id == "RN-dp1-r3-s0"
        assert loaded.scenario_path(scenario_id).exists()
        fresh = Engine(loaded.config)
        again = fresh.get_scenario(scenario_id)
        assert again is not None
        assert again.to_dict() == report.to_dict()

    def test_get_scenario_none(self, loaded):
        assert loaded.get_scenario("RN-dp9-r2-s9") is None
