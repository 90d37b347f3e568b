import io
import threading
import time

import pytest
from fastapi.testclient import TestClient

from careflow.config import Config
from careflow.ingest import Discipline, SynthConfig, generate_synthetic_dataset, records_to_csv
from careflow.service.app import create_app
from careflow.service.jobs import ActiveJobConflict, JobRegistry, JobStatus


def synth_csv(seed=0, n_patients=8):
    config = SynthConfig(
        n_caregivers=2,
        n_patients=n_patients,
        cluster_spread=0.05,
        region=(35.0, 36.0, -84.0, -83.0),
        weeks=2,
    )
    records, _ = generate_synthetic_dataset(config, seed=seed)
    buf = io.StringIO()
    records_to_csv(records, buf)
    return buf.getvalue()


def wait_job(client, job_id, timeout=60.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        resp = client.get(f"/v1/jobs/{job_id}")
        assert resp.status_code == 200
        body = resp.json()
        if body["status"] in ("Done", "Failed"):
            return body
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish")


@pytest.fixture()
def client(tmp_path):
    config = Config(data_dir=str(tmp_path / "data"), fixed_time="2026-01-01T00:00:00+00:00")
    with TestClient(create_app(config)) as c:
        yield c


@pytest.fixture()
def loaded_client(client):
    resp = client.post(
        "/v1/datasets", content=synth_csv(), headers={"content-type": "text/csv"}
    )
    assert resp.status_code == 200
    return client


@pytest.fixture()
def baselined_client(loaded_client):
    resp = loaded_client.post("/v1/baselines", json={"discipline": "RN", "seed": 0})
    assert resp.status_code == 200
    return loaded_client


class TestDatasets:
    def test_upload_summary(self, client):
        resp = client.post(
            "/v1/datasets", content=synth_csv(), headers={"content-type": "text/csv"}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["records"] > 0
        assert body["dropped"] == 0
        assert body["disciplines"].keys() == {"RN"}
        gamma = body["gamma"]["RN"]
        assert 0.0 <= gamma["gamma_curr"] <= 1.0
        assert gamma["gamma_lim"] == pytest.approx(0.8 * gamma["gamma_curr"])

    def test_empty_body_400(self, client):
        resp = client.post("/v1/datasets", content=b"")
        assert resp.status_code == 400

    def test_bad_csv_400(self, client):
        resp = client.post("/v1/datasets", content="not,a,visit\nlog,at,all\n")
        assert resp.status_code == 400


class TestTune:
    def test_tune_without_dataset_409(self, client):
        resp = client.post("/v1/tune", json={"discipline": "RN"})
        assert resp.status_code == 409

    def test_unknown_discipline_404(self, loaded_client):
        resp = loaded_client.post("/v1/tune", json={"discipline": "XX"})
        assert resp.status_code == 404

    def test_tune_job_lifecycle(self, loaded_client):
        resp = loaded_client.post(
            "/v1/tune", json={"discipline": "RN", "seed": 0, "generations": 2, "population": 4}
        )
        assert resp.status_code == 202
        job_id = resp.json()["job_id"]
        body = wait_job(loaded_client, job_id)
        assert body["status"] == "Done"
        result = body["result"]
        assert result["discipline"] == "RN"
        assert "best_params" in result and "best_fitness" in result
        assert len(result["history"]) == 3  # initial + one entry per generation

    def test_validation_error_is_400(self, loaded_client):
        resp = loaded_client.post("/v1/tune", json={"discipline": "RN", "population": 1})
        assert resp.status_code == 400


class TestBaselines:
    def test_build_without_dataset_409(self, client):
        resp = client.post("/v1/baselines", json={"discipline": "RN"})
        assert resp.status_code == 409

    def test_build_and_get(self, loaded_client):
        resp = loaded_client.post("/v1/baselines", json={"discipline": "RN", "seed": 0})
        assert resp.status_code == 200
        built = resp.json()
        assert built["discipline"] == "RN"
        assert built["assignment"]["C"] == 2
        assert len(built["centroid_of"]) == 2
        assert len(built["caregivers"]) == 2
        got = loaded_client.get("/v1/baselines/RN")
        assert got.status_code == 200
        assert got.json() == built

    def test_get_missing_404(self, loaded_client):
        assert loaded_client.get("/v1/baselines/RN").status_code == 404

    def test_get_unknown_discipline_404(self, loaded_client):
        assert loaded_client.get("/v1/baselines/nope").status_code == 404

    def test_no_caregivers_409(self, loaded_client):
        resp = loaded_client.post("/v1/baselines", json={"discipline": "PT"})
        assert resp.status_code == 409


class TestAllocate:
    PATIENTS = [
        {"id": "w1", "lat": 35.3, "lon": -83.7},
        {"id": "w2", "lat": 35.6, "lon": -83.4, "weekly_visits": 2, "visit_length": 0.5},
    ]

    def test_without_baseline_409(self, loaded_client):
        resp = loaded_client.post(
            "/v1/allocate", json={"discipline": "RN", "patients": self.PATIENTS}
        )
        assert resp.status_code == 409

    def test_allocates_each_patient(self, baselined_client):
        resp = baselined_client.post(
            "/v1/allocate", json={"discipline": "RN", "patients": self.PATIENTS}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["discipline"] == "RN"
        assert {row["patient_id"] for row in body["assignments"]} == {"w1", "w2"}
        for row in body["assignments"]:
            assert isinstance(row["extrapolated"], bool)
            assert row["retry_round"] >= 0
        assert len(body["feasibility"]) == 2  # one entry per caregiver
        for entry in body["feasibility"].values():
            assert entry["status"] in ("Feasible", "BelowMin", "AboveMax")

    def test_duplicate_ids_400(self, baselined_client):
        dup = [self.PATIENTS[0], dict(self.PATIENTS[0])]
        resp = baselined_client.post(
            "/v1/allocate", json={"discipline": "RN", "patients": dup}
        )
        assert resp.status_code == 400

    def test_bad_latitude_400(self, baselined_client):
        resp = baselined_client.post(
            "/v1/allocate",
            json={"discipline": "RN", "patients": [{"id": "w1", "lat": 123.0, "lon": 0.0}]},
        )
        assert resp.status_code == 400

    def test_empty_patient_list_400(self, baselined_client):
        resp = baselined_client.post("/v1/allocate", json={"discipline": "RN", "patients": []})
        assert resp.status_code == 400


class TestScenarios:
    def test_delta_zero_400(self, baselined_client):
        resp = baselined_client.post(
            "/v1/scenarios", json={"discipline": "RN", "delta": 0, "replications": 2}
        )
        assert resp.status_code == 400

    def test_without_baseline_409(self, loaded_client):
        resp = loaded_client.post(
            "/v1/scenarios", json={"discipline": "RN", "delta": 1, "replications": 2}
        )
        assert resp.status_code == 409

    def test_scenario_flow(self, baselined_client):
        req = {"discipline": "RN", "delta": 1, "replications": 3, "seed": 0}
        resp = baselined_client.post("/v1/scenarios", json=req)
        assert resp.status_code == 202
        accepted = resp.json()
        assert accepted["scenario_id"] == "RN-dp1-r3-s0"
        missing = baselined_client.get(f"/v1/scenarios/{accepted['scenario_id']}")
        # may 404 until the worker persists, but never any other status
        assert missing.status_code in (200, 404)
        body = wait_job(baselined_client, accepted["job_id"])
        assert body["status"] == "Done"
        report = baselined_client.get(f"/v1/scenarios/{accepted['scenario_id']}")
        assert report.status_code == 200
        rows = report.json()["rows"]
        assert len(rows) == 2  # one delta x {AMPM, ATPM}
        for row in rows:
            assert row["delta"] == 1
            assert 0.0 <= row["p_value"] <= 1.0

    def test_negative_delta_id(self, baselined_client):
        req = {"discipline": "RN", "delta": -1, "replications": 2, "seed": 7}
        resp = baselined_client.post("/v1/scenarios", json=req)
        assert resp.status_code == 202
        assert resp.json()["scenario_id"] == "RN-dm1-r2-s7"
        wait_job(baselined_client, resp.json()["job_id"])

    def test_get_unknown_scenario_404(self, baselined_client):
        assert baselined_client.get("/v1/scenarios/RN-dp9-r2-s9").status_code == 404


class TestJobs:
    def test_unknown_job_404(self, client):
        assert client.get("/v1/jobs/job-404").status_code == 404

    def test_registry_conflict_and_transitions(self):
        registry = JobRegistry()
        release = threading.Event()
        started = threading.Event()

        def slow():
            started.set()
            release.wait(timeout=10)
            return {"ok": True}

        job = registry.submit("tune", "RN", slow)
        assert started.wait(timeout=5)
        with pytest.raises(ActiveJobConflict):
            registry.submit("tune", "RN", slow)
        # other (kind, discipline) pairs are independent
        registry.submit("tune", "PT", lambda: {})
        registry.submit("scenario", "RN", lambda: {})
        release.set()
        deadline = time.monotonic() + 5
        while registry.get(job.id).status is not JobStatus.DONE:
            assert time.monotonic() < deadline
            time.sleep(0.01)
        assert registry.get(job.id).to_dict()["result"] == {"ok": True}
        # a finished job frees the slot
        registry.submit("tune", "RN", lambda: {})

    def test_registry_failure_path(self):
        registry = JobRegistry()

        def boom():
            raise RuntimeError("kaput")

        job = registry.submit("scenario", "SLP", boom)
        deadline = time.monotonic() + 5
        while registry.get(job.id).status is not JobStatus.FAILED:
            assert time.monotonic() < deadline
            time.sleep(0.01)
        snapshot = registry.get(job.id).to_dict()
        assert snapshot["error"] == "kaput"
        assert snapshot["result"] is None
