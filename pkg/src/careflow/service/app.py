"""REST API over the allocation engine.

Upload a visit log, tune hyperparameters, build baselines, allocate weekly
patients, and run caregiver-supply scenarios.  Long-running tune and
scenario work returns 202 with a job id to poll at /v1/jobs/{id}.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import Config, load_config
from ..engine import Engine, MissingBaseline, MissingDataset
from ..geo import GeoPoint
from ..ingest import Discipline, EmptyDataset, NoCaregivers, NoTravelData, Patient, SchemaError
from ..allocation import NoFeasibleAllocation
from .jobs import ActiveJobConflict, JobRegistry
from .schemas import (
    AllocateRequest,
    AllocationResponse,
    BaselineBuildRequest,
    DatasetSummary,
    JobAccepted,
    JobOut,
    ScenarioRequest,
    TuneRequest,
)

log = logging.getLogger(__name__)


def _discipline_or_404(value: str) -> Discipline:
    try:
        return Discipline(value)
    except ValueError:
        raise HTTPException(status_code=404, detail=f"unknown discipline {value!r}")


def create_app(config: Config | None = None) -> FastAPI:
    engine = Engine(config if config is not None else load_config())
    jobs = JobRegistry()
    app = FastAPI(title="careflow", version=__version__)
    app.state.engine = engine
    app.state.jobs = jobs

    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def validation_to_400(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.post("/v1/datasets", response_model=DatasetSummary)
    async def upload_dataset(request: Request) -> DatasetSummary:
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty request body")
        try:
            summary = engine.ingest_csv(body.decode("utf-8"))
        except (SchemaError, EmptyDataset, UnicodeDecodeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return DatasetSummary(**summary)

    @app.post("/v1/tune", response_model=JobAccepted, status_code=202)
    def start_tune(req: TuneRequest) -> JobAccepted:
        discipline = _discipline_or_404(req.discipline)
        try:
            engine.records()
        except MissingDataset as exc:
            raise HTTPException(status_code=409, detail=str(exc))

        def work() -> dict:
            result = engine.tune(discipline, req.seed, req.generations, req.population)
            payload = result.to_dict()
            payload["discipline"] = discipline.value
            payload["seed"] = req.seed
            return payload

        try:
            job = jobs.submit("tune", discipline.value, work)
        except ActiveJobConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return JobAccepted(job_id=job.id)

    @app.post("/v1/baselines", response_model=dict)
    def build_baseline(req: BaselineBuildRequest) -> dict:
        discipline = _discipline_or_404(req.discipline)
        try:
            baseline = engine.build_baseline(discipline, seed=req.seed, use_tuned=req.use_tuned)
        except MissingDataset as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (NoCaregivers, NoTravelData) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return baseline.to_dict()

    @app.get("/v1/baselines/{discipline}", response_model=dict)
    def get_baseline(discipline: str) -> dict:
        member = _discipline_or_404(discipline)
        baseline = engine.get_baseline(member)
        if baseline is None:
            raise HTTPException(status_code=404, detail=f"no baseline for {member.value}")
        return baseline.to_dict()

    @app.post("/v1/allocate", response_model=AllocationResponse)
    def allocate(req: AllocateRequest) -> AllocationResponse:
        discipline = _discipline_or_404(req.discipline)
        patients = [
            Patient(
                id=p.id if p.id is not None else f"q{i}",
                location=GeoPoint(p.lat, p.lon),
                weekly_visits=p.weekly_visits,
                visit_length=p.visit_length,
            )
            for i, p in enumerate(req.patients)
        ]
        if len({p.id for p in patients}) != len(patients):
            raise HTTPException(status_code=400, detail="duplicate patient ids")
        try:
            body, report, _ = engine.allocate(discipline, patients, req.max_retries)
        except (MissingBaseline, MissingDataset) as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except NoFeasibleAllocation as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return AllocationResponse(
            discipline=body["discipline"],
            retries=body["retries"],
            assignments=body["assignments"],
            feasibility=report.to_dict(),
        )

    @app.post("/v1/scenarios", response_model=JobAccepted, status_code=202)
    def start_scenario(req: ScenarioRequest) -> JobAccepted:
        discipline = _discipline_or_404(req.discipline)
        if req.delta == 0:
            raise HTTPException(status_code=400, detail="delta must be non-zero")
        if engine.get_baseline(discipline) is None:
            raise HTTPException(status_code=409, detail=f"no baseline for {discipline.value}")
        scenario_id = engine.scenario_id(discipline, [req.delta], req.replications, req.seed)

        def work() -> dict:
            _, report = engine.sensitivity(
                discipline, [req.delta], req.replications, req.alpha, req.seed
            )
            payload = report.to_dict()
            payload["scenario_id"] = scenario_id
            return payload

        try:
            job = jobs.submit("scenario", discipline.value, work)
        except ActiveJobConflict as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return JobAccepted(job_id=job.id, scenario_id=scenario_id)

    @app.get("/v1/scenarios/{scenario_id}", response_model=dict)
    def get_scenario(scenario_id: str) -> dict:
        report = engine.get_scenario(scenario_id)
        if report is None:
            raise HTTPException(status_code=404, detail=f"unknown scenario {scenario_id!r}")
        payload = report.to_dict()
        payload["scenario_id"] = scenario_id
        return payload

    @app.get("/v1/jobs/{job_id}", response_model=JobOut)
    def get_job(job_id: str) -> JobOut:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return JobOut(**job.to_dict())

    return app
