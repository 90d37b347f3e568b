"""Request/response models for the REST API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class TuneRequest(BaseModel):
    discipline: str
    seed: int = 0
    generations: int | None = Field(default=None, ge=1)
    population: int | None = Field(default=None, ge=2)


class BaselineBuildRequest(BaseModel):
    discipline: str
    seed: int = 0
    use_tuned: bool = True


class PatientIn(BaseModel):
    id: str | None = None
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    weekly_visits: int = Field(default=1, ge=1)
    visit_length: float = Field(default=1.0, gt=0.0)


class AllocateRequest(BaseModel):
    discipline: str
    patients: list[PatientIn] = Field(min_length=1)
    max_retries: int | None = Field(default=None, ge=0)


class ScenarioRequest(BaseModel):
    discipline: str
    delta: int
    replications: int = Field(default=100, ge=2)
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    seed: int = 0


class DatasetSummary(BaseModel):
    records: int
    dropped: int
    disciplines: dict[str, int]
    gamma: dict[str, dict[str, float]]


class JobOut(BaseModel):
    id: str
    kind: str
    discipline: str
    status: str
    error: str | None = None
    result: dict | None = None


class JobAccepted(BaseModel):
    job_id: str
    scenario_id: str | None = None


class AssignmentRow(BaseModel):
    patient_id: str
    caregiver_id: str
    extrapolated: bool
    retry_round: int


class FeasibilityEntryOut(BaseModel):
    status: str
    workload: float
    hours_min: float
    hours_max: float


class AllocationResponse(BaseModel):
    discipline: str
    retries: int
    assignments: list[AssignmentRow]
    feasibility: dict[str, FeasibilityEntryOut]
