"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from careflow.geo import (
    CoordinateSource,
    DistanceMatrix,
    GeoPoint,
    build_distance_matrix,
)
from careflow.ingest import Caregiver, Discipline, InstanceModel, Patient


def gp(lat: float, lon: float) -> GeoPoint:
    return GeoPoint(lat, lon, CoordinateSource.EXACT)


def matrix_from(labels: list[str], values: list[list[float]]) -> DistanceMatrix:
    """A DistanceMatrix with hand-picked values (for exact-arithmetic tests)."""
    return DistanceMatrix(labels=tuple(labels), values=np.asarray(values, dtype=float))


def make_instance(
    patient_coords: list[tuple[str, float, float]],
    caregiver_coords: list[tuple[str, float, float]],
    hours: tuple[float, float] = (0.0, 40.0),
    travel_rate: float = 1.0 / 40.0,
    weekly_visits: int = 1,
    visit_length: float = 1.0,
    road_coeff: float = 1.285,
    discipline: Discipline = Discipline.RN,
) -> InstanceModel:
    patients = tuple(
        Patient(id=pid, location=gp(lat, lon), weekly_visits=weekly_visits, visit_length=visit_length)
        for pid, lat, lon in patient_coords
    )
    caregivers = tuple(
        Caregiver(id=cid, home=gp(lat, lon), hours_min=hours[0], hours_max=hours[1])
        for cid, lat, lon in caregiver_coords
    )
    labeled = [(p.id, p.location) for p in patients] + [(c.id, c.home) for c in caregivers]
    distance = build_distance_matrix(labeled, coeff=road_coeff)
    return InstanceModel(
        discipline=discipline,
        patients=patients,
        caregivers=caregivers,
        distance=distance,
        travel_rate=travel_rate,
        road_coeff=road_coeff,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Per-criterion verdict lines recorded by the acceptance tests; emitted in
# the terminal summary so they survive pytest's output capture.
def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
