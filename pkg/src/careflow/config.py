"""Runtime configuration.

Settings load from a TOML file named by ``CAREFLOW_CONFIG`` (or an explicit
path) and fall back to defaults chosen for the East-Tennessee service region.

Recognized keys, by section::

    [geo]       road_coeff
    [geocoder]  fixture_path
    [instance]  travel_rate, hours_min, hours_max, gamma_reduction
    [metrics]   gamma_weighting   ("additive" | "complement")
    [apc]       form              ("normalized" | "raw")
    [engine]    data_dir
    [clock]     fixed_time        (ISO timestamp; CAREFLOW_FIXED_TIME overrides)
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

GAMMA_WEIGHTINGS = ("additive", "complement")
APC_FORMS = ("normalized", "raw")


@dataclass(frozen=True)
class Config:
    road_coeff: float = 1.285
    geocoder_fixture_path: str | None = None
    travel_rate: float = 1.0 / 40.0
    hours_min: float = 0.0
    hours_max: float = 40.0
    gamma_reduction: float = 0.2
    gamma_weighting: str = "additive"
    apc_form: str = "normalized"
    data_dir: str = "careflow-data"
    fixed_time: str | None = None

    def __post_init__(self) -> None:
        if self.road_coeff <= 0:
            raise ValueError("geo.road_coeff must be positive")
        if self.travel_rate <= 0:
            raise ValueError("instance.travel_rate must be positive")
        if self.hours_min > self.hours_max:
            raise ValueError("instance.hours_min exceeds instance.hours_max")
        if not 0.0 <= self.gamma_reduction <= 1.0:
            raise ValueError("instance.gamma_reduction must lie in [0, 1]")
        if self.gamma_weighting not in GAMMA_WEIGHTINGS:
            raise ValueError(f"metrics.gamma_weighting must be one of {GAMMA_WEIGHTINGS}")
        if self.apc_form not in APC_FORMS:
            raise ValueError(f"apc.form must be one of {APC_FORMS}")


def load_config(path: str | Path | None = None) -> Config:
    """Load settings from ``path``, ``CAREFLOW_CONFIG``, or defaults."""
    if path is None:
        path = os.environ.get("CAREFLOW_CONFIG") or None
    raw: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)

    def section(name: str) -> dict:
        value = raw.get(name, {})
        if not isinstance(value, dict):
            raise ValueError(f"config section [{name}] must be a table")
        return value

    geo = section("geo")
    geocoder = section("geocoder")
    instance = section("instance")
    metrics = section("metrics")
    apc = section("apc")
    engine = section("engine")
    clock = section("clock")

    defaults = Config()
    fixed_time = os.environ.get("CAREFLOW_FIXED_TIME") or clock.get("fixed_time")
    return Config(
        road_coeff=float(geo.get("road_coeff", defaults.road_coeff)),
        geocoder_fixture_path=geocoder.get("fixture_path", defaults.geocoder_fixture_path),
        travel_rate=float(instance.get("travel_rate", defaults.travel_rate)),
        hours_min=float(instance.get("hours_min", defaults.hours_min)),
        hours_max=float(instance.get("hours_max", defaults.hours_max)),
        gamma_reduction=float(instance.get("gamma_reduction", defaults.gamma_reduction)),
        gamma_weighting=str(metrics.get("gamma_weighting", defaults.gamma_weighting)),
        apc_form=str(apc.get("form", defaults.apc_form)),
        data_dir=str(engine.get("data_dir", defaults.data_dir)),
        fixed_time=fixed_time,
    )
