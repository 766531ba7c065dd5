from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("fracwave", deadline=None, max_examples=25, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fracwave")

DATA = Path(__file__).resolve().parent / "data"


def package_data(name: str) -> dict:
    return json.loads(resources.files("fracwave").joinpath(f"data/{name}").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def ml_oracle() -> dict:
    return package_data("ml_oracle.json")


@pytest.fixture(scope="session")
def wave_oracle() -> dict:
    return package_data("wave_oracle.json")


@pytest.fixture(scope="session")
def special_oracle() -> dict:
    return json.loads((DATA / "special_oracle.json").read_text(encoding="utf-8"))
