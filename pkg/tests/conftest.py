import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from skillforge.cli import data_path
from skillforge.scene import load_scene_manifest

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def microwave_scene():
    scene, _ = load_scene_manifest(data_path("scenes", "microwave.json"))
    return scene


@pytest.fixture(scope="session")
def cup_scene():
    scene, _ = load_scene_manifest(data_path("scenes", "cup_microwave.json"))
    return scene


@pytest.fixture(scope="session")
def microwave_urdf_text():
    with open(data_path("assets", "microwave.urdf"), "r", encoding="utf-8") as f:
        return f.read()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def in_tmp(tmp_path):
    cwd = os.getcwd()
    os.chdir(tmp_path)
    try:
        yield tmp_path
    finally:
        os.chdir(cwd)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
