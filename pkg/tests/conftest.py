import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from conecert.fixedpoint import DiscreteSystem
from conecert.geometry import Disk, Rectangle, build_grid
from conecert.problem import load_bundled

settings.register_profile("ci", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("ci")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def unit_disk():
    return Disk((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def unit_square():
    return Rectangle((0.0, 0.0), (1.0, 1.0))


@pytest.fixture(scope="session")
def disk_grid_32(unit_disk):
    return build_grid(unit_disk, 1 / 32)


@pytest.fixture(scope="session")
def disk_grid_64(unit_disk):
    return build_grid(unit_disk, 1 / 64)


@pytest.fixture(scope="session")
def example1():
    return load_bundled("example1")


@pytest.fixture(scope="session")
def example2():
    return load_bundled("example2")


@pytest.fixture(scope="session")
def ex1_system(example1):
    spec, cfg = example1
    return DiscreteSystem.build(spec, 1 / 32, cfg.solver)


@pytest.fixture(scope="session")
def ex2_system(example2):
    spec, cfg = example2
    return DiscreteSystem.build(spec, 1 / 32, cfg.solver)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
