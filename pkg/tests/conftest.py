import math

import pytest

from maxwell_bench.assembly import Material, assemble_problem
from maxwell_bench.mesh import MeshConfig, build_cube_mesh


@pytest.fixture(scope="session")
def mesh4():
    return build_cube_mesh(MeshConfig(4))


@pytest.fixture(scope="session")
def problem_n4(mesh4):
    return assemble_problem(mesh4, Material(k=1.0))


@pytest.fixture(scope="session")
def problem_n4_2pi(mesh4):
    return assemble_problem(mesh4, Material(k=2 * math.pi))


@pytest.fixture(scope="session")
def problem_n8_2pi():
    return assemble_problem(build_cube_mesh(MeshConfig(8)), Material(k=2 * math.pi))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
