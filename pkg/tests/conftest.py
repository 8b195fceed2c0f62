"""Shared fixtures: small closed meshes and cached operator matrices."""

from __future__ import annotations

import numpy as np
import pytest

from modalbem.basis import RwgSpace
from modalbem.kernels import Medium
from modalbem.mesh import make_sphere, make_trimesh


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_REPORT_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_REPORT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT_LINES:
            terminalreporter.write_line(line)


def octahedron(radius: float = 1.0):
    """Regular octahedron: the smallest closed mesh with 12 edges."""
    v = radius * np.array(
        [
            [1, 0, 0], [-1, 0, 0],
            [0, 1, 0], [0, -1, 0],
            [0, 0, 1], [0, 0, -1],
        ],
        dtype=np.float64,
    )
    t = np.array(
        [
            [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
            [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
        ],
        dtype=np.int64,
    )
    return make_trimesh(v, t)


@pytest.fixture(scope="session")
def octa_mesh():
    return octahedron()


@pytest.fixture(scope="session")
def octa_space(octa_mesh):
    return RwgSpace(octa_mesh)


@pytest.fixture(scope="session")
def sphere1_mesh():
    return make_sphere(1.0, 1)


@pytest.fixture(scope="session")
def sphere1_space(sphere1_mesh):
    return RwgSpace(sphere1_mesh)


@pytest.fixture(scope="session")
def sphere2_mesh():
    return make_sphere(1.0, 2)


@pytest.fixture(scope="session")
def sphere2_space(sphere2_mesh):
    return RwgSpace(sphere2_mesh)


@pytest.fixture(scope="session")
def medium_128():
    return Medium(128e6)


@pytest.fixture(scope="session")
def sphere1_efie(sphere1_space, medium_128):
    from modalbem.assembly import assemble_efie

    return assemble_efie(sphere1_space, medium_128)


@pytest.fixture(scope="session")
def sphere1_mfie(sphere1_space, medium_128):
    from modalbem.assembly import assemble_mfie

    return assemble_mfie(sphere1_space, medium_128)


@pytest.fixture(scope="session")
def octa_efie(octa_space):
    from modalbem.assembly import assemble_efie

    return assemble_efie(octa_space, Medium(30e6))


@pytest.fixture(scope="session")
def octa_mfie(octa_space):
    from modalbem.assembly import assemble_mfie

    return assemble_mfie(octa_space, Medium(30e6))
