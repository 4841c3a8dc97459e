import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slidenet import geometry as G

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit_cube():
    return G.box_mesh(1.0, 1.0, 1.0, "unit-cube")


@pytest.fixture(scope="session")
def cube_grid(unit_cube):
    return G.voxelize(unit_cube, 0.025)


@pytest.fixture(scope="session")
def disk_body():
    """Cylinder r=0.5 with its mass properties and full bottom patch."""
    mesh = G.cylinder_mesh(0.5, 0.2)
    grid = G.voxelize(mesh, 0.025)
    return mesh, G.mass_properties(grid), G.contact_patch(grid, 4000)



@pytest.fixture(scope="session")
def small_manifest():
    """200 box simulations plus 30 for each of four cylinders, 32-point clouds."""
    from slidenet import datagen

    shapes = datagen.make_shapes("box:1,cylinder:4", seed=0)
    return datagen.generate(shapes, [200, 30, 30, 30, 30], datagen.GenConfig(n_points=32), seed=0)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
