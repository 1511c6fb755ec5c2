import numpy as np
import pytest

from cosymgeo.spaces import SpaceFormSpec
from cosymgeo.curves import cylinder_immersion, sinusoidal_curvature
from cosymgeo.rotational import shoot_sphere, sphere_immersion


@pytest.fixture(scope="session")
def ch2():
    return SpaceFormSpec(2, -4.0)


@pytest.fixture(scope="session")
def cp2():
    return SpaceFormSpec(2, 4.0)


@pytest.fixture(scope="session")
def flat2():
    return SpaceFormSpec(2, 0.0)


@pytest.fixture(scope="session")
def magic_cylinder(ch2):
    # kappa = (1/2) sqrt(-rho (1 + 3 tau^2)) at tau = 0: the vanishing-Q case
    return cylinder_immersion(ch2, 1.0, 0.0)


@pytest.fixture(scope="session")
def wavy_cylinder(ch2):
    # non-constant curvature: the standard negative control
    return cylinder_immersion(ch2, sinusoidal_curvature(1.0, 0.1), 0.0, length=2.0)


@pytest.fixture(scope="session")
def sphere_ch(ch2):
    shoot = shoot_sphere(ch2, 0.6)
    assert shoot.converged, shoot.verdict
    return sphere_immersion(ch2, shoot=shoot)


@pytest.fixture(scope="session")
def sphere_cp(cp2):
    shoot = shoot_sphere(cp2, 0.5)
    assert shoot.converged, shoot.verdict
    return sphere_immersion(cp2, shoot=shoot)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
