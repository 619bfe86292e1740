import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_design():
    from heatguide.gelfand_levitan import design_potential

    return design_potential(n=4096)


@pytest.fixture(scope="session")
def default_q(default_design):
    return default_design[2]


@pytest.fixture(scope="session")
def waveguide(default_q):
    from heatguide.gelfand_levitan import radial_lift
    from heatguide.sturm_liouville import dirichlet_spectrum, radial_spectrum
    from heatguide.waveguide import assemble_spectrum

    radial = radial_spectrum(radial_lift(default_q), 40, grid_n=1024)
    axial = dirichlet_spectrum(default_q, 40, grid_n=1024)
    return assemble_spectrum(radial, axial, 400)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
