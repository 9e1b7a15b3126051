import numpy as np
import pytest

import csrg


def make_desk_loop(w_var=0.01):
    """Scalar plant x+ = 0.5 x + v + w, y = x; v passes straight through."""
    plant = csrg.PlantModel(A=[[0.5]], B_u=[[1.0]], B_w=[[1.0]],
                            C=[[1.0]], D_u=[[0.0]], D_w=[[0.0]])
    ctrl = csrg.ControllerModel(K_p=[[0.0]], K_u=np.zeros((1, 0)), B_v=[[1.0]],
                                A_p=np.zeros((0, 1)), A_u=np.zeros((0, 0)),
                                D_v=np.zeros((0, 1)))
    return csrg.assemble(plant, ctrl, [[w_var]])


@pytest.fixture(scope="session")
def desk_loop():
    return make_desk_loop()


@pytest.fixture(scope="session")
def desk_spec():
    return csrg.ChanceSpec.individual([[1.0]], [1.0], 0.9)


@pytest.fixture(scope="session")
def desk_oinf(desk_loop, desk_spec):
    return csrg.build_oinf(desk_loop, desk_spec, [[-1.0, 1.0]],
                           eps_rel=0.01, t_max=200)


@pytest.fixture(scope="session")
def lon_bundle():
    return csrg.gtm_longitudinal()


@pytest.fixture(scope="session")
def lat_bundle():
    return csrg.gtm_lateral()


@pytest.fixture(scope="session")
def lon_loop(lon_bundle):
    return lon_bundle.closed_loop()


@pytest.fixture(scope="session")
def lat_loop(lat_bundle):
    return lat_bundle.closed_loop()


@pytest.fixture(scope="session")
def lon_oinf(lon_bundle):
    return lon_bundle.build_oinf()


@pytest.fixture(scope="session")
def lat_oinf(lat_bundle):
    return lat_bundle.build_oinf()
