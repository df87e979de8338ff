import numpy as np
import pytest
from dataclasses import replace

import extobs


@pytest.fixture(scope="session")
def demo_cfg():
    return extobs.default_config()


@pytest.fixture(scope="session")
def setup(demo_cfg):
    return extobs.build_runtime(demo_cfg)


@pytest.fixture(scope="session")
def short_cfg(demo_cfg):
    """Two-second run with an inert parameter law, for engine-level tests.

    The tiny mixing amplifier keeps the scalar regressor below rho so the
    estimation switch stays off; a nonzero initial parameter estimate still
    exercises the observer dynamics with output injection.
    """
    return replace(
        demo_cfg,
        dt=1e-3,
        t_final=2.0,
        t_eps=1.0,
        k_amp=1e-30,
        kappa_hat0=np.array([2.5, 1.5, 1.5, 2.5, -10.0, 3.5, 4.5, 0.4, 30.0]),
    )


@pytest.fixture(scope="session")
def demo_run(demo_cfg):
    """The full production run shared by the acceptance criteria."""
    return extobs.simulate(demo_cfg, engine="numba")
