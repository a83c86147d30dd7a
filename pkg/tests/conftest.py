import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import lowregret as lr

settings.register_profile(
    "suite",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_problem(
    n=16,
    steps=10,
    s=0.5,
    control_weight=0.5,
    gamma=0.1,
    horizon=1.0,
    x_l=-1.0,
    x_r=1.0,
    source_amp=0.6,
    target_amp=0.4,
):
    """Small well-conditioned configuration used across the unit tests."""
    grid = lr.build_grid(x_l, x_r, n)
    tgrid = lr.build_time_grid(horizon, steps)
    hump = source_amp * np.exp(-(((grid.nodes - 0.2) / 0.3) ** 2))
    wave = target_amp * np.sin(np.pi * (grid.nodes - x_l) / (x_r - x_l))
    return lr.RegretConfig(
        s=s,
        control_weight=control_weight,
        gamma=gamma,
        f=np.tile(hump, (steps + 1, 1)),
        z_d=np.tile(wave, (steps + 1, 1)),
        grid=grid,
        tgrid=tgrid,
    )


def random_control(cfg, rng):
    v = lr.zeros_space_time(cfg.grid, cfg.tgrid)
    v[1:] = rng.standard_normal((cfg.tgrid.steps, cfg.grid.n))
    return v


@pytest.fixture
def small_cfg():
    return make_problem()
