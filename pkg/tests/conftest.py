import os

import hypothesis
import numpy as np
import pytest

from app.numerics import DiffOps, Grid, PeriodicInterpolator
from app.solver import Label, MhdState
from app.thermo import PolytropicEos

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture
def grid():
    return Grid(16, 16, 1)


@pytest.fixture
def ops(grid):
    return DiffOps(grid)


@pytest.fixture
def interp(grid):
    return PeriodicInterpolator(grid, 3)


@pytest.fixture
def eos():
    return PolytropicEos()


def orszag_tang_state(grid, eos, magnetic=True):
    """平滑的 2.5D Orszag-Tang 型状态，测试通用"""
    coords = grid.coords()
    x, y = coords[0], coords[1]
    gamma = eos.gamma
    rho = np.full(grid.shape, gamma**2) * (1.0 + 0.1 * np.cos(x) * np.sin(y))
    B = grid.zeros(3)
    if magnetic:
        B = np.stack([-np.sin(y), np.sin(2 * x), 0.2 * np.cos(x + y)])
    return MhdState(
        grid=grid,
        rho=rho,
        u=np.stack([-np.sin(y), np.sin(x), 0.2 * np.sin(x + y)]),
        S=eos.entropy_for(rho, np.full(grid.shape, gamma)) + 0.05 * np.sin(x) * np.cos(y),
        B=B,
        labels={
            "psi": Label(np.sin(x) * np.sin(y)),
            "chi": Label(np.cos(x) * np.sin(y)),
            "phi": Label(np.sin(x) * np.cos(y)),
        },
    )


@pytest.fixture
def ot_state(grid, eos):
    return orszag_tang_state(grid, eos)


def make_frame(state, eos, with_map=False, **kwargs):
    """t 时刻的求值上下文；with_map 时附带已同步的恒等映射"""
    from app.lagrange import LagrangianMap, sync_map
    from app.noether import Frame
    from app.solver import mhd_rhs

    ops = DiffOps(state.grid)
    interp = PeriodicInterpolator(state.grid, 3)
    tendency = mhd_rhs(state, eos, ops)
    lmap = None
    if with_map:
        lmap = sync_map(LagrangianMap.from_state(state), state, tendency, ops, interp)
    return Frame(state=state, tendency=tendency, eos=eos, ops=ops, interp=interp, map=lmap, **kwargs)
