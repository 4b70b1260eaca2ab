from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from nsk_capillary.kernel import build_kernel
from nsk_capillary.models import Grid, KernelSpec, ScalarField, State, VectorField
from nsk_capillary.snapshots import OUT_DIR_ENV
from nsk_capillary.solver import PhysParams
from nsk_capillary.thermo import IsentropicLaw

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(autouse=True)
def _no_output_override(monkeypatch):
    monkeypatch.delenv(OUT_DIR_ENV, raising=False)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def make_params():
    def factory(grid: Grid, law=None, kappa: float = 0.5, mu: float = 0.01, lam: float = 0.0,
                kernel: KernelSpec = KernelSpec("gaussian", sigma=0.05), eps_vac: float = 1e-10,
                artificial_viscosity: float = 1.0) -> PhysParams:
        return PhysParams(
            mu=mu,
            lam=lam,
            kappa=kappa,
            law=law or IsentropicLaw(a=1.0, gamma=2.0),
            kernel=build_kernel(kernel, grid),
            eps_vac=eps_vac,
            artificial_viscosity=artificial_viscosity,
        )

    return factory


def make_state(grid: Grid, rho: np.ndarray, m: np.ndarray | None = None, t: float = 0.0) -> State:
    if m is None:
        m = np.zeros((grid.dim, *grid.shape))
    return State(t, ScalarField(grid, rho), VectorField(grid, m))


def smooth_state(grid: Grid, amplitude: float = 0.1, velocity: float = 0.2) -> State:
    x = grid.coords()[0]
    rho = 1.0 + amplitude * np.sin(2.0 * np.pi * x / grid.L) + 0.5 * amplitude * np.cos(4.0 * np.pi * x / grid.L)
    m = np.zeros((grid.dim, *grid.shape))
    m[0] = rho * velocity * np.cos(2.0 * np.pi * x / grid.L + 0.3)
    if grid.dim == 2:
        y = grid.coords()[1]
        m[1] = rho * velocity * np.sin(2.0 * np.pi * y / grid.L)
    return make_state(grid, rho, m)
