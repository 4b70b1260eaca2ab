import math

import numpy as np
import pytest

from nsk_capillary.config import load_config
from nsk_capillary.errors import BlowUpError, ConfigError
from nsk_capillary.kernel import build_kernel
from nsk_capillary.models import Grid, KernelSpec, PhysicsSpec, PressureSpec, RunConfig, ScenarioSpec
from nsk_capillary.operators import integrate
from nsk_capillary.runner import SimulationRunner
from nsk_capillary.scenarios import generate_initial
from nsk_capillary.solver import (
    VISCOSITY_CONSTRAINT,
    PhysParams,
    advance,
    cfl_dt,
    project_vacuum,
    rhs,
    step,
)
from nsk_capillary.thermo import IsentropicLaw
from tests.conftest import CONFIGS, make_state, smooth_state

GRID = Grid(1, 64, 1.0)


def _mirror(state):
    return make_state(state.grid, np.flip(state.rho.values), -np.flip(state.m.values, axis=1), state.t)


@pytest.mark.parametrize("mu, lam", [(0.0, 0.0), (-0.1, 0.0), (0.1, -0.25)])
def test_viscosity_constraint(mu, lam):
    kernel = build_kernel(KernelSpec(), GRID)
    with pytest.raises(ConfigError) as exc:
        PhysParams(mu=mu, lam=lam, kappa=0.0, law=IsentropicLaw(1.0, 2.0), kernel=kernel, eps_vac=1e-10)
    assert VISCOSITY_CONSTRAINT in str(exc.value)


def test_physparams_collects_every_problem():
    kernel = build_kernel(KernelSpec(), GRID)
    with pytest.raises(ConfigError) as exc:
        PhysParams(mu=-1.0, lam=0.0, kappa=-1.0, law=IsentropicLaw(1.0, 2.0), kernel=kernel, eps_vac=0.0)
    assert len(exc.value.errors) == 3


def test_vacuum_floor_scales_with_density():
    kernel = build_kernel(KernelSpec(), GRID)
    params = PhysParams.from_spec(PhysicsSpec(eps_vac_factor=1e-10), IsentropicLaw(1.0, 2.0), kernel, rho_scale=4.0)
    assert params.eps_vac == pytest.approx(4e-10)


@pytest.mark.parametrize("grid", [GRID, Grid(2, 16, 1.0)], ids=["1d", "2d"])
def test_constant_state_has_zero_rhs(grid, make_params):
    params = make_params(grid, kappa=0.5)
    drho, dm = rhs(make_state(grid, np.full(grid.shape, 1.3)), params)
    assert np.max(np.abs(drho.values)) <= 1e-14
    assert np.max(np.abs(dm.values)) <= 1e-14


@pytest.mark.parametrize("artificial_viscosity", [0.0, 1.0])
@pytest.mark.parametrize("grid", [GRID, Grid(2, 16, 1.0)], ids=["1d", "2d"])
def test_rhs_conserves_mass_and_momentum(grid, artificial_viscosity, make_params):
    params = make_params(grid, kappa=0.8, artificial_viscosity=artificial_viscosity)
    state = smooth_state(grid, amplitude=0.2, velocity=0.5)
    drho, dm = rhs(state, params)
    assert abs(integrate(drho)) <= 1e-12
    for axis in range(grid.dim):
        assert abs(integrate(dm.component(axis))) <= 1e-10


def test_rhs_matches_linear_acoustics(make_params):
    grid = Grid(1, 128, 1.0)
    params = make_params(grid, kappa=0.0, artificial_viscosity=0.0)
    amplitude = 1e-3
    x = grid.coords()[0]
    state = make_state(grid, 1.0 + amplitude * np.sin(2.0 * math.pi * x))
    _, dm = rhs(state, params)
    expected = -2.0 * amplitude * 2.0 * math.pi * np.cos(2.0 * math.pi * x)
    err = np.max(np.abs(dm.values[0] - expected))
    assert err <= 5e-3 * np.max(np.abs(expected))


def test_blow_up_reports_the_cell(make_params):
    params = make_params(GRID, kappa=0.0, artificial_viscosity=0.0)
    rho = np.ones(GRID.shape)
    rho[10] = 1e200
    with np.errstate(all="ignore"), pytest.raises(BlowUpError) as exc:
        rhs(make_state(GRID, rho), params)
    assert exc.value.quantity == "dm/dt"
    assert exc.value.cell == (9,)
    assert exc.value.t == 0.0


def test_cfl_scales_with_courant_number_and_grid(make_params):
    law = IsentropicLaw(1.0, 2.0)
    coarse, fine = Grid(1, 64, 1.0), Grid(1, 128, 1.0)
    p_coarse = make_params(coarse, law=law, kappa=0.0, mu=1e-4)
    p_fine = make_params(fine, law=law, kappa=0.0, mu=1e-4)
    s_coarse = make_state(coarse, np.ones(coarse.shape))
    s_fine = make_state(fine, np.ones(fine.shape))
    dt = cfl_dt(s_coarse, p_coarse, 0.5)
    assert dt == pytest.approx(0.5 * coarse.h / math.sqrt(2.0), rel=1e-12)
    assert cfl_dt(s_coarse, p_coarse, 0.25) == pytest.approx(0.5 * dt, rel=1e-14)
    assert cfl_dt(s_fine, p_fine, 0.5) == pytest.approx(0.5 * dt, rel=1e-12)


def test_cfl_is_parabolic_for_strong_viscosity(make_params):
    params = make_params(GRID, kappa=0.0, mu=1.0)
    dt = cfl_dt(make_state(GRID, np.ones(GRID.shape)), params, 1.0)
    assert dt == pytest.approx(GRID.h**2 / 4.0, rel=1e-12)


@pytest.mark.parametrize("artificial_viscosity", [0.0, 1.0])
def test_step_commutes_with_mirror(artificial_viscosity, make_params):
    params = make_params(GRID, kappa=1.0, artificial_viscosity=artificial_viscosity)
    state = smooth_state(GRID, amplitude=0.2, velocity=0.4)
    dt = cfl_dt(state, params, 0.5)
    direct = _mirror(step(state, params, dt))
    mirrored = step(_mirror(state), params, dt)
    np.testing.assert_allclose(mirrored.rho.values, direct.rho.values, rtol=0, atol=1e-12)
    np.testing.assert_allclose(mirrored.m.values, direct.m.values, rtol=0, atol=1e-12)


def test_equilibrium_is_a_fixed_point(make_params):
    params = make_params(GRID, kappa=0.5)
    state = make_state(GRID, np.ones(GRID.shape))
    initial = state.rho.values.copy()
    dt = cfl_dt(state, params, 0.5)
    for _ in range(1000):
        state = step(state, params, dt)
    assert np.max(np.abs(state.rho.values - initial)) <= 1e-12
    assert np.max(np.abs(state.m.values)) <= 1e-12
    assert state.t == pytest.approx(1000 * dt)


def test_vacuum_projection_records_added_mass(make_params):
    spec = ScenarioSpec(generator="vacuum_pocket", background=1.0, pocket_radius=0.1, width=0.05)
    grid = Grid(1, 128, 1.0)
    state = generate_initial(spec, grid)
    params = make_params(grid, law=IsentropicLaw(1.0, 1.4), kappa=0.0, mu=1e-3, eps_vac=1e-3,
                         kernel=KernelSpec("bump", radius=0.05))
    report = advance(state, params, 1e-4)
    assert report.clamped_cells > 0
    assert report.vacuum_mass > 0
    assert np.min(report.state.rho.values) >= params.eps_vac
    gained = integrate(report.state.rho) - integrate(state.rho)
    assert gained == pytest.approx(report.vacuum_mass, abs=1e-14)
    pocket = report.state.rho.values == params.eps_vac
    assert np.all(report.state.m.values[0][pocket] == 0.0)


def test_project_vacuum_zeroes_momentum_only_below_floor():
    rho = np.linspace(0.0, 1.0, GRID.n)
    state = make_state(GRID, rho, np.ones((1, GRID.n)))
    projected = project_vacuum(state, 0.5)
    assert np.all(projected.m.values[0][rho < 0.5] == 0.0)
    assert np.all(projected.m.values[0][rho >= 0.5] == 1.0)
    assert project_vacuum(projected, 0.0) is projected


# --- Long runs ---------------------------------------------------------------


@pytest.mark.slow
def test_two_phase_run_conserves_mass_and_momentum():
    config = load_config(CONFIGS / "two_phase.ini")
    runner = SimulationRunner(config, persist=False)
    result = runner.run()
    first, last = result.records[0], result.records[-1]
    assert last.t == pytest.approx(0.5)
    assert last.vacuum_cum == 0.0
    assert abs(runner.ledger.mass_drift()) <= 1e-12 * first.mass
    scale = max(1.0, float(np.max(np.abs(runner.initial.m.values))))
    for drift in runner.ledger.momentum_drift():
        assert abs(drift) <= 1e-8 * scale
    ratios = [r.extras["integrability_ratio"] for r in result.records if r.t >= 0.25]
    assert max(ratios) <= 1.05 * min(ratios)


@pytest.mark.slow
def test_acoustic_pulse_travels_at_sound_speed():
    config = load_config(CONFIGS / "manufactured.ini")
    runner = SimulationRunner(config, persist=False)
    result = runner.run()
    grid = config.grid
    before = runner.initial.rho.values - config.scenario.rho_bar
    after = result.final.rho.values - config.scenario.rho_bar
    correlation = [float(np.sum(np.roll(before, s) * after)) for s in range(grid.n)]
    shift = int(np.argmax(correlation))
    speed = shift * grid.h / result.final.t
    assert speed == pytest.approx(math.sqrt(2.0), rel=0.05)


def _advected_sine_config(n: int) -> RunConfig:
    h = 1.0 / n
    return RunConfig(
        grid=Grid(1, n, 1.0),
        physics=PhysicsSpec(mu=0.01, kappa=0.5, artificial_viscosity=0.0),
        pressure=PressureSpec("isentropic", a=1.0, gamma=2.0),
        kernel=KernelSpec("bump", radius=0.2),
        scenario=ScenarioSpec(generator="manufactured", manufactured="advected_sine", rho_bar=1.0),
        t_end=0.1,
        dt=0.032 * h,
    )


def _restrict(values: np.ndarray) -> np.ndarray:
    return values.reshape(-1, 2).mean(axis=1)


def test_refinement_is_second_order():
    finals = {n: SimulationRunner(_advected_sine_config(n), persist=False).run().final for n in (32, 64, 128)}
    errors = []
    for coarse, fine in ((32, 64), (64, 128)):
        diff = finals[coarse].rho.values - _restrict(finals[fine].rho.values)
        errors.append(math.sqrt(np.sum(diff**2) / coarse))
    assert math.log2(errors[0] / errors[1]) >= 1.8
