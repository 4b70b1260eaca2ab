import math

import numpy as np
import pytest

from nsk_capillary.errors import ScenarioError
from nsk_capillary.models import Grid, ScenarioSpec
from nsk_capillary.operators import integrate
from nsk_capillary.scenarios import generate_initial, manufactured_state, phase_densities
from nsk_capillary.thermo import IsentropicLaw, VanDerWaalsLaw

GRID = Grid(1, 128, 1.0)
GRID_2D = Grid(2, 64, 1.0)
VDW = VanDerWaalsLaw(R=1.0, T_star=0.1, a=1.0, b=1.0, theta=0.1)


def test_equilibrium_is_uniform_and_at_rest():
    state = generate_initial(ScenarioSpec(rho_bar=1.7), GRID_2D)
    assert np.all(state.rho.values == 1.7)
    assert np.all(state.m.values == 0.0)
    assert state.t == 0.0


def test_perturbation_is_seeded():
    spec = ScenarioSpec(generator="perturbation", amplitude=0.05, modes=(1, 3), seed=11, velocity_amplitude=0.1)
    a = generate_initial(spec, GRID_2D)
    b = generate_initial(spec, GRID_2D)
    np.testing.assert_array_equal(a.rho.values, b.rho.values)
    np.testing.assert_array_equal(a.m.values, b.m.values)
    other = generate_initial(ScenarioSpec(generator="perturbation", amplitude=0.05, modes=(1, 3), seed=12), GRID_2D)
    assert not np.array_equal(a.rho.values, other.rho.values)


def test_perturbation_amplitude_is_exact():
    spec = ScenarioSpec(generator="perturbation", rho_bar=2.0, amplitude=0.3, modes=(2,), seed=3)
    state = generate_initial(spec, GRID)
    assert np.max(np.abs(state.rho.values - 2.0)) == pytest.approx(0.3, rel=1e-14)
    assert integrate(state.rho) == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("spec", [
    ScenarioSpec(generator="perturbation", rho_bar=1.0, amplitude=1.0),
    ScenarioSpec(generator="perturbation", rho_bar=1.0, amplitude=0.1, modes=(0,)),
    ScenarioSpec(generator="perturbation", rho_bar=0.0),
    ScenarioSpec(generator="equilibrium", rho_bar=-1.0),
])
def test_invalid_perturbations(spec):
    with pytest.raises(ScenarioError):
        generate_initial(spec, GRID)


# --- Two-phase ----------------------------------------------------------------------


def test_phase_densities_sit_outside_the_spinodal_window():
    lo, hi = VDW.spinodal()
    vapor, liquid = phase_densities(ScenarioSpec(generator="two_phase"), VDW)
    assert vapor < lo < hi < liquid
    assert liquid < VDW.rho_c


def test_two_phase_slab_spans_both_phases():
    state = generate_initial(ScenarioSpec(generator="two_phase", width=0.02), GRID, VDW)
    vapor, liquid = phase_densities(ScenarioSpec(generator="two_phase"), VDW)
    rho = state.rho.values
    assert rho[GRID.n // 2] == pytest.approx(liquid, rel=1e-6)
    assert rho[0] == pytest.approx(vapor, rel=1e-6)
    assert np.all(rho >= vapor - 1e-12) and np.all(rho <= liquid + 1e-12)


def test_two_phase_disk_is_radially_symmetric():
    spec = ScenarioSpec(generator="two_phase", geometry="disk", width=0.03)
    rho = generate_initial(spec, GRID_2D, VDW).rho.values
    np.testing.assert_allclose(rho, rho.T, rtol=0, atol=1e-14)
    assert rho[32, 32] > rho[0, 0]


@pytest.mark.parametrize("law", [IsentropicLaw(1.0, 2.0), VanDerWaalsLaw(R=1.0, T_star=0.35, a=1.0, b=1.0, theta=0.1), None])
def test_two_phase_needs_a_spinodal(law):
    with pytest.raises(ScenarioError, match="spinodal"):
        generate_initial(ScenarioSpec(generator="two_phase"), GRID, law)


def test_phase_density_inside_the_window_is_rejected():
    with pytest.raises(ScenarioError, match="inside the spinodal window"):
        phase_densities(ScenarioSpec(generator="two_phase", rho_vapor=0.3), VDW)


def test_unknown_geometry():
    with pytest.raises(ScenarioError, match="geometry"):
        generate_initial(ScenarioSpec(generator="two_phase", geometry="ring"), GRID, VDW)


# --- Vacuum pocket ---------------------------------------------------------------


def test_vacuum_pocket_has_exact_zeros():
    spec = ScenarioSpec(generator="vacuum_pocket", background=1.0, pocket_radius=0.1, width=0.05)
    state = generate_initial(spec, GRID)
    r = np.abs(GRID.coords()[0] - 0.5)
    rho = state.rho.values
    assert np.all(rho[r <= 0.1] == 0.0)
    assert np.all(rho[r >= 0.15] == 1.0)
    assert np.all(np.diff(rho[GRID.n // 2:]) >= 0)


def test_vacuum_floor_projection_zeroes_momentum():
    spec = ScenarioSpec(generator="vacuum_pocket", pocket_radius=0.1, width=0.05, velocity_amplitude=1.0)
    raw = generate_initial(spec, GRID)
    projected = generate_initial(spec, GRID, eps_vac=0.1)
    below = raw.rho.values < 0.1
    assert np.any(below & (raw.m.values[0] != 0.0))
    assert np.all(projected.m.values[0][below] == 0.0)
    np.testing.assert_array_equal(projected.rho.values, raw.rho.values)


def test_pocket_must_fit_the_box():
    with pytest.raises(ScenarioError):
        generate_initial(ScenarioSpec(generator="vacuum_pocket", pocket_radius=0.49, width=0.05), GRID)


# --- Manufactured ------------------------------------------------------------------


def test_advected_sine_translates_at_unit_speed():
    spec = ScenarioSpec(generator="manufactured", manufactured="advected_sine", rho_bar=1.0)
    shift = 8
    later = manufactured_state(spec, GRID, shift * GRID.h)
    start = generate_initial(spec, GRID)
    np.testing.assert_allclose(later.rho.values, np.roll(start.rho.values, shift), rtol=0, atol=1e-13)
    np.testing.assert_array_equal(later.m.values[0], later.rho.values)
    assert later.t == pytest.approx(shift * GRID.h)


def test_acoustic_pulse_moves_right_at_the_sound_speed():
    law = IsentropicLaw(1.0, 2.0)
    spec = ScenarioSpec(generator="manufactured", manufactured="acoustic_pulse", rho_bar=1.0, amplitude=1e-3, width=0.05)
    start = manufactured_state(spec, GRID, 0.0, law)
    assert int(np.argmax(start.rho.values)) in (GRID.n // 2 - 1, GRID.n // 2)
    c = math.sqrt(2.0)
    later = manufactured_state(spec, GRID, 16 * GRID.h / c, law)
    np.testing.assert_allclose(later.rho.values, np.roll(start.rho.values, 16), rtol=0, atol=1e-12)
    assert np.all(later.m.values[0] >= 0)


def test_acoustic_pulse_needs_a_law():
    spec = ScenarioSpec(generator="manufactured", manufactured="acoustic_pulse", amplitude=1e-3)
    with pytest.raises(ScenarioError, match="pressure law"):
        generate_initial(spec, GRID)


@pytest.mark.parametrize("spec", [
    ScenarioSpec(generator="spiral"),
    ScenarioSpec(generator="manufactured", manufactured="vortex"),
])
def test_unknown_generators(spec):
    with pytest.raises(ScenarioError, match="unknown"):
        generate_initial(spec, GRID)
