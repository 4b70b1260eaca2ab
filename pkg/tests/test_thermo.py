import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsk_capillary.errors import FreeEnergyError, ThermoError
from nsk_capillary.models import Grid, PressureSpec, ScalarField
from nsk_capillary.operators import integrate, lp_norm
from nsk_capillary.thermo import (
    IsentropicLaw,
    MonotoneTableLaw,
    VanDerWaalsLaw,
    build_pressure_law,
    dpressure,
    free_energy,
    free_energy_for,
    j_gamma,
    orlicz_norm,
    orlicz_parts,
    orlicz_psi,
    pressure,
    select_branch,
    split_vdw,
)
from tests.settings import SLOW_SETTINGS, STANDARD_SETTINGS


def vdw(rt: float = 0.1, theta: float = 0.1) -> VanDerWaalsLaw:
    return VanDerWaalsLaw(R=1.0, T_star=rt, a=1.0, b=1.0, theta=theta)


KNOTS = np.linspace(0.0, 6.0, 25)
LAWS = {
    "isentropic-1": IsentropicLaw(1.0, 1.0),
    "isentropic-1.4": IsentropicLaw(1.0, 1.4),
    "isentropic-2": IsentropicLaw(2.0, 2.0),
    "isentropic-3": IsentropicLaw(0.5, 3.0),
    "vdw-0.1": vdw(0.1),
    "vdw-0.2": vdw(0.2),
    "table": MonotoneTableLaw(tuple(KNOTS), tuple(KNOTS**2)),
}


# --- Pressure laws ----------------------------------------------------------------


def test_negative_density_is_rejected():
    with pytest.raises(ThermoError):
        pressure(IsentropicLaw(1.0, 2.0), -0.1)
    with pytest.raises(ThermoError):
        dpressure(vdw(), np.array([0.5, -1e-9]))


def test_scalar_in_scalar_out():
    assert isinstance(pressure(IsentropicLaw(1.0, 2.0), 2.0), float)
    assert pressure(IsentropicLaw(1.0, 2.0), 2.0) == 4.0


@pytest.mark.parametrize("spec", [
    PressureSpec("isentropic", a=0.0),
    PressureSpec("isentropic", gamma=0.5),
    PressureSpec("van_der_waals", theta=1.0),
    PressureSpec("van_der_waals", R=-1.0),
    PressureSpec("table", table_rho=(0.1, 1.0), table_p=(0.0, 1.0)),
    PressureSpec("table", table_rho=(0.0, 1.0, 2.0), table_p=(0.0, 2.0, 1.0)),
    PressureSpec("table", table_rho=(0.0, 1.0), table_p=(0.0,)),
    PressureSpec("ideal_gas"),
])
def test_invalid_laws(spec):
    with pytest.raises(ThermoError):
        build_pressure_law(spec)


@pytest.mark.parametrize("rt, theta", [(0.1, 0.1), (0.2, 0.1), (0.15, 0.3)])
def test_vdw_extension_is_c1(rt, theta):
    law = vdw(rt, theta)
    rc = law.rho_c
    below, above = np.array([rc - 1e-12]), np.array([rc + 1e-12])
    assert law.pressure(above)[0] == pytest.approx(law.pressure(below)[0], abs=1e-10)
    assert law.dpressure(above)[0] == pytest.approx(law.dpressure(below)[0], abs=1e-8)


def test_vdw_extension_reaches_unit_slope():
    law = vdw(0.15, theta=0.3)
    assert 0 < law.dp_c < 1
    rho = np.linspace(law.rho_c, law.rho_c + 2.0, 4001)
    slopes = law.dpressure(rho)
    assert np.all(np.diff(slopes) >= -1e-12)
    assert slopes[-1] == 1.0
    assert law.dpressure(np.array([law.rho_c + law.theta + 1e-9]))[0] == 1.0


def test_vdw_spinodal_window():
    law = vdw(0.1)
    lo, hi = law.spinodal()
    assert 0.05 < lo < 0.06
    assert 0.70 < hi < 0.75
    assert abs(float(dpressure(law, lo))) <= 1e-9
    assert abs(float(dpressure(law, hi))) <= 1e-9
    assert float(dpressure(law, 0.5 * (lo + hi))) < 0
    assert float(dpressure(law, 0.5 * lo)) > 0
    assert float(dpressure(law, hi + 0.05)) > 0


def test_vdw_pressure_is_decreasing_inside_the_window():
    law = vdw(0.1)
    assert float(pressure(law, 0.5)) == pytest.approx(-0.15, rel=1e-12)
    assert float(dpressure(law, 0.5)) == pytest.approx(-0.6, rel=1e-12)


def test_supercritical_vdw_is_monotone():
    law = vdw(0.35)
    assert law.spinodal() is None
    rho = np.linspace(0.0, 3.0, 3001)
    assert np.all(law.dpressure(rho) > 0)
    assert law.dpressure_lower_bound > 0


def test_broken_extension_is_reported():
    law = VanDerWaalsLaw(R=1.0, T_star=0.1, a=1.0, b=1.0, theta=0.5)
    with pytest.raises(ThermoError, match="broken extension"):
        law.spinodal()


def test_dpressure_lower_bound_bounds_the_derivative():
    law = vdw(0.1)
    rho = np.linspace(0.0, 2.0, 20001)
    assert np.min(law.dpressure(rho)) >= law.dpressure_lower_bound - 1e-12


def test_table_law_is_monotone_and_extrapolates_linearly():
    law = LAWS["table"]
    rho = np.linspace(0.0, 9.0, 901)
    p = law.pressure(rho)
    assert p[0] == 0.0
    assert np.all(np.diff(p) >= 0)
    np.testing.assert_allclose(law.pressure(np.array([3.0])), [9.0], rtol=1e-12)
    slope = law.dpressure(np.array([6.0]))[0]
    np.testing.assert_allclose(law.pressure(np.array([8.0])), [36.0 + 2.0 * slope], rtol=1e-12)


# --- Free energy ------------------------------------------------------------------


@pytest.mark.parametrize("name", list(LAWS))
def test_free_energy_identity(name):
    law = LAWS[name]
    pi = free_energy_for(law)
    for s in (0.5, 1.0, 2.0):
        step = 1e-4 * s
        dpi = (pi(s + step) - pi(s - step)) / (2.0 * step)
        p = float(pressure(law, s))
        assert s * dpi - pi(s) == pytest.approx(p, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("name", list(LAWS))
def test_free_energy_vanishes_at_vacuum(name):
    assert free_energy(LAWS[name], 0.0) == 0.0


def test_branch_selection():
    assert select_branch(IsentropicLaw(1.0, 2.0)) == "power_law"
    assert select_branch(IsentropicLaw(1.0, 1.0)) == "log_reference"
    assert select_branch(vdw(0.1)) == "log_reference"
    assert select_branch(LAWS["table"]) == "quadrature"


def test_quadrature_agrees_with_closed_form():
    for law in (IsentropicLaw(1.5, 2.0), IsentropicLaw(0.5, 3.0)):
        quad = free_energy_for(law, "quadrature")
        closed = free_energy_for(law)
        for s in (0.3, 1.0, 2.5):
            assert quad(s) == pytest.approx(closed(s), rel=1e-9)


def test_table_free_energy_across_knots():
    law = LAWS["table"]
    pi = free_energy_for(law)
    rho = np.linspace(0.1, 5.0, 100)
    values = np.asarray(pi(rho))
    assert np.all(np.isfinite(values))
    assert np.all(np.diff(values) > 0)
    step = 1e-4 * rho
    slope = (np.asarray(pi(rho + step)) - np.asarray(pi(rho - step))) / (2.0 * step)
    np.testing.assert_allclose(rho * slope - values, law.pressure(rho), rtol=1e-6, atol=1e-8)


def test_divergent_quadrature_raises():
    with pytest.raises(FreeEnergyError):
        free_energy_for(IsentropicLaw(1.0, 1.0), "quadrature")(0.5)


def test_vdw_free_energy_reference_point():
    law = vdw(0.2)
    assert free_energy(law, 1.0) == pytest.approx(0.0, abs=1e-14)
    assert free_energy(law, 2.5) != 0.0


# --- Pressure splitting ----------------------------------------------------------------


@pytest.mark.parametrize("rt", [0.1, 0.2])
def test_split_invariants(rt):
    law = vdw(rt)
    split = split_vdw(law)
    lo, hi = split.spinodal
    assert split.rho_bar_split > hi
    rho = np.linspace(0.0, 1.25 * split.rho_bar_split, 10_000)
    p1, p2 = np.asarray(split.p1(rho)), np.asarray(split.p2(rho))
    assert np.min(np.diff(p1)) >= -1e-9
    assert np.min(p2) >= 0.0
    assert np.all(p2[rho >= split.rho_bar_split] == 0.0)
    assert np.max(np.abs(p1 - p2 - law.pressure(rho))) <= 1e-9
    assert np.max(p2) > 0


def test_monotone_law_splits_trivially():
    split = split_vdw(vdw(0.35))
    assert split.spinodal is None
    assert split.rho_bar_split == 0.0
    rho = np.linspace(0.0, 2.0, 11)
    assert np.all(np.asarray(split.p2(rho)) == 0.0)
    np.testing.assert_array_equal(split.p1(rho), vdw(0.35).pressure(rho))


def test_split_needs_vdw():
    with pytest.raises(ThermoError):
        split_vdw(IsentropicLaw(1.0, 2.0))


def test_split_table_csv(tmp_path):
    path = split_vdw(vdw(0.2)).write_csv(tmp_path / "split" / "pressure_split.csv", samples=101)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["rho", "P", "P1", "P2"]
    assert len(rows) == 102
    for rho, p, p1, p2 in (map(float, row) for row in rows[1:]):
        assert p1 - p2 == pytest.approx(p, abs=1e-9)


# --- Equilibrium functionals ----------------------------------------------------------


@given(
    rho=st.floats(min_value=0.0, max_value=10.0),
    rho_bar=st.floats(min_value=0.1, max_value=5.0),
    gamma=st.floats(min_value=1.0, max_value=4.0),
)
@STANDARD_SETTINGS
def test_j_gamma_is_nonnegative(rho, rho_bar, gamma):
    assert j_gamma(rho, rho_bar, gamma) >= -1e-12 * (1.0 + rho**gamma + rho_bar**gamma)


def test_j_gamma_minimum_and_gamma_two():
    assert j_gamma(1.3, 1.3, 1.7) == pytest.approx(0.0, abs=1e-13)
    rho = np.linspace(0.0, 3.0, 31)
    np.testing.assert_allclose(j_gamma(rho, 1.2, 2.0), (rho - 1.2) ** 2, atol=1e-13)


@pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
def test_j_gamma_is_tangent_at_rho_bar(gamma):
    rho_bar = 1.5
    ratios = [j_gamma(rho_bar + eps, rho_bar, gamma) / eps**2 for eps in (1e-2, 1e-3, 1e-4)]
    limit = 0.5 * gamma * (gamma - 1.0) * rho_bar ** (gamma - 2.0)
    for r in ratios:
        assert r == pytest.approx(limit, rel=0.05)
    assert ratios[-1] == pytest.approx(ratios[-2], rel=0.05)


def test_j_gamma_rejects_bad_parameters():
    with pytest.raises(ThermoError):
        j_gamma(1.0, 0.0, 2.0)
    with pytest.raises(ThermoError):
        j_gamma(1.0, 1.0, 0.5)


ORLICZ_GRID = Grid(1, 64, 1.0)


def test_orlicz_psi_is_continuous_at_delta():
    delta = 0.7
    left = orlicz_psi(np.array([delta]), 2.0, 3.5, delta)[0]
    right = orlicz_psi(np.array([delta * (1 + 1e-12)]), 2.0, 3.5, delta)[0]
    assert right == pytest.approx(left, rel=1e-10)


@given(seed=st.integers(0, 2**32 - 1), q=st.floats(2.0, 4.0), delta=st.floats(0.5, 1.5))
@SLOW_SETTINGS
def test_orlicz_normalization(seed, q, delta):
    rng = np.random.default_rng(seed)
    f = ScalarField(ORLICZ_GRID, rng.normal(scale=rng.uniform(0.1, 3.0), size=ORLICZ_GRID.shape))
    norm = orlicz_norm(f, 2.0, q, delta)
    mass = integrate(ScalarField(ORLICZ_GRID, orlicz_psi(f.values / norm, 2.0, q, delta)))
    assert mass == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("delta", [0.1, 1.0, 10.0])
def test_orlicz_norm_collapses_to_l2(delta, rng):
    f = ScalarField(ORLICZ_GRID, rng.normal(size=ORLICZ_GRID.shape))
    assert orlicz_norm(f, 2.0, 2.0, delta) == pytest.approx(lp_norm(f, 2.0), rel=1e-9)


def test_orlicz_norm_of_zero_and_bad_exponents():
    zero = ScalarField.constant(ORLICZ_GRID, 0.0)
    assert orlicz_norm(zero, 2.0, 3.0, 1.0) == 0.0
    with pytest.raises(ThermoError):
        orlicz_norm(zero, 1.0, 3.0, 1.0)
    with pytest.raises(ThermoError):
        orlicz_norm(zero, 3.0, 2.0, 1.0)


def test_orlicz_parts_respect_the_embedding(rng):
    # L^q_p sits inside L^q1_p1 for q1 <= q and p <= p1
    f = ScalarField(ORLICZ_GRID, rng.normal(scale=2.0, size=ORLICZ_GRID.shape))
    p, q, p1, q1, delta = 2.0, 4.0, 3.0, 2.5, 1.0
    small, large = orlicz_parts(f, p, q, delta)
    small1, large1 = orlicz_parts(f, p1, q1, delta)
    assert small1**p1 <= delta ** (p1 - p) * small**p * (1 + 1e-12)
    assert large1**q1 <= delta ** (q1 - q) * large**q * (1 + 1e-12)
    assert small > 0 and large > 0
