from __future__ import annotations

import logging
import math
from typing import Optional, Tuple

import numpy as np

from .errors import ScenarioError, ThermoError
from .models import Grid, ScalarField, ScenarioSpec, State, VectorField
from .solver import project_vacuum
from .thermo import PressureLaw, VanDerWaalsLaw

logger = logging.getLogger(__name__)

GENERATORS = ("equilibrium", "perturbation", "two_phase", "vacuum_pocket", "manufactured")
MANUFACTURED = ("advected_sine", "acoustic_pulse")
ADVECTED_AMPLITUDE = 0.1


def generate_initial(
    spec: ScenarioSpec,
    grid: Grid,
    law: Optional[PressureLaw] = None,
    eps_vac: Optional[float] = None,
) -> State:
    """Initial (rho, m) for a scenario; m is zeroed below eps_vac when given."""
    if spec.generator == "equilibrium":
        state = _equilibrium(spec, grid)
    elif spec.generator == "perturbation":
        state = _perturbation(spec, grid)
    elif spec.generator == "two_phase":
        state = _two_phase(spec, grid, law)
    elif spec.generator == "vacuum_pocket":
        state = _vacuum_pocket(spec, grid)
    elif spec.generator == "manufactured":
        state = manufactured_state(spec, grid, 0.0, law)
    else:
        raise ScenarioError(f"unknown generator {spec.generator!r} (expected one of {', '.join(GENERATORS)})")
    if eps_vac is not None:
        state = project_vacuum(state, eps_vac)
    logger.debug("generated %s initial data on %s", spec.generator, grid)
    return state


def _state(grid: Grid, rho: np.ndarray, m: Optional[np.ndarray] = None) -> State:
    if m is None:
        m = np.zeros((grid.dim, *grid.shape))
    return State(0.0, ScalarField(grid, rho), VectorField(grid, m))


def _equilibrium(spec: ScenarioSpec, grid: Grid) -> State:
    if not spec.rho_bar > 0:
        raise ScenarioError(f"equilibrium needs rho_bar > 0, got {spec.rho_bar}")
    return _state(grid, np.full(grid.shape, float(spec.rho_bar)))


def _random_modes(spec: ScenarioSpec, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    coords = grid.coords()
    out = np.zeros(grid.shape)
    for k in spec.modes:
        for axis in range(grid.dim):
            weight = rng.uniform(0.5, 1.0)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            out += weight * np.sin(2.0 * math.pi * k * coords[axis] / grid.L + phase)
    return out


def _perturbation(spec: ScenarioSpec, grid: Grid) -> State:
    if not spec.rho_bar > 0:
        raise ScenarioError(f"perturbation needs rho_bar > 0, got {spec.rho_bar}")
    if not 0 <= spec.amplitude < spec.rho_bar:
        raise ScenarioError(f"perturbation amplitude {spec.amplitude} must lie in [0, rho_bar={spec.rho_bar})")
    if not spec.modes or any(k < 1 for k in spec.modes):
        raise ScenarioError(f"perturbation modes must be positive integers, got {spec.modes}")
    rng = np.random.default_rng(spec.seed)
    shape = _random_modes(spec, grid, rng)
    peak = float(np.max(np.abs(shape)))
    delta = spec.amplitude * shape / peak if peak > 0 else shape
    rho = spec.rho_bar + delta

    m = np.zeros((grid.dim, *grid.shape))
    if spec.velocity_amplitude:
        for axis in range(grid.dim):
            flow = _random_modes(spec, grid, rng)
            flow_peak = float(np.max(np.abs(flow))) or 1.0
            m[axis] = rho * spec.velocity_amplitude * flow / flow_peak
    return _state(grid, rho, m)


def phase_densities(spec: ScenarioSpec, law: VanDerWaalsLaw) -> Tuple[float, float]:
    """(vapor, liquid) densities, defaulting to points on either side of the spinodal window."""
    window = law.spinodal()
    if window is None:
        raise ScenarioError("two_phase needs a Van der Waals law with a spinodal window (P' < 0 somewhere)")
    lo, hi = window
    vapor = spec.rho_vapor if spec.rho_vapor is not None else 0.5 * lo
    liquid = spec.rho_liquid if spec.rho_liquid is not None else 0.5 * (hi + law.rho_c)
    for name, value in (("vapor", vapor), ("liquid", liquid)):
        if not value > 0 or float(law.dpressure(np.asarray(value))) <= 0:
            raise ScenarioError(
                f"{name} density {value:.6g} lies inside the spinodal window ({lo:.6g}, {hi:.6g}) where P' <= 0"
            )
    if not vapor < lo < hi < liquid:
        raise ScenarioError(f"need rho_vapor < {lo:.6g} and rho_liquid > {hi:.6g}, got {vapor}, {liquid}")
    return vapor, liquid


def _two_phase(spec: ScenarioSpec, grid: Grid, law: Optional[PressureLaw]) -> State:
    if not isinstance(law, VanDerWaalsLaw):
        raise ScenarioError("two_phase needs a Van der Waals law with a spinodal window (P' < 0 somewhere)")
    try:
        vapor, liquid = phase_densities(spec, law)
    except ThermoError as exc:
        raise ScenarioError(str(exc)) from exc
    if not spec.width > 0:
        raise ScenarioError(f"interface width must be > 0, got {spec.width}")
    coords = grid.coords()
    L, w = grid.L, spec.width
    if spec.geometry == "slab":
        x = coords[0]
        profile = 0.5 * (np.tanh((x - 0.25 * L) / w) - np.tanh((x - 0.75 * L) / w))
    elif spec.geometry == "disk":
        r = np.sqrt(sum((c - 0.5 * L) ** 2 for c in coords))
        profile = 0.5 * (1.0 - np.tanh((r - 0.25 * L) / w))
    else:
        raise ScenarioError(f"unknown geometry {spec.geometry!r} (expected 'slab' or 'disk')")
    return _state(grid, vapor + (liquid - vapor) * profile)


def _vacuum_pocket(spec: ScenarioSpec, grid: Grid) -> State:
    if not spec.background > 0:
        raise ScenarioError(f"vacuum_pocket needs background > 0, got {spec.background}")
    if not 0 < spec.pocket_radius < 0.5 * grid.L - spec.width:
        raise ScenarioError(f"pocket radius {spec.pocket_radius} must lie in (0, L/2 - width)")
    coords = grid.coords()
    r = np.sqrt(sum((c - 0.5 * grid.L) ** 2 for c in coords))
    s = np.clip((r - spec.pocket_radius) / spec.width, 0.0, 1.0)
    rho = spec.background * s * s * (3.0 - 2.0 * s)
    m = np.zeros((grid.dim, *grid.shape))
    if spec.velocity_amplitude:
        m[0] = rho * spec.velocity_amplitude
    return _state(grid, rho, m)


# --- Manufactured solutions ---------------------------------------------------


def manufactured_state(
    spec: ScenarioSpec, grid: Grid, t: float, law: Optional[PressureLaw] = None
) -> State:
    """Closed-form states. advected_sine is exact for pure transport at unit speed along x."""
    x = grid.coords()[0]
    L = grid.L
    m = np.zeros((grid.dim, *grid.shape))
    if spec.manufactured == "advected_sine":
        rho = spec.rho_bar + ADVECTED_AMPLITUDE * spec.rho_bar * np.sin(2.0 * math.pi * (x - t) / L)
        m[0] = rho
    elif spec.manufactured == "acoustic_pulse":
        if law is None:
            raise ScenarioError("acoustic_pulse needs the pressure law for its sound speed")
        if not 0 < spec.amplitude < spec.rho_bar:
            raise ScenarioError(f"pulse amplitude {spec.amplitude} must lie in (0, rho_bar={spec.rho_bar})")
        c = math.sqrt(float(law.dpressure(np.asarray(spec.rho_bar))))
        center = 0.5 * L + c * t
        offset = (x - center + 0.5 * L) % L - 0.5 * L
        drho = spec.amplitude * np.exp(-((offset / spec.width) ** 2))
        rho = spec.rho_bar + drho
        m[0] = rho * c * drho / spec.rho_bar
    else:
        raise ScenarioError(f"unknown manufactured solution {spec.manufactured!r}")
    return State(t, ScalarField(grid, rho), VectorField(grid, m))
