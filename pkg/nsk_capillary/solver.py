from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import BlowUpError, ConfigError
from .kernel import Kernel, capillary_force_array
from .models import PhysicsSpec, ScalarField, State, VectorField
from .operators import centered_diff, compact_laplacian, divergence_array
from .thermo import PressureLaw

logger = logging.getLogger(__name__)

VISCOSITY_CONSTRAINT = "μ>0 and λ+2μ>0"


@dataclass(frozen=True)
class PhysParams:
    mu: float
    lam: float
    kappa: float
    law: PressureLaw
    kernel: Kernel
    eps_vac: float
    artificial_viscosity: float = 1.0

    def __post_init__(self) -> None:
        problems = []
        if not (self.mu > 0 and self.lam + 2.0 * self.mu > 0):
            problems.append(f"viscosity mu={self.mu}, lambda={self.lam} violates {VISCOSITY_CONSTRAINT}")
        if not self.kappa >= 0:
            problems.append(f"capillarity kappa={self.kappa} violates κ ≥ 0")
        if not self.eps_vac > 0:
            problems.append(f"vacuum floor eps_vac={self.eps_vac} must be > 0")
        if not self.artificial_viscosity >= 0:
            problems.append(f"artificial_viscosity={self.artificial_viscosity} must be >= 0")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_spec(cls, spec: PhysicsSpec, law: PressureLaw, kernel: Kernel, rho_scale: float) -> "PhysParams":
        return cls(
            mu=spec.mu,
            lam=spec.lam,
            kappa=spec.kappa,
            law=law,
            kernel=kernel,
            eps_vac=spec.eps_vac_factor * rho_scale,
            artificial_viscosity=spec.artificial_viscosity,
        )


@dataclass(frozen=True)
class StepReport:
    state: State
    vacuum_mass: float
    vacuum_momentum: Tuple[float, ...]
    clamped_cells: int


# --- Right-hand side ----------------------------------------------------------


def velocity_array(rho: np.ndarray, m: np.ndarray, eps_vac: float) -> np.ndarray:
    """u = m/rho where rho >= eps_vac, 0 on vacuum cells."""
    live = rho >= eps_vac
    safe = np.where(live, rho, 1.0)
    return np.where(live, m / safe, 0.0)


def wave_speed_array(rho: np.ndarray, p: PhysParams) -> np.ndarray:
    """Acoustic plus capillary speed sqrt(max(P',0) + kappa rho)."""
    rho_pos = np.maximum(rho, 0.0)
    return np.sqrt(np.maximum(p.law.dpressure(rho_pos), 0.0) + p.kappa * rho_pos)


def _rusanov(q: np.ndarray, speed: np.ndarray, h: float) -> np.ndarray:
    """Sum over axes of (a+ (q[j+1]-q[j]) - a- (q[j]-q[j-1])) / 2h, a at interfaces."""
    out = np.zeros_like(q)
    for axis in range(q.ndim):
        s = speed[axis]
        a_plus = np.maximum(s, np.roll(s, -1, axis))
        a_minus = np.roll(a_plus, 1, axis)
        out += a_plus * (np.roll(q, -1, axis) - q) - a_minus * (q - np.roll(q, 1, axis))
    return out / (2.0 * h)


def _rhs_arrays(rho: np.ndarray, m: np.ndarray, p: PhysParams, h: float) -> Tuple[np.ndarray, np.ndarray]:
    dim = rho.ndim
    u = velocity_array(rho, m, p.eps_vac)
    rho_pos = np.maximum(rho, 0.0)

    drho = -divergence_array(m, h)
    dm = np.empty_like(m)
    pressure = p.law.pressure(rho_pos)
    div_u = divergence_array(u, h)
    force = capillary_force_array(p.kernel, rho, p.kappa) if p.kappa > 0 else np.zeros_like(m)
    for i in range(dim):
        conv = divergence_array([m[i] * u[j] for j in range(dim)], h)
        dm[i] = (
            -conv
            - centered_diff(pressure, i, h)
            + p.mu * compact_laplacian(u[i], h)
            + (p.lam + p.mu) * centered_diff(div_u, i, h)
            + force[i]
        )

    if p.artificial_viscosity > 0:
        c = wave_speed_array(rho, p)
        speed = np.abs(u) + c
        drho += p.artificial_viscosity * _rusanov(rho, speed, h)
        for i in range(dim):
            dm[i] += p.artificial_viscosity * _rusanov(m[i], speed, h)
    return drho, dm


def _check_finite(arr: np.ndarray, quantity: str, t: float, comp_axis: bool = False) -> None:
    bad = ~np.isfinite(arr)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        cell = idx[1:] if comp_axis else idx
        raise BlowUpError(quantity, cell, t)


def rhs(state: State, p: PhysParams) -> Tuple[ScalarField, VectorField]:
    grid = state.grid
    drho, dm = _rhs_arrays(state.rho.values, state.m.values, p, grid.h)
    _check_finite(drho, "drho/dt", state.t)
    _check_finite(dm, "dm/dt", state.t, comp_axis=True)
    return ScalarField(grid, drho), VectorField(grid, dm)


# --- Time stepping ------------------------------------------------------------


def cfl_dt(state: State, p: PhysParams, c_cfl: float) -> float:
    grid = state.grid
    rho = state.rho.values
    u = velocity_array(rho, state.m.values, p.eps_vac)
    u_max = float(np.max(np.abs(u))) if u.size else 0.0
    c_max = float(np.max(wave_speed_array(rho, p)))
    rho_min = max(float(np.min(rho)), p.eps_vac)
    nu = (2.0 * p.mu + abs(p.lam)) / rho_min

    hyperbolic = grid.h / (u_max + c_max) if u_max + c_max > 0 else math.inf
    parabolic = grid.h**2 / (2.0 * grid.dim * nu) if nu > 0 else math.inf
    dt = c_cfl * min(hyperbolic, parabolic)
    if not math.isfinite(dt) or dt <= 0:
        dt = c_cfl * grid.h
    return dt


def advance(state: State, p: PhysParams, dt: float) -> StepReport:
    """One RK2 midpoint step followed by vacuum projection."""
    grid = state.grid
    h = grid.h
    rho0, m0 = state.rho.values, state.m.values

    k1_rho, k1_m = _rhs_arrays(rho0, m0, p, h)
    _check_finite(k1_rho, "drho/dt", state.t)
    _check_finite(k1_m, "dm/dt", state.t, comp_axis=True)
    rho_half = rho0 + 0.5 * dt * k1_rho
    m_half = m0 + 0.5 * dt * k1_m
    k2_rho, k2_m = _rhs_arrays(rho_half, m_half, p, h)
    _check_finite(k2_rho, "drho/dt", state.t + 0.5 * dt)
    _check_finite(k2_m, "dm/dt", state.t + 0.5 * dt, comp_axis=True)
    rho1 = rho0 + dt * k2_rho
    m1 = m0 + dt * k2_m
    _check_finite(rho1, "rho", state.t + dt)
    _check_finite(m1, "m", state.t + dt, comp_axis=True)

    vacuum = rho1 < p.eps_vac
    clamped = int(np.count_nonzero(vacuum))
    vacuum_mass = 0.0
    vacuum_momentum = (0.0,) * grid.dim
    if clamped:
        vol = grid.cell_volume
        vacuum_mass = float(np.sum(p.eps_vac - rho1[vacuum]) * vol)
        vacuum_momentum = tuple(float(np.sum(m1[i][vacuum]) * vol) for i in range(grid.dim))
        rho1 = np.where(vacuum, p.eps_vac, rho1)
        m1 = np.where(vacuum[None, ...], 0.0, m1)
        logger.debug("t=%.6g: clamped %d vacuum cells, added mass %.3e", state.t + dt, clamped, vacuum_mass)

    new_state = State(state.t + dt, ScalarField(grid, rho1), VectorField(grid, m1))
    return StepReport(new_state, vacuum_mass, vacuum_momentum, clamped)


def step(state: State, p: PhysParams, dt: float) -> State:
    return advance(state, p, dt).state


def project_vacuum(state: State, eps_vac: float) -> State:
    """Enforce m = 0 wherever rho < eps_vac (initial-data convention)."""
    vacuum = state.rho.values < eps_vac
    if not np.any(vacuum):
        return state
    m = np.where(vacuum[None, ...], 0.0, state.m.values)
    return State(state.t, state.rho, VectorField(state.grid, m))
