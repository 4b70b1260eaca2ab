from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DiagnosticError
from .kernel import Kernel, convolve_array, interaction_energy
from .models import DiagnosticsSpec, LedgerRecord, RenormSpec, ScalarField, State
from .operators import divergence_array, forward_diff, integrate, lp_norm
from .renormalization import mass_residual, renorm_residual
from .solver import PhysParams, velocity_array
from .thermo import FreeEnergy, VanDerWaalsLaw, free_energy_for, j_gamma, orlicz_norm

logger = logging.getLogger(__name__)

AXES = ("x", "y")


# --- Energies -------------------------------------------------------------------


def kinetic_energy(state: State, eps_vac: float) -> float:
    """Integral of |m|^2 / 2 rho, zero on vacuum cells."""
    m = state.m.values
    u = velocity_array(state.rho.values, m, eps_vac)
    return float(0.5 * np.sum(m * u) * state.grid.cell_volume)


def dissipation_rate(state: State, p: PhysParams) -> float:
    """mu |grad u|^2 + (lambda + mu) |div u|^2, integrated.

    Forward differences for grad u and the centered divergence are the
    discrete duals of the compact Laplacian and of grad_div.
    """
    grid = state.grid
    u = velocity_array(state.rho.values, state.m.values, p.eps_vac)
    grad_sq = sum(forward_diff(u[i], j, grid.h) ** 2 for i in range(grid.dim) for j in range(grid.dim))
    div_u = divergence_array(u, grid.h)
    density = p.mu * grad_sq + (p.lam + p.mu) * div_u**2
    return float(np.sum(density) * grid.cell_volume)


def total_energy(state: State, p: PhysParams, pi: Optional[FreeEnergy] = None) -> LedgerRecord:
    pi = pi or free_energy_for(p.law)
    grid = state.grid
    vol = grid.cell_volume
    rho = state.rho.values
    return LedgerRecord(
        t=state.t,
        mass=float(np.sum(rho) * vol),
        momentum=tuple(float(np.sum(state.m.values[i]) * vol) for i in range(grid.dim)),
        kinetic=kinetic_energy(state, p.eps_vac),
        free=float(np.sum(pi(rho)) * vol),
        nonlocal_=interaction_energy(p.kernel, state.rho, p.kappa) if p.kappa > 0 else 0.0,
    )


def exchange_rate(kernel: Kernel, rho: ScalarField, drho_dt: ScalarField, kappa: float) -> float:
    """-kappa * integral of (phi*rho - rho) d_t rho: the time derivative of the interaction energy."""
    d = convolve_array(kernel, rho.values) - rho.values
    return float(-kappa * np.sum(d * drho_dt.values) * rho.grid.cell_volume)


def energy_residuals(records: Sequence[LedgerRecord]) -> List[float]:
    """R(t_n) = E(t_n) - E(0) + cumulative dissipation."""
    if not records:
        return []
    e0 = records[0].energy
    return [r.residual - e0 for r in records]


# --- Effective viscous flux -----------------------------------------------------


def effective_flux(state: State, p: PhysParams) -> ScalarField:
    """P + (kappa/2) rho^2 - (2 mu + lambda) div u."""
    grid = state.grid
    rho = state.rho.values
    u = velocity_array(rho, state.m.values, p.eps_vac)
    values = p.law.pressure(rho) + 0.5 * p.kappa * rho**2 - (2.0 * p.mu + p.lam) * divergence_array(u, grid.h)
    return ScalarField(grid, values)


def total_variation(f: ScalarField) -> float:
    grid = f.grid
    jumps = sum(np.sum(np.abs(np.roll(f.values, -1, axis) - f.values)) for axis in range(grid.dim))
    return float(jumps * grid.h ** (grid.dim - 1))


# --- Integrability monitor ------------------------------------------------------


def integrability_window(gamma: float, n_formal: int) -> float:
    """Largest admissible eps: 4/N - 1 for N = 2, 3 and (2/N) gamma - 1 for N >= 4."""
    if n_formal in (2, 3):
        return 4.0 / n_formal - 1.0
    if n_formal >= 4:
        if not gamma > n_formal / 2.0:
            raise DiagnosticError(f"N={n_formal} needs gamma > N/2, got gamma={gamma}")
        return 2.0 * gamma / n_formal - 1.0
    raise DiagnosticError(f"formal dimension must be >= 2, got {n_formal}")


def check_integrability_eps(eps: float, gamma: float, n_formal: int) -> Optional[str]:
    """Problem text when eps lies outside the window, else None."""
    try:
        upper = integrability_window(gamma, n_formal)
    except DiagnosticError as exc:
        return str(exc)
    if n_formal in (2, 3):
        rule = "0<ε≤4/N−1 if N=2,3"
    else:
        rule = "0<ε≤(2/N)γ−1 if N≥4"
    if not 0 < eps <= upper:
        return f"integrability eps={eps} outside the window ({rule}; N={n_formal}, γ={gamma} gives ε ≤ {upper:.6g})"
    return None


@dataclass
class IntegrabilityMonitor:
    """Running time integral of rho^(gamma+eps) + rho^(2+eps) (trapezoidal in time)."""

    gamma: float
    eps: float
    n_formal: int
    accumulated: float = 0.0
    elapsed: float = 0.0
    _t_last: Optional[float] = field(default=None, repr=False)
    _f_last: float = field(default=0.0, repr=False)

    def __post_init__(self) -> None:
        problem = check_integrability_eps(self.eps, self.gamma, self.n_formal)
        if problem:
            raise ConfigError([problem])

    def integrand(self, state: State) -> float:
        rho = state.rho.values
        return float(np.sum(rho ** (self.gamma + self.eps) + rho ** (2.0 + self.eps)) * state.grid.cell_volume)

    def update(self, state: State) -> float:
        value = self.integrand(state)
        if self._t_last is not None:
            dt = state.t - self._t_last
            self.accumulated += 0.5 * dt * (value + self._f_last)
            self.elapsed += dt
        self._t_last, self._f_last = state.t, value
        return self.accumulated

    @property
    def ratio(self) -> float:
        return self.accumulated / self.elapsed if self.elapsed > 0 else 0.0


# --- Equilibrium functionals ----------------------------------------------------


@dataclass(frozen=True)
class EquilibriumRecord:
    kinetic: float
    free: float
    nonlocal_: float

    @property
    def total(self) -> float:
        return self.kinetic + self.free + self.nonlocal_


def equilibrium_energy(
    state: State,
    p: PhysParams,
    rho_bar: float,
    gamma: float,
    a: float,
    gamma1_extension: bool = False,
) -> EquilibriumRecord:
    """Kinetic + (a/(gamma-1)) int j_gamma(rho) + E_global[rho - rho_bar]."""
    rho = state.rho.values
    vol = state.grid.cell_volume
    if gamma == 1:
        if not gamma1_extension:
            raise DiagnosticError("gamma=1 equilibrium energy needs the gamma1_extension flag")
        safe = np.where(rho > 0, rho, 1.0)
        density = np.where(rho > 0, rho * np.log(safe), 0.0) - rho * math.log(rho_bar) - (rho - rho_bar)
        free = a * float(np.sum(density) * vol)
    elif gamma > 1:
        free = a / (gamma - 1.0) * float(np.sum(j_gamma(rho, rho_bar, gamma)) * vol)
    else:
        raise DiagnosticError(f"equilibrium energy needs gamma >= 1, got {gamma}")
    nonlocal_ = 0.0
    if p.kappa > 0:
        nonlocal_ = interaction_energy(p.kernel, state.rho - rho_bar, p.kappa)
    return EquilibriumRecord(kinetic_energy(state, p.eps_vac), free, nonlocal_)


def orlicz_perturbation_norm(state: State, rho_bar: float, gamma: float) -> float:
    return orlicz_norm(state.rho - rho_bar, p=2.0, q=max(gamma, 2.0), delta=1.0)


def vdw_excursion(state: State, b: float) -> Tuple[float, float]:
    """(measure of {rho > b}, its Chebyshev bound ||rho||_2^2 / b^2)."""
    rho = state.rho.values
    vol = state.grid.cell_volume
    measure = float(np.count_nonzero(rho > b) * vol)
    bound = lp_norm(state.rho, 2.0) ** 2 / (b * b)
    return measure, bound


# --- Ledger ---------------------------------------------------------------------


def ledger_columns(dim: int, extras: Sequence[str] = ()) -> List[str]:
    cols = ["t", "mass", *[f"mom_{a}" for a in AXES[:dim]], "kinetic", "free", "nonlocal",
            "dissipation_cum", "vacuum_cum"]
    return cols + list(extras)


class EnergyLedger:
    """Accumulates dissipation and vacuum corrections every step; keeps records at cadence."""

    def __init__(self, params: PhysParams, spec: Optional[DiagnosticsSpec] = None,
                 gamma: float = 2.0, a: float = 1.0) -> None:
        self.params = params
        self.spec = spec or DiagnosticsSpec()
        self.gamma = gamma
        self.a = a
        self.pi = free_energy_for(params.law)
        self.records: List[LedgerRecord] = []
        self.dissipation_cum = 0.0
        self.vacuum_cum = 0.0
        self.momentum_vacuum_cum: Tuple[float, ...] = ()
        self._last_t: Optional[float] = None
        self._last_rate = 0.0
        monitor_gamma = self.spec.gamma if self.spec.gamma is not None else gamma
        self.monitor: Optional[IntegrabilityMonitor] = None
        if self.spec.eps_integrability is not None:
            self.monitor = IntegrabilityMonitor(monitor_gamma, self.spec.eps_integrability, self.spec.n_formal)
        self.renorm = RenormSpec(kind=self.spec.renorm_b, eps=self.spec.renorm_eps, k=self.spec.cutoff_k)
        self._window: Deque[State] = deque(maxlen=3)

    def extra_columns(self, dim: int) -> List[str]:
        cols = [f"vacuum_mom_{a}" for a in AXES[:dim]]
        if self.spec.equilibrium:
            cols += ["eq_kinetic", "eq_free", "eq_nonlocal", "eq_total", "orlicz_norm"]
        if self.monitor is not None:
            cols += ["integrability", "integrability_ratio"]
        if self.spec.effective_flux:
            cols += ["eff_flux_tv", "pressure_tv"]
        if isinstance(self.params.law, VanDerWaalsLaw):
            cols += ["vdw_excess_measure", "vdw_excess_bound"]
        cols += ["renorm_residual", "mass_residual"]
        return cols

    def observe(self, state: State, vacuum_mass: float = 0.0,
                vacuum_momentum: Optional[Sequence[float]] = None, keep: bool = True) -> Optional[LedgerRecord]:
        dim = state.grid.dim
        if not self.momentum_vacuum_cum:
            self.momentum_vacuum_cum = (0.0,) * dim
        rate = dissipation_rate(state, self.params)
        if self._last_t is not None:
            self.dissipation_cum += 0.5 * (state.t - self._last_t) * (rate + self._last_rate)
        self._last_t, self._last_rate = state.t, rate
        self.vacuum_cum += vacuum_mass
        if vacuum_momentum is not None:
            self.momentum_vacuum_cum = tuple(c + v for c, v in zip(self.momentum_vacuum_cum, vacuum_momentum))
        if self.monitor is not None:
            self.monitor.update(state)
        self._window.append(state)
        if not keep:
            return None

        record = total_energy(state, self.params, self.pi)
        record.dissipation_cum = self.dissipation_cum
        record.vacuum_cum = self.vacuum_cum
        record.momentum_vacuum_cum = self.momentum_vacuum_cum
        record.extras = self._extras(state)
        self.records.append(record)
        return record

    def _extras(self, state: State) -> Dict[str, float]:
        extras = {f"vacuum_mom_{a}": v for a, v in zip(AXES, self.momentum_vacuum_cum)}
        spec = self.spec
        if spec.equilibrium:
            rho_bar = spec.rho_bar if spec.rho_bar is not None else integrate(state.rho) / state.grid.volume
            eq = equilibrium_energy(state, self.params, rho_bar, self.gamma, self.a, spec.gamma1_extension)
            extras.update(eq_kinetic=eq.kinetic, eq_free=eq.free, eq_nonlocal=eq.nonlocal_, eq_total=eq.total)
            extras["orlicz_norm"] = orlicz_perturbation_norm(state, rho_bar, self.gamma)
        if self.monitor is not None:
            extras["integrability"] = self.monitor.accumulated
            extras["integrability_ratio"] = self.monitor.ratio
        if spec.effective_flux:
            extras["eff_flux_tv"] = total_variation(effective_flux(state, self.params))
            extras["pressure_tv"] = total_variation(ScalarField(state.grid, self.params.law.pressure(state.rho.values)))
        law = self.params.law
        if isinstance(law, VanDerWaalsLaw):
            extras["vdw_excess_measure"], extras["vdw_excess_bound"] = vdw_excursion(state, law.b)
        extras["renorm_residual"], extras["mass_residual"] = self._transport_residuals()
        return extras

    def _transport_residuals(self) -> Tuple[float, float]:
        """Renormalized and plain mass residuals centred on the middle of the last three states."""
        if len(self._window) < 3:
            return math.nan, math.nan
        snaps = list(self._window)
        eps_vac = self.params.eps_vac
        try:
            return (renorm_residual(snaps, self.renorm, self.params.law, eps_vac),
                    mass_residual(snaps, eps_vac))
        except DiagnosticError as exc:
            logger.debug("transport residuals skipped at t=%.6g: %s", snaps[-1].t, exc)
            return math.nan, math.nan

    def mass_drift(self) -> float:
        """Mass change net of vacuum corrections, latest record vs first."""
        if not self.records:
            return 0.0
        first, last = self.records[0], self.records[-1]
        return last.mass - first.mass - last.vacuum_cum

    def momentum_drift(self) -> Tuple[float, ...]:
        if not self.records:
            return ()
        first, last = self.records[0], self.records[-1]
        return tuple(l + v - f for f, l, v in zip(first.momentum, last.momentum, last.momentum_vacuum_cum))

    def residuals(self) -> List[float]:
        return energy_residuals(self.records)
