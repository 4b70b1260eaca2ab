from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import FieldError, GridMismatchError


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice [0, L)^dim with n cells per axis."""

    dim: int
    n: int
    L: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise FieldError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or self.n & (self.n - 1):
            raise FieldError(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise FieldError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return self.L**self.dim

    def axis_coords(self) -> np.ndarray:
        return (np.arange(self.n) + 0.5) * self.h

    def coords(self) -> Tuple[np.ndarray, ...]:
        """Cell-center coordinates, one array of grid shape per axis."""
        axis = self.axis_coords()
        return tuple(np.meshgrid(*([axis] * self.dim), indexing="ij"))

    def offsets(self) -> Tuple[np.ndarray, ...]:
        """Minimum-image displacement of every cell from cell 0, one array per axis."""
        idx = np.arange(self.n)
        axis = np.minimum(idx, self.n - idx) * self.h
        return tuple(np.meshgrid(*([axis] * self.dim), indexing="ij"))


def _frozen_array(values, shape: Tuple[int, ...], what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != shape:
        raise FieldError(f"{what} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise FieldError(f"{what} has a non-finite value at {bad}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen_array(self.values, self.grid.shape, "scalar field"))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def _other(self, other) -> np.ndarray | float:
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise GridMismatchError(f"{other.grid} vs {self.grid}")
            return other.values
        return float(other)

    def __add__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values - self._other(other))

    def __mul__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    values: np.ndarray  # shape (dim, *grid.shape)

    def __post_init__(self) -> None:
        shape = (self.grid.dim, *self.grid.shape)
        object.__setattr__(self, "values", _frozen_array(self.values, shape, "vector field"))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim, *grid.shape)))

    def component(self, axis: int) -> ScalarField:
        return ScalarField(self.grid, self.values[axis])

    def __add__(self, other: "VectorField") -> "VectorField":
        if other.grid != self.grid:
            raise GridMismatchError(f"{other.grid} vs {self.grid}")
        return VectorField(self.grid, self.values + other.values)

    def __sub__(self, other: "VectorField") -> "VectorField":
        if other.grid != self.grid:
            raise GridMismatchError(f"{other.grid} vs {self.grid}")
        return VectorField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class State:
    t: float
    rho: ScalarField
    m: VectorField

    def __post_init__(self) -> None:
        if self.rho.grid != self.m.grid:
            raise GridMismatchError("density and momentum live on different grids")
        if np.any(self.rho.values < 0):
            bad = tuple(int(i) for i in np.argwhere(self.rho.values < 0)[0])
            raise FieldError(f"negative density at cell {bad}")

    @property
    def grid(self) -> Grid:
        return self.rho.grid


# --- Run configuration ------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    shape: str = "gaussian"  # gaussian | tent | bump | table
    sigma: float = 0.05
    radius: float = 0.1
    table: Tuple[float, ...] = ()


@dataclass(frozen=True)
class PressureSpec:
    law: str = "isentropic"  # isentropic | van_der_waals | table
    a: float = 1.0
    gamma: float = 2.0
    R: float = 1.0
    T_star: float = 0.1
    b: float = 1.0
    theta: float = 0.1
    table_rho: Tuple[float, ...] = ()
    table_p: Tuple[float, ...] = ()


@dataclass(frozen=True)
class PhysicsSpec:
    mu: float = 0.01
    lam: float = 0.0
    kappa: float = 0.0
    eps_vac_factor: float = 1e-10
    artificial_viscosity: float = 1.0


@dataclass(frozen=True)
class DiagnosticsSpec:
    eps_integrability: Optional[float] = None
    n_formal: int = 3
    gamma: Optional[float] = None  # monitor exponent; defaults to the isentropic law's gamma
    renorm_b: str = "power"  # power | cutoff | log_cutoff | identity | free_energy
    renorm_eps: float = 0.5
    cutoff_k: float = 1.0
    rho_bar: Optional[float] = None
    equilibrium: bool = False
    gamma1_extension: bool = False
    effective_flux: bool = False


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    ledger_every: int = 1
    snapshot_every: int = 0
    snapshot_format: str = "bin"  # bin | csv
    ledger_name: str = "ledger.csv"


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "equilibrium"
    generator: str = "equilibrium"  # equilibrium | perturbation | two_phase | vacuum_pocket | manufactured
    rho_bar: float = 1.0
    amplitude: float = 0.0
    modes: Tuple[int, ...] = (1,)
    seed: int = 0
    velocity_amplitude: float = 0.0
    rho_liquid: Optional[float] = None
    rho_vapor: Optional[float] = None
    width: float = 0.02
    geometry: str = "slab"  # slab | disk
    background: float = 1.0
    pocket_radius: float = 0.1
    manufactured: str = "advected_sine"  # advected_sine | acoustic_pulse


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    physics: PhysicsSpec
    pressure: PressureSpec
    kernel: KernelSpec
    scenario: ScenarioSpec
    t_end: float
    c_cfl: float = 0.5
    dt: Optional[float] = None
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)


# --- Diagnostics records ----------------------------------------------------


@dataclass(frozen=True)
class RenormSpec:
    kind: str = "power"  # power | cutoff | log_cutoff | identity | free_energy
    eps: float = 0.5
    k: float = 1.0


@dataclass
class LedgerRecord:
    t: float
    mass: float
    momentum: Tuple[float, ...]
    kinetic: float
    free: float
    nonlocal_: float
    dissipation_cum: float = 0.0
    vacuum_cum: float = 0.0
    momentum_vacuum_cum: Tuple[float, ...] = ()
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return self.kinetic + self.free + self.nonlocal_

    @property
    def residual(self) -> float:
        """E(t) + cumulative dissipation; the energy inequality says this never grows."""
        return self.energy + self.dissipation_cum
