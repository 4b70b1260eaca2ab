from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DiagnosticError, GridMismatchError
from .models import RenormSpec, ScalarField, State
from .operators import divergence_array, lp_norm
from .solver import velocity_array
from .thermo import PressureLaw, free_energy_for

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# --- Cut-off functions ---------------------------------------------------------
# T is z on [0, 1], 2 on [3, inf) and the quartic 1 + 2x - 2x^3 + x^4 (x = (z-1)/2)
# in between: C^2, concave, odd extension to z < 0.

T_KNOTS = (1.0, 3.0)
T_COEFFS = (1.0, 2.0, 0.0, -2.0, 1.0)  # in powers of x = (z - 1) / 2


def _t_positive(z: np.ndarray) -> np.ndarray:
    x = np.clip((z - T_KNOTS[0]) / 2.0, 0.0, 1.0)
    middle = np.polynomial.polynomial.polyval(x, T_COEFFS)
    return np.where(z <= T_KNOTS[0], z, np.where(z >= T_KNOTS[1], 2.0, middle))


def T(z: ArrayLike) -> ArrayLike:
    arr = np.asarray(z, dtype=float)
    out = np.sign(arr) * _t_positive(np.abs(arr))
    return float(out) if np.ndim(z) == 0 else out


def _check_level(k: float) -> None:
    if not k >= 1:
        raise DiagnosticError(f"cut-off level k must be >= 1, got {k}")


def T_k(z: ArrayLike, k: float) -> ArrayLike:
    """k T(z/k); exactly z for |z| <= k and exactly +-2k for |z| >= 3k."""
    _check_level(k)
    arr = np.asarray(z, dtype=float)
    a = np.abs(arr)
    scaled = k * _t_positive(a / k)
    mag = np.where(a <= k, a, np.where(a >= 3.0 * k, 2.0 * k, scaled))
    out = np.where(arr < 0, -mag, mag)
    return float(out) if np.ndim(z) == 0 else out


def L_k(rho: ArrayLike, k: float) -> ArrayLike:
    """rho log rho up to k, then its tangent line at k."""
    _check_level(k)
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise DiagnosticError("L_k needs rho >= 0")
    below = np.minimum(arr, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        entropy = np.where(below > 0, below * np.log(np.where(below > 0, below, 1.0)), 0.0)
    tangent = k * math.log(k) + (math.log(k) + 1.0) * (arr - k)
    out = np.where(arr <= k, entropy, tangent)
    return float(out) if np.ndim(rho) == 0 else out


def _dL_k(rho: np.ndarray, k: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(rho <= k, np.log(np.minimum(np.maximum(rho, 1e-300), k)) + 1.0, math.log(k) + 1.0)


def _dT_positive(z: np.ndarray) -> np.ndarray:
    x = np.clip((z - T_KNOTS[0]) / 2.0, 0.0, 1.0)
    middle = 1.0 - 3.0 * x**2 + 2.0 * x**3
    return np.where(z <= T_KNOTS[0], 1.0, np.where(z >= T_KNOTS[1], 0.0, middle))


# --- Renormalizing functions ---------------------------------------------------


@dataclass(frozen=True)
class RenormFunction:
    """b with its defect rho b'(rho) - b(rho) and growth exponents.

    lambda0 bounds |b'(t)| <= c t^-lambda0 on (0, 1]; lambda1 bounds
    |b'(t)| <= c t^lambda1 on [1, inf). None for lambda1 means b' vanishes
    for large t (any lambda1 works); None for both means law dependent.
    """

    kind: str
    b: Callable[[np.ndarray], np.ndarray]
    defect: Callable[[np.ndarray], np.ndarray]
    lambda0: Optional[float]
    lambda1: Optional[float]

    def admissible(self, s: float) -> Optional[bool]:
        """lambda0 < 1 and -1 < lambda1 < s/2 - 1; None when exponents are law dependent."""
        if self.lambda0 is None and self.lambda1 is None:
            return None
        if self.lambda0 is not None and not self.lambda0 < 1:
            return False
        if self.lambda1 is None:
            return True
        return -1.0 < self.lambda1 < s / 2.0 - 1.0


def build_renorm(spec: RenormSpec, law: Optional[PressureLaw] = None) -> RenormFunction:
    if spec.kind == "power":
        eps = spec.eps
        if not 0 < eps < 1:
            raise DiagnosticError(f"power renormalization needs eps in (0, 1), got {eps}")
        return RenormFunction(
            "power",
            b=lambda r: np.maximum(r, 0.0) ** eps,
            defect=lambda r: (eps - 1.0) * np.maximum(r, 0.0) ** eps,
            lambda0=1.0 - eps,
            lambda1=eps - 1.0,
        )
    if spec.kind == "cutoff":
        k = spec.k
        _check_level(k)
        return RenormFunction(
            "cutoff",
            b=lambda r: T_k(r, k),
            defect=lambda r: r * _dT_positive(np.abs(r) / k) - T_k(r, k),
            lambda0=0.0,
            lambda1=None,
        )
    if spec.kind == "log_cutoff":
        k = spec.k
        _check_level(k)
        return RenormFunction(
            "log_cutoff",
            b=lambda r: L_k(np.maximum(r, 0.0), k),
            defect=lambda r: np.maximum(r, 0.0) * _dL_k(np.maximum(r, 0.0), k) - L_k(np.maximum(r, 0.0), k),
            lambda0=0.5,  # |log t| grows slower than any negative power
            lambda1=0.0,
        )
    if spec.kind == "identity":
        return RenormFunction(
            "identity",
            b=lambda r: r,
            defect=lambda r: r * 1.0 - r,
            lambda0=0.0,
            lambda1=0.0,
        )
    if spec.kind == "free_energy":
        if law is None:
            raise DiagnosticError("free_energy renormalization needs a pressure law")
        pi = free_energy_for(law)
        return RenormFunction(
            "free_energy",
            b=lambda r: np.asarray(pi(np.maximum(r, 0.0))),
            defect=lambda r: law.pressure(np.maximum(r, 0.0)),
            lambda0=None,
            lambda1=None,
        )
    raise DiagnosticError(f"unknown renormalization {spec.kind!r}")


# --- Transport residuals -------------------------------------------------------


def _uniform_dt(snaps: Sequence[State]) -> float:
    if len(snaps) != 3:
        raise DiagnosticError(f"renormalized residual needs three consecutive snapshots, got {len(snaps)}")
    prev, mid, nxt = snaps
    if not (prev.grid == mid.grid == nxt.grid):
        raise GridMismatchError("snapshots live on different grids")
    dt0 = mid.t - prev.t
    dt1 = nxt.t - mid.t
    if not dt0 > 0 or abs(dt1 - dt0) > 1e-9 * dt0:
        raise DiagnosticError(f"snapshots are not uniformly spaced in time: dt {dt0:.6g} vs {dt1:.6g}")
    return 0.5 * (dt0 + dt1)


def _transport_residual(snaps: Sequence[State], fn: RenormFunction, eps_vac: float) -> ScalarField:
    dt = _uniform_dt(snaps)
    prev, mid, nxt = snaps
    grid = mid.grid
    h = grid.h
    rho = mid.rho.values
    u = velocity_array(rho, mid.m.values, eps_vac)
    b_mid = fn.b(rho)
    time_part = (fn.b(nxt.rho.values) - fn.b(prev.rho.values)) / (2.0 * dt)
    flux_part = divergence_array([b_mid * u[i] for i in range(grid.dim)], h)
    defect_part = fn.defect(rho) * divergence_array(u, h)
    return ScalarField(grid, time_part + flux_part + defect_part)


def renorm_residual_field(snaps: Sequence[State], spec: RenormSpec, law: Optional[PressureLaw] = None,
                          eps_vac: float = 1e-12) -> ScalarField:
    return _transport_residual(snaps, build_renorm(spec, law), eps_vac)


def renorm_residual(snaps: Sequence[State], spec: RenormSpec, law: Optional[PressureLaw] = None,
                    eps_vac: float = 1e-12) -> float:
    """L^2 norm of d_t b(rho) + div(b(rho) u) + (rho b'(rho) - b(rho)) div u at the middle snapshot."""
    return lp_norm(renorm_residual_field(snaps, spec, law, eps_vac), 2.0)


def mass_residual(snaps: Sequence[State], eps_vac: float = 1e-12) -> float:
    """L^2 norm of d_t rho + div(rho u) on the same stencils."""
    return renorm_residual(snaps, RenormSpec(kind="identity"), eps_vac=eps_vac)
