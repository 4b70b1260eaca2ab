from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import integrate, ndimage, optimize
from scipy.interpolate import PchipInterpolator

from .errors import FieldError, FreeEnergyError, ThermoError
from .models import PressureSpec, ScalarField

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def _as_density(rho: ArrayLike) -> np.ndarray:
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0):
        raise ThermoError(f"density must be >= 0, got min {float(np.min(arr)):.6g}")
    return arr


def _out(arr: np.ndarray, like: ArrayLike) -> ArrayLike:
    return float(arr) if np.ndim(like) == 0 else arr


# --- Pressure laws ----------------------------------------------------------


@dataclass(frozen=True)
class IsentropicLaw:
    a: float
    gamma: float
    family: str = field(default="isentropic", init=False)

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ThermoError(f"isentropic law needs a > 0, got {self.a}")
        if not self.gamma >= 1:
            raise ThermoError(f"isentropic law needs gamma >= 1, got {self.gamma}")

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        return self.a * rho**self.gamma

    def dpressure(self, rho: np.ndarray) -> np.ndarray:
        if self.gamma == 1:
            return np.full_like(rho, self.a)
        return self.a * self.gamma * rho ** (self.gamma - 1)


@dataclass(frozen=True)
class VanDerWaalsLaw:
    """RT*rho/(b-rho) - a rho^2 up to b - theta, then a C^1 increasing extension.

    The extension is quadratic with curvature chosen so the slope reaches +1
    over a width theta, then linear. When the slope at b - theta is already
    >= 1 the extension is linear with that slope.
    """

    R: float
    T_star: float
    a: float
    b: float
    theta: float
    family: str = field(default="van_der_waals", init=False)
    rho_c: float = field(init=False)
    p_c: float = field(init=False)
    dp_c: float = field(init=False)
    curvature: float = field(init=False)
    dpressure_lower_bound: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("R", "T_star", "a", "b", "theta"):
            if not getattr(self, name) > 0:
                raise ThermoError(f"Van der Waals law needs {name} > 0, got {getattr(self, name)}")
        if not self.theta < self.b:
            raise ThermoError(f"Van der Waals law needs theta < b, got theta={self.theta}, b={self.b}")
        rho_c = self.b - self.theta
        rt = self.R * self.T_star
        p_c = rt * rho_c / (self.b - rho_c) - self.a * rho_c**2
        dp_c = rt * self.b / (self.b - rho_c) ** 2 - 2.0 * self.a * rho_c
        curvature = (1.0 - dp_c) / (2.0 * self.theta) if dp_c < 1.0 else 0.0
        object.__setattr__(self, "rho_c", rho_c)
        object.__setattr__(self, "p_c", p_c)
        object.__setattr__(self, "dp_c", dp_c)
        object.__setattr__(self, "curvature", curvature)
        candidates = [self._dp_branch(0.0), dp_c]
        rho_star = self.dp_argmin()
        if 0.0 < rho_star < rho_c:
            candidates.append(self._dp_branch(rho_star))
        object.__setattr__(self, "dpressure_lower_bound", float(min(candidates)))

    @property
    def rt(self) -> float:
        return self.R * self.T_star

    def dp_argmin(self) -> float:
        """Where P'' vanishes on the Van der Waals branch (P' is convex there)."""
        return self.b - (self.rt * self.b / self.a) ** (1.0 / 3.0)

    def _p_branch(self, rho: ArrayLike) -> ArrayLike:
        return self.rt * rho / (self.b - rho) - self.a * rho * rho

    def _dp_branch(self, rho: ArrayLike) -> ArrayLike:
        return self.rt * self.b / (self.b - rho) ** 2 - 2.0 * self.a * rho

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        below = np.minimum(rho, self.rho_c)
        s = np.maximum(rho - self.rho_c, 0.0)
        if self.curvature == 0.0:
            ext = self.p_c + self.dp_c * s
        else:
            w = self.theta
            sq = np.minimum(s, w)
            ext = self.p_c + self.dp_c * sq + self.curvature * sq * sq + np.maximum(s - w, 0.0)
        return np.where(rho <= self.rho_c, self._p_branch(below), ext)

    def dpressure(self, rho: np.ndarray) -> np.ndarray:
        below = np.minimum(rho, self.rho_c)
        s = np.maximum(rho - self.rho_c, 0.0)
        if self.curvature == 0.0:
            ext = np.full_like(s, self.dp_c)
        else:
            ext = np.where(s < self.theta, self.dp_c + 2.0 * self.curvature * s, 1.0)
        return np.where(rho <= self.rho_c, self._dp_branch(below), ext)

    def spinodal(self) -> Optional[Tuple[float, float]]:
        """Density interval on which P' < 0, or None for a monotone law."""
        rho_star = min(max(self.dp_argmin(), 0.0), self.rho_c)
        if self._dp_branch(rho_star) >= 0:
            return None
        if self.dp_c < 0:
            raise ThermoError("P' < 0 persists into the extended region: broken extension (increase theta)")
        lo = optimize.brentq(self._dp_branch, 0.0, rho_star, xtol=1e-15)
        hi = optimize.brentq(self._dp_branch, rho_star, self.rho_c, xtol=1e-15)
        return float(lo), float(hi)

    def antiderivative_pieces(self) -> List[Tuple[float, float, float, float, float]]:
        """Extension written as alpha + beta s + chi s^2 on [lo, hi), for closed-form Pi."""
        rc, pc, dc, c = self.rho_c, self.p_c, self.dp_c, self.curvature
        if c == 0.0:
            return [(rc, math.inf, pc - dc * rc, dc, 0.0)]
        w = self.theta
        quad = (rc, rc + w, pc - dc * rc + c * rc * rc, dc - 2.0 * c * rc, c)
        s_w = rc + w
        p_w = pc + dc * w + c * w * w
        return [quad, (s_w, math.inf, p_w - s_w, 1.0, 0.0)]


@dataclass(frozen=True)
class MonotoneTableLaw:
    rho: Tuple[float, ...]
    p: Tuple[float, ...]
    family: str = field(default="table", init=False)

    def __post_init__(self) -> None:
        if len(self.rho) != len(self.p) or len(self.rho) < 2:
            raise ThermoError("pressure table needs matching rho/p columns with at least two rows")
        r = np.asarray(self.rho, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if r[0] != 0.0 or p[0] != 0.0:
            raise ThermoError("pressure table must start at (0, 0): P non-decreasing on [0,+inf) vanishing at 0")
        if np.any(np.diff(r) <= 0):
            raise ThermoError("pressure table densities must be strictly increasing")
        if np.any(np.diff(p) < 0):
            raise ThermoError("pressure table values must be non-decreasing")

    @property
    def _interp(self) -> PchipInterpolator:
        return _table_interpolator(self.rho, self.p)

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        last_r, last_p = self.rho[-1], self.p[-1]
        slope = float(self._interp.derivative()(last_r))
        inside = self._interp(np.minimum(rho, last_r))
        return np.where(rho <= last_r, inside, last_p + slope * (rho - last_r))

    def dpressure(self, rho: np.ndarray) -> np.ndarray:
        last_r = self.rho[-1]
        deriv = self._interp.derivative()
        return np.where(rho <= last_r, deriv(np.minimum(rho, last_r)), float(deriv(last_r)))


@lru_cache(maxsize=32)
def _table_interpolator(rho: Tuple[float, ...], p: Tuple[float, ...]) -> PchipInterpolator:
    return PchipInterpolator(np.asarray(rho), np.asarray(p), extrapolate=False)


PressureLaw = Union[IsentropicLaw, VanDerWaalsLaw, MonotoneTableLaw]


def build_pressure_law(spec: PressureSpec) -> PressureLaw:
    if spec.law == "isentropic":
        return IsentropicLaw(a=spec.a, gamma=spec.gamma)
    if spec.law == "van_der_waals":
        return VanDerWaalsLaw(R=spec.R, T_star=spec.T_star, a=spec.a, b=spec.b, theta=spec.theta)
    if spec.law == "table":
        return MonotoneTableLaw(rho=tuple(spec.table_rho), p=tuple(spec.table_p))
    raise ThermoError(f"unknown pressure law {spec.law!r}")


def pressure(law: PressureLaw, rho: ArrayLike) -> ArrayLike:
    arr = _as_density(rho)
    return _out(law.pressure(arr), rho)


def dpressure(law: PressureLaw, rho: ArrayLike) -> ArrayLike:
    arr = _as_density(rho)
    return _out(law.dpressure(arr), rho)


# --- Free energy --------------------------------------------------------------


@dataclass(frozen=True)
class FreeEnergy:
    """Pi with P(s) = s Pi'(s) - Pi(s) and Pi(0) = 0.

    branch "power_law": 0-based integral in closed form (isentropic, gamma > 1).
    branch "log_reference": Pi(rho) = rho * int_1^rho P(s)/s^2 ds, used when the
    0-based integral diverges; behaves like rho log rho near vacuum.
    branch "quadrature": 0-based integral by adaptive quadrature.
    """

    law: PressureLaw
    branch: str

    def __call__(self, rho: ArrayLike) -> ArrayLike:
        arr = _as_density(rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.branch == "power_law" and isinstance(self.law, IsentropicLaw):
                out = self.law.a * arr**self.law.gamma / (self.law.gamma - 1.0)
            elif self.branch == "log_reference" and isinstance(self.law, IsentropicLaw):
                out = np.where(arr > 0, self.law.a * arr * np.log(np.where(arr > 0, arr, 1.0)), 0.0)
            elif self.branch == "log_reference" and isinstance(self.law, VanDerWaalsLaw):
                out = _vdw_reference_energy(self.law, arr)
            else:
                origin = 0.0 if self.branch == "quadrature" else 1.0
                out = np.vectorize(lambda s: _quadrature_energy(self.law, s, origin), otypes=[float])(arr)
        return _out(out, rho)


def select_branch(law: PressureLaw) -> str:
    """Closed form when available; reference point 1 when int_0 P(z)/z^2 diverges."""
    if isinstance(law, IsentropicLaw):
        return "power_law" if law.gamma > 1 else "log_reference"
    if float(law.dpressure(np.asarray(0.0))) > 0:
        return "log_reference"
    return "quadrature"


def free_energy_for(law: PressureLaw, branch: Optional[str] = None) -> FreeEnergy:
    return FreeEnergy(law=law, branch=branch or select_branch(law))


def free_energy(law: PressureLaw, rho: ArrayLike) -> ArrayLike:
    return free_energy_for(law)(rho)


def _breakpoints(law: PressureLaw) -> Tuple[float, ...]:
    """Densities where P is only C^1; quadrature restarts there."""
    return law.rho if isinstance(law, MonotoneTableLaw) else ()


def _quadrature_piece(law: PressureLaw, lo: float, hi: float) -> float:
    def integrand(z: float) -> float:
        return float(law.pressure(np.asarray(z))) / (z * z)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-10, limit=200)
        except ZeroDivisionError as exc:
            raise FreeEnergyError(f"free-energy quadrature failed on [{lo}, {hi}]: {exc}") from exc
    if caught and lo == 0.0:
        raise FreeEnergyError(
            f"free-energy quadrature failed on [{lo}, {hi}]: {caught[0].message}; "
            "the 0-based integral of P(z)/z^2 is probably divergent"
        )
    for warning in caught:
        logger.debug("free-energy quadrature on [%.6g, %.6g]: %s", lo, hi, warning.message)
    return value


def _quadrature_energy(law: PressureLaw, s: float, origin: float) -> float:
    if s == 0.0:
        return 0.0
    lo, hi = min(origin, s), max(origin, s)
    edges = [lo, *(k for k in _breakpoints(law) if lo < k < hi), hi]
    value = sum(_quadrature_piece(law, a, b) for a, b in zip(edges[:-1], edges[1:]))
    if s < origin:
        value = -value
    if not math.isfinite(value):
        raise FreeEnergyError(f"free-energy quadrature returned {value} at rho={s}")
    return s * value


def _vdw_antiderivative(law: VanDerWaalsLaw, s: np.ndarray) -> np.ndarray:
    """G with G' = P(s)/s^2, continuous across the extension knots."""
    rt, b, a = law.rt, law.b, law.a

    def branch(x):
        return (rt / b) * np.log(x / (b - x)) - a * x

    def poly(x, alpha, beta, chi):
        return -alpha / x + beta * np.log(x) + chi * x

    below = np.minimum(s, law.rho_c)
    out = branch(below)
    g_lo = float(branch(law.rho_c))
    for lo, hi, alpha, beta, chi in law.antiderivative_pieces():
        x = np.clip(s, lo, hi if math.isfinite(hi) else np.inf)
        piece = g_lo + poly(x, alpha, beta, chi) - poly(lo, alpha, beta, chi)
        out = np.where(s > lo, piece, out)
        if math.isfinite(hi):
            g_lo = g_lo + poly(hi, alpha, beta, chi) - poly(lo, alpha, beta, chi)
    return out


def _vdw_reference_energy(law: VanDerWaalsLaw, rho: np.ndarray) -> np.ndarray:
    safe = np.where(rho > 0, rho, 1.0)
    g_ref = _vdw_antiderivative(law, np.asarray(1.0))
    return np.where(rho > 0, rho * (_vdw_antiderivative(law, safe) - g_ref), 0.0)


# --- Van der Waals splitting --------------------------------------------------


@dataclass(frozen=True, eq=False)
class SplitPressure:
    """P = P1 - P2 with P1 non-decreasing, P2 >= 0 in C^2 and P2 = 0 beyond rho_bar_split."""

    law: VanDerWaalsLaw
    rho_table: np.ndarray
    p2_table: np.ndarray
    rho_bar_split: float
    spinodal: Optional[Tuple[float, float]]

    @property
    def _interp(self) -> Optional[PchipInterpolator]:
        if self.rho_bar_split == 0.0:
            return None
        return PchipInterpolator(self.rho_table, self.p2_table, extrapolate=False)

    def p2(self, rho: ArrayLike) -> ArrayLike:
        arr = _as_density(rho)
        interp = self._interp
        if interp is None:
            return _out(np.zeros_like(arr), rho)
        inside = arr < self.rho_bar_split
        vals = np.where(inside, interp(np.minimum(arr, self.rho_bar_split)), 0.0)
        return _out(np.maximum(vals, 0.0), rho)

    def p1(self, rho: ArrayLike) -> ArrayLike:
        arr = _as_density(rho)
        return _out(self.law.pressure(arr) + np.asarray(self.p2(arr)), rho)

    def write_csv(self, path: Path, samples: int = 2001, rho_max: Optional[float] = None) -> Path:
        top = rho_max or max(1.25 * self.rho_bar_split, self.law.rho_c + self.law.theta)
        rho = np.linspace(0.0, top, samples)
        p = self.law.pressure(rho)
        p1, p2 = self.p1(rho), self.p2(rho)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rho", "P", "P1", "P2"])
            for row in zip(rho, p, p1, p2):
                writer.writerow([repr(float(v)) for v in row])
        return path


SPLIT_MARGIN = 1e-3
_BUMP_PEAK = 35.0 / 16.0  # max of the unit-mass (1-(2x-1)^2)^3 bump on [0, 1]


def _descent_bump(x: np.ndarray) -> np.ndarray:
    inside = (x > 0) & (x < 1)
    y = 2.0 * np.where(inside, x, 0.0) - 1.0
    return np.where(inside, _BUMP_PEAK * (1.0 - y * y) ** 3, 0.0)


def split_vdw(law: VanDerWaalsLaw, points_per_width: int = 400) -> SplitPressure:
    if not isinstance(law, VanDerWaalsLaw):
        raise ThermoError("split_vdw needs a Van der Waals law")
    if law.dp_c < 0:
        raise ThermoError("P' < 0 persists into the extended region: broken extension (increase theta)")
    window = law.spinodal()
    if window is None:
        logger.debug("P' >= 0 everywhere; trivial split")
        return SplitPressure(law, np.zeros(1), np.zeros(1), 0.0, None)

    lo, hi = window
    w = law.theta / 4.0
    delta = w / points_per_width
    rho_a = hi + 2.0 * w

    # size the descent bump so A * peak / W stays below half of P' on its support
    grid_pts = np.linspace(0.0, rho_a, int(math.ceil(rho_a / delta)) + 1)
    g_grid = _mollified_negative_part(law, grid_pts, w, delta)
    area = float(integrate.trapezoid(g_grid, grid_pts))
    width = 1.0
    for _ in range(60):
        span = np.linspace(rho_a, rho_a + width, 4001)
        p_lo = float(np.min(law.dpressure(span)))
        if not p_lo > 0:
            raise ThermoError("no room for the P2 descent: P' does not stay positive past the spinodal")
        need = 2.0 * _BUMP_PEAK * area / p_lo
        if need <= width:
            width = need
            break
        width = need
    rho_bar = rho_a + width

    count = int(math.ceil(rho_bar / delta)) + 1
    rho = np.linspace(0.0, rho_bar, count)
    g = _mollified_negative_part(law, rho, w, delta)
    bump = _descent_bump((rho - rho_a) / width) / width
    bump_area = float(integrate.trapezoid(bump, rho))
    rise = float(integrate.trapezoid(g, rho))
    dp2 = g - rise * bump / bump_area
    p2 = integrate.cumulative_trapezoid(dp2, rho, initial=0.0)
    p2[rho >= rho_a + width] = 0.0
    p2 = np.maximum(p2, 0.0)
    logger.info(
        "split Van der Waals pressure: spinodal (%.6g, %.6g), P2 max %.4g, rho_bar_split %.6g",
        lo, hi, float(np.max(p2)), rho_bar,
    )
    return SplitPressure(law, rho, p2, float(rho_bar), window)


def _mollified_negative_part(law: VanDerWaalsLaw, rho: np.ndarray, w: float, delta: float) -> np.ndarray:
    """C^2 majorant of max(0, -P'): dilate over w, then mollify with a (1-x^2)^3 kernel of width w."""
    neg = np.maximum(0.0, -law.dpressure(rho))
    m = max(1, int(round(w / delta)))
    dilated = ndimage.maximum_filter1d(neg, size=2 * m + 1, mode="constant", cval=0.0)
    x = np.arange(-m, m + 1) / m
    eta = (1.0 - x * x) ** 3
    eta /= eta.sum()
    smooth = ndimage.convolve1d(dilated, eta, mode="constant", cval=0.0)
    return (1.0 + SPLIT_MARGIN) * smooth


# --- Equilibrium functionals --------------------------------------------------


def j_gamma(rho: ArrayLike, rho_bar: float, gamma: float) -> ArrayLike:
    """rho^gamma + (gamma-1) rho_bar^gamma - gamma rho_bar^(gamma-1) rho."""
    if not rho_bar > 0 or not gamma >= 1:
        raise ThermoError(f"j_gamma needs rho_bar > 0 and gamma >= 1, got {rho_bar}, {gamma}")
    arr = _as_density(rho)
    out = arr**gamma + (gamma - 1.0) * rho_bar**gamma - gamma * rho_bar ** (gamma - 1.0) * arr
    return _out(out, rho)


def orlicz_psi(x: np.ndarray, p: float, q: float, delta: float) -> np.ndarray:
    ax = np.abs(x)
    with np.errstate(over="ignore"):
        return np.where(ax <= delta, ax**p, ax**q * delta ** (p - q))


def orlicz_norm(f: ScalarField, p: float, q: float, delta: float) -> float:
    """Luxemburg norm inf{t > 0 : int Psi(f/t) <= 1} of the space L^q_p."""
    if not p > 1 or not q >= p or not delta > 0:
        raise ThermoError(f"Orlicz norm needs p > 1, q >= p, delta > 0; got p={p}, q={q}, delta={delta}")
    values = f.values
    if not np.all(np.isfinite(values)):
        raise FieldError("Orlicz norm of a non-finite field")
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return 0.0
    vol = f.grid.cell_volume

    def excess(t: float) -> float:
        return float(np.sum(orlicz_psi(values / t, p, q, delta)) * vol) - 1.0

    t_hi = peak
    while excess(t_hi) > 0:
        t_hi *= 2.0
    t_lo = t_hi
    while excess(t_lo) < 0:
        t_lo /= 2.0
    if t_lo == t_hi:
        return t_hi
    return float(optimize.bisect(excess, t_lo, t_hi, xtol=1e-14 * t_lo, rtol=1e-10, maxiter=400))


def orlicz_parts(f: ScalarField, p: float, q: float, delta: float) -> Tuple[float, float]:
    """(||f 1_{|f|<=delta}||_p, ||f 1_{|f|>delta}||_q): the two-part membership test for L^q_p."""
    ax = np.abs(f.values)
    vol = f.grid.cell_volume
    small = np.where(ax <= delta, ax, 0.0)
    large = np.where(ax > delta, ax, 0.0)
    return float((np.sum(small**p) * vol) ** (1.0 / p)), float((np.sum(large**q) * vol) ** (1.0 / q))
