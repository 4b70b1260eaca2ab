from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .diagnostics import exchange_rate
from .kernel import build_kernel, convolve, direct_convolution, direct_interaction_energy, interaction_energy
from .models import Grid, KernelSpec, PressureSpec, ScalarField
from .operators import integrate
from .renormalization import L_k, T_k
from .thermo import build_pressure_law, free_energy_for, orlicz_norm, orlicz_psi, split_vdw

logger = logging.getLogger(__name__)


@dataclass
class OracleResult:
    suite: str
    case: str
    metric: float
    threshold: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.metric <= self.threshold)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(b))) or 1.0
    return float(np.max(np.abs(a - b))) / scale


def convolution_suite(seed: int = 0) -> List[OracleResult]:
    """Spectral convolution vs the direct pair sum on random fields."""
    rng = np.random.default_rng(seed)
    results = []
    cases = [(Grid(1, 64, 1.0), 20), (Grid(2, 32, 1.0), 5)]
    for grid, count in cases:
        worst = 0.0
        for spec in (KernelSpec("gaussian", sigma=0.05), KernelSpec("tent", radius=0.15)):
            kernel = build_kernel(spec, grid)
            for _ in range(count):
                f = ScalarField(grid, rng.normal(size=grid.shape))
                worst = max(worst, _rel(convolve(kernel, f).values, direct_convolution(kernel, f).values))
        results.append(OracleResult("convolution", f"{grid.dim}D n={grid.n} x{count}", worst, 1e-11))
    return results


def energy_suite(seed: int = 1) -> List[OracleResult]:
    """Expanded interaction energy vs the double sum."""
    rng = np.random.default_rng(seed)
    grid = Grid(1, 32, 1.0)
    kernel = build_kernel(KernelSpec("gaussian", sigma=0.05), grid)
    worst = 0.0
    for _ in range(10):
        rho = ScalarField(grid, rng.uniform(0.2, 2.0, size=grid.shape))
        fast = interaction_energy(kernel, rho, 1.0)
        slow = direct_interaction_energy(kernel, rho, 1.0)
        worst = max(worst, abs(fast - slow) / abs(slow))
    return [OracleResult("energy", "1D n=32 x10", worst, 1e-10)]


def _path(grid: Grid, t: float) -> np.ndarray:
    x = grid.coords()[0]
    return 1.0 + 0.2 * np.sin(2.0 * math.pi * x + t) + 0.1 * np.cos(4.0 * math.pi * x - 2.0 * t)


def _path_dt(grid: Grid, t: float) -> np.ndarray:
    x = grid.coords()[0]
    return 0.2 * np.cos(2.0 * math.pi * x + t) + 0.2 * np.sin(4.0 * math.pi * x - 2.0 * t)


def exchange_errors(dts=(1e-3, 5e-4), t0: float = 0.3, kappa: float = 1.0) -> List[float]:
    """|centered dE/dt - (-kappa int (phi*rho - rho) d_t rho)| along a trigonometric path."""
    grid = Grid(1, 64, 1.0)
    kernel = build_kernel(KernelSpec("gaussian", sigma=0.1), grid)
    rho = ScalarField(grid, _path(grid, t0))
    exact = exchange_rate(kernel, rho, ScalarField(grid, _path_dt(grid, t0)), kappa)
    errors = []
    for dt in dts:
        e_plus = interaction_energy(kernel, ScalarField(grid, _path(grid, t0 + dt)), kappa)
        e_minus = interaction_energy(kernel, ScalarField(grid, _path(grid, t0 - dt)), kappa)
        errors.append(abs((e_plus - e_minus) / (2.0 * dt) - exact))
    return errors


def exchange_suite() -> List[OracleResult]:
    coarse, fine = exchange_errors()
    ratio = coarse / fine if fine > 0 else math.inf
    # metric is inverted so that "smaller passes"
    return [OracleResult("exchange", f"dt ratio {ratio:.3f}", 1.0 / ratio, 1.0 / 3.5)]


def thermo_suite() -> List[OracleResult]:
    """P(s) = s Pi'(s) - Pi(s) at 100 densities, Pi' by centered differences."""
    s = np.linspace(0.1, 5.0, 100)
    laws = {f"isentropic gamma={g}": PressureSpec("isentropic", a=1.0, gamma=g) for g in (1.0, 1.4, 2.0, 3.0)}
    laws["van_der_waals RT*=0.1"] = PressureSpec("van_der_waals", R=1.0, T_star=0.1, a=1.0, b=1.0, theta=0.1)
    laws["van_der_waals RT*=0.2"] = PressureSpec("van_der_waals", R=1.0, T_star=0.2, a=1.0, b=1.0, theta=0.1)
    knots = np.linspace(0.0, 6.0, 25)
    laws["table rho^2"] = PressureSpec("table", table_rho=tuple(knots), table_p=tuple(knots**2))
    results = []
    for name, spec in laws.items():
        law = build_pressure_law(spec)
        pi = free_energy_for(law)
        step = 1e-4 * s
        dpi = (np.asarray(pi(s + step)) - np.asarray(pi(s - step))) / (2.0 * step)
        p = law.pressure(s)
        err = np.abs(s * dpi - np.asarray(pi(s)) - p) / np.maximum(1.0, np.abs(p))
        results.append(OracleResult("thermo", name, float(np.max(err)), 1e-6))
    return results


def split_suite() -> List[OracleResult]:
    results = []
    for rt in (0.1, 0.2):
        law = build_pressure_law(PressureSpec("van_der_waals", R=1.0, T_star=rt, a=1.0, b=1.0, theta=0.1))
        split = split_vdw(law)
        rho = np.linspace(0.0, 1.25 * split.rho_bar_split, 10_000)
        p1, p2 = np.asarray(split.p1(rho)), np.asarray(split.p2(rho))
        tag = f"RT*={rt}"
        results.append(OracleResult("split", f"{tag} P1 monotone", float(max(0.0, -np.min(np.diff(p1)))), 1e-9))
        results.append(OracleResult("split", f"{tag} P2 >= 0", float(max(0.0, -np.min(p2))), 0.0))
        beyond = rho >= split.rho_bar_split
        results.append(OracleResult("split", f"{tag} P2 = 0 beyond", float(np.max(np.abs(p2[beyond]))), 0.0))
        results.append(OracleResult("split", f"{tag} P1 - P2 = P", float(np.max(np.abs(p1 - p2 - law.pressure(rho)))), 1e-9))
    return results


def cutoff_suite() -> List[OracleResult]:
    results = []
    for k in (1.0, 2.5, 10.0):
        low = np.linspace(0.0, k, 257)
        high = np.linspace(3.0 * k, 10.0 * k, 257)
        exact_err = max(float(np.max(np.abs(T_k(low, k) - low))), float(np.max(np.abs(T_k(high, k) - 2.0 * k))))
        results.append(OracleResult("cutoffs", f"T_k exact k={k}", exact_err, 0.0))
        z = np.linspace(0.0, 5.0 * k, 20_001)
        second = np.diff(T_k(z, k), 2)
        results.append(OracleResult("cutoffs", f"T_k concave k={k}", float(max(0.0, np.max(second))), 1e-12))
        rho = np.linspace(1e-6, k, 1000)
        results.append(OracleResult("cutoffs", f"L_k entropy k={k}", float(np.max(np.abs(L_k(rho, k) - rho * np.log(rho)))), 1e-15))
    return results


def orlicz_suite(seed: int = 2) -> List[OracleResult]:
    rng = np.random.default_rng(seed)
    grid = Grid(1, 64, 1.0)
    worst = 0.0
    for _ in range(10):
        f = ScalarField(grid, rng.normal(scale=rng.uniform(0.1, 3.0), size=grid.shape))
        p, q, delta = 2.0, float(rng.uniform(2.0, 4.0)), float(rng.uniform(0.5, 1.5))
        norm = orlicz_norm(f, p, q, delta)
        mass = integrate(ScalarField(grid, orlicz_psi(f.values / norm, p, q, delta)))
        worst = max(worst, abs(mass - 1.0))
    return [OracleResult("orlicz", "normalization x10", worst, 1e-8)]


SUITES: Dict[str, Callable[[], List[OracleResult]]] = {
    "convolution": convolution_suite,
    "energy": energy_suite,
    "exchange": exchange_suite,
    "thermo": thermo_suite,
    "split": split_suite,
    "cutoffs": cutoff_suite,
    "orlicz": orlicz_suite,
}


def run_suites(name: str) -> List[OracleResult]:
    names = list(SUITES) if name == "all" else [name]
    results: List[OracleResult] = []
    for suite in names:
        if suite not in SUITES:
            raise KeyError(suite)
        started = time.perf_counter()
        batch = SUITES[suite]()
        elapsed = time.perf_counter() - started
        for item in batch:
            item.seconds = elapsed / len(batch)
        logger.info("oracle %s: %d cases in %.2fs", suite, len(batch), elapsed)
        results.extend(batch)
    return results


def format_table(results: List[OracleResult]) -> str:
    width = max([len(r.case) for r in results] + [4])
    lines = [f"{'suite':<12} {'case':<{width}} {'metric':>12} {'limit':>10}  result"]
    for r in results:
        lines.append(
            f"{r.suite:<12} {r.case:<{width}} {r.metric:>12.3e} {r.threshold:>10.1e}  {'PASS' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)
