from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatchError, KernelError
from .models import Grid, KernelSpec, ScalarField, VectorField
from .operators import gradient_array

logger = logging.getLogger(__name__)

GAUSSIAN_CUTOFF = 4.0  # gaussian kernels are truncated at this many sigma
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Kernel:
    """Admissible capillarity kernel sampled on the torus, centered at cell 0.

    Samples are nonnegative, even under x -> -x and carry unit discrete mass.
    The real FFT of the samples is cached for the spectral convolution.
    """

    grid: Grid
    samples: np.ndarray
    spectrum: np.ndarray
    support_radius: float
    shape: str

    def mass(self) -> float:
        return float(np.sum(self.samples) * self.grid.cell_volume)

    def as_field(self) -> ScalarField:
        return ScalarField(self.grid, self.samples)


def _mirror(arr: np.ndarray) -> np.ndarray:
    """arr[-i mod n] along every axis."""
    axes = tuple(range(arr.ndim))
    return np.roll(np.flip(arr, axes), 1, axes)


def build_kernel(spec: KernelSpec, grid: Grid) -> Kernel:
    offsets = grid.offsets()
    r = np.sqrt(sum(o * o for o in offsets))
    half = grid.L / 2.0

    if spec.shape == "gaussian":
        if not spec.sigma > 0:
            raise KernelError(f"gaussian kernel needs sigma > 0, got {spec.sigma}")
        support = GAUSSIAN_CUTOFF * spec.sigma
        samples = np.where(r <= support, np.exp(-0.5 * (r / spec.sigma) ** 2), 0.0)
    elif spec.shape == "tent":
        if not spec.radius > 0:
            raise KernelError(f"tent kernel needs radius > 0, got {spec.radius}")
        support = spec.radius
        samples = np.maximum(0.0, 1.0 - r / spec.radius)
    elif spec.shape == "bump":
        if not spec.radius > 0:
            raise KernelError(f"bump kernel needs radius > 0, got {spec.radius}")
        support = spec.radius
        s = np.clip(r / spec.radius, 0.0, 1.0)
        inside = s < 1.0
        samples = np.zeros_like(r)
        samples[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    elif spec.shape == "table":
        samples = _validate_table(spec, grid)
        support = float(np.max(r[samples > 0])) if np.any(samples > 0) else 0.0
    else:
        raise KernelError(f"unknown kernel shape {spec.shape!r}")

    if support >= half:
        raise KernelError(
            f"kernel wraps torus: support radius {support:.6g} >= L/2 = {half:.6g}"
        )
    total = float(np.sum(samples)) * grid.cell_volume
    if not total > 0:
        raise KernelError("kernel has zero mass on this grid (support below one cell)")
    samples = samples / total
    samples.setflags(write=False)
    spectrum = sfft.rfftn(samples)
    spectrum.setflags(write=False)
    logger.debug("built %s kernel on %s, support %.4g", spec.shape, grid, support)
    return Kernel(grid=grid, samples=samples, spectrum=spectrum, support_radius=support, shape=spec.shape)


def _validate_table(spec: KernelSpec, grid: Grid) -> np.ndarray:
    if len(spec.table) != grid.cell_count:
        raise KernelError(f"kernel table has {len(spec.table)} samples, grid needs {grid.cell_count}")
    samples = np.asarray(spec.table, dtype=float).reshape(grid.shape)
    if np.any(samples < 0):
        raise KernelError("kernel table has negative entries (phi >= 0 required)")
    scale = float(np.max(np.abs(samples))) or 1.0
    asym = float(np.max(np.abs(samples - _mirror(samples))))
    if asym > SYMMETRY_TOL * scale:
        raise KernelError(f"kernel table is not even: asymmetry {asym:.3g}")
    return samples


def _check(k: Kernel, f: ScalarField) -> None:
    if f.grid != k.grid:
        raise GridMismatchError(f"kernel on {k.grid}, field on {f.grid}")


def convolve_array(k: Kernel, arr: np.ndarray) -> np.ndarray:
    out = sfft.irfftn(sfft.rfftn(arr) * k.spectrum, s=k.grid.shape)
    return out * k.grid.cell_volume


def convolve(k: Kernel, f: ScalarField) -> ScalarField:
    _check(k, f)
    return ScalarField(k.grid, convolve_array(k, f.values))


def capillarity_d(k: Kernel, rho: ScalarField) -> ScalarField:
    """D[rho] = phi * rho - rho."""
    _check(k, rho)
    return ScalarField(k.grid, convolve_array(k, rho.values) - rho.values)


def capillary_force_array(k: Kernel, rho: np.ndarray, kappa: float) -> np.ndarray:
    d = convolve_array(k, rho) - rho
    return kappa * rho * gradient_array(d, k.grid.h)


def capillary_force(k: Kernel, rho: ScalarField, kappa: float) -> VectorField:
    _check(k, rho)
    if kappa < 0:
        raise KernelError(f"capillarity coefficient must be >= 0, got {kappa}")
    return VectorField(k.grid, capillary_force_array(k, rho.values, kappa))


def interaction_density_array(k: Kernel, rho: np.ndarray, kappa: float) -> np.ndarray:
    return 0.25 * kappa * (rho * rho + convolve_array(k, rho * rho) - 2.0 * rho * convolve_array(k, rho))


def interaction_density(k: Kernel, rho: ScalarField, kappa: float) -> ScalarField:
    """Pointwise E_global[rho](x) in its one-convolution expansion."""
    _check(k, rho)
    return ScalarField(k.grid, interaction_density_array(k, rho.values, kappa))


def interaction_energy(k: Kernel, rho: ScalarField, kappa: float) -> float:
    _check(k, rho)
    if kappa < 0:
        raise KernelError(f"capillarity coefficient must be >= 0, got {kappa}")
    return float(np.sum(interaction_density_array(k, rho.values, kappa)) * k.grid.cell_volume)


# --- Brute-force oracles ----------------------------------------------------


def _pair_matrix(k: Kernel) -> np.ndarray:
    """phi(x_j - x_i) for every pair of flattened cells."""
    n = k.grid.n
    idx = np.indices(k.grid.shape).reshape(k.grid.dim, -1)
    diff = (idx[:, :, None] - idx[:, None, :]) % n
    return k.samples[tuple(diff)]


def direct_convolution(k: Kernel, f: ScalarField) -> ScalarField:
    _check(k, f)
    out = _pair_matrix(k) @ f.values.ravel() * k.grid.cell_volume
    return ScalarField(k.grid, out.reshape(k.grid.shape))


def direct_interaction_energy(k: Kernel, rho: ScalarField, kappa: float) -> float:
    _check(k, rho)
    flat = rho.values.ravel()
    jumps = (flat[None, :] - flat[:, None]) ** 2
    return float(0.25 * kappa * np.sum(_pair_matrix(k) * jumps) * k.grid.cell_volume**2)
