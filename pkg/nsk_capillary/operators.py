from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import FieldError, GridMismatchError
from .models import Grid, ScalarField, VectorField


# --- Array stencils ---------------------------------------------------------
# These work on raw arrays of grid shape; the solver calls them directly.


def centered_diff(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    """(f[j+1] - f[j-1]) / 2h with periodic wrap."""
    return (np.roll(arr, -1, axis) - np.roll(arr, 1, axis)) / (2.0 * h)


def forward_diff(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis) - arr) / h


def compact_laplacian(arr: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(arr)
    for axis in range(arr.ndim):
        out += np.roll(arr, -1, axis) - 2.0 * arr + np.roll(arr, 1, axis)
    return out / (h * h)


def wide_laplacian(arr: np.ndarray, h: float) -> np.ndarray:
    """Centered difference applied twice per axis: the composed divergence-of-gradient stencil."""
    out = np.zeros_like(arr)
    for axis in range(arr.ndim):
        out += centered_diff(centered_diff(arr, axis, h), axis, h)
    return out


def divergence_array(components: Sequence[np.ndarray], h: float) -> np.ndarray:
    out = np.zeros_like(components[0])
    for axis, comp in enumerate(components):
        out += centered_diff(comp, axis, h)
    return out


def gradient_array(arr: np.ndarray, h: float) -> np.ndarray:
    return np.stack([centered_diff(arr, axis, h) for axis in range(arr.ndim)])


# --- Field operators --------------------------------------------------------


def _same_grid(*grids: Grid) -> Grid:
    first = grids[0]
    for other in grids[1:]:
        if other != first:
            raise GridMismatchError(f"{other} vs {first}")
    return first


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, gradient_array(f.values, f.grid.h))


def divergence(v: VectorField) -> ScalarField:
    return ScalarField(v.grid, divergence_array(v.values, v.grid.h))


def laplacian_scalar(f: ScalarField, stencil: str = "compact") -> ScalarField:
    return ScalarField(f.grid, _laplacian(f.values, f.grid.h, stencil))


def laplacian_vector(v: VectorField, stencil: str = "compact") -> VectorField:
    values = np.stack([_laplacian(comp, v.grid.h, stencil) for comp in v.values])
    return VectorField(v.grid, values)


def grad_div(v: VectorField) -> VectorField:
    return gradient(divergence(v))


def _laplacian(arr: np.ndarray, h: float, stencil: str) -> np.ndarray:
    if stencil == "compact":
        return compact_laplacian(arr, h)
    if stencil == "wide":
        return wide_laplacian(arr, h)
    raise ValueError(f"unknown stencil {stencil!r} (expected 'compact' or 'wide')")


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.values) * f.grid.cell_volume)


def lp_norm(f: ScalarField, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_volume) ** (1.0 / p))


def inner(f: ScalarField, g: ScalarField) -> float:
    grid = _same_grid(f.grid, g.grid)
    return float(np.sum(f.values * g.values) * grid.cell_volume)


def shift(f: ScalarField | VectorField, cells: Sequence[int]) -> ScalarField | VectorField:
    """Periodic translation by an integer number of cells per axis."""
    if len(cells) != f.grid.dim:
        raise FieldError(f"shift needs {f.grid.dim} offsets, got {len(cells)}")
    if isinstance(f, VectorField):
        axes = tuple(range(1, f.grid.dim + 1))
        return VectorField(f.grid, np.roll(f.values, tuple(cells), axes))
    return ScalarField(f.grid, np.roll(f.values, tuple(cells), tuple(range(f.grid.dim))))
