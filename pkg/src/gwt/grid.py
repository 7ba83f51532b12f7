"""Uniform periodic grids, discrete Fourier transforms and scattered spectral evaluation.

Transform convention (no factor on the forward sum)::

    what_l = sum_j w_j exp(-i zeta_l (eta_j - a)),   zeta_l = 2 pi l / (b - a)
    w(x)   = (1/N) sum_l what_l exp(i zeta_l (x - a)),  l = -N/2, ..., N/2 - 1

Public transforms return coefficients in centred layout (index 0 <-> l = -N/2).
Solvers work in the native FFT layout internally via :meth:`UniformGrid.native_wavenumbers`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import finufft
import numpy as np
import scipy.fft as sfft

NUFFT_TOL = 1e-14


@dataclass(frozen=True)
class UniformGrid:
    """Tensor grid with nodes ``a_k + j (b_k - a_k) / N_k``; ``b_k`` is excluded."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.counts)):
            raise ValueError("bounds and counts must have the same number of axes")
        if self.dim not in (1, 2, 3):
            raise ValueError(f"unsupported dimension {self.dim}")
        for a, b, n in zip(self.lower, self.upper, self.counts):
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"point count must be an even integer >= 4, got {n}")
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ValueError(f"degenerate interval [{a}, {b})")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for n in self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.upper, float) - np.asarray(self.lower, float)

    @property
    def spacing(self) -> np.ndarray:
        return self.lengths / np.asarray(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.lengths))

    def axis_nodes(self, k: int) -> np.ndarray:
        return self.lower[k] + np.arange(self.shape[k]) * self.spacing[k]

    def wavenumbers(self, k: int) -> np.ndarray:
        """Centred wavenumbers ``2 pi l / (b - a)`` for ``l = -N/2 .. N/2-1``."""
        n = self.shape[k]
        return 2 * np.pi * np.arange(-n // 2, n // 2) / self.lengths[k]

    def native_wavenumbers(self, k: int) -> np.ndarray:
        """Wavenumbers in FFT-native order; the Nyquist entry is ``l = -N/2``."""
        n = self.shape[k]
        return 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n) / self.lengths[k]

    @cached_property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``counts + (dim,)``."""
        axes = np.meshgrid(*(self.axis_nodes(k) for k in range(self.dim)), indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def native_ksq_components(self) -> tuple[np.ndarray, ...]:
        """Broadcastable native-order wavenumber arrays, one per axis."""
        out = []
        for k in range(self.dim):
            shape = [1] * self.dim
            shape[k] = self.shape[k]
            out.append(self.native_wavenumbers(k).reshape(shape))
        return tuple(out)

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Map points into the periodic cell ``[a, b)`` axis by axis."""
        pts = np.asarray(points, float)
        lo = np.asarray(self.lower, float)
        return lo + np.mod(pts - lo, self.lengths)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, float)
        lo = np.asarray(self.lower, float)
        hi = np.asarray(self.upper, float)
        return np.all((pts >= lo) & (pts < hi), axis=-1)


@dataclass(frozen=True)
class GridField:
    grid: UniformGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    def with_values(self, values: np.ndarray) -> "GridField":
        return GridField(self.grid, values)


def make_grid(bounds: Sequence[tuple[float, float]], counts: Sequence[int] | int) -> UniformGrid:
    bounds = [tuple(map(float, b)) for b in bounds]
    if np.isscalar(counts):
        counts = [int(counts)] * len(bounds)
    return UniformGrid(
        lower=tuple(b[0] for b in bounds),
        upper=tuple(b[1] for b in bounds),
        counts=tuple(int(n) for n in counts),
    )


def transform_forward(field: GridField) -> np.ndarray:
    """Unnormalized DFT coefficients in centred layout."""
    return sfft.fftshift(sfft.fftn(field.values))


def transform_inverse(coeffs: np.ndarray, grid: UniformGrid) -> GridField:
    coeffs = np.asarray(coeffs)
    if coeffs.shape != grid.shape:
        raise ValueError("coefficient shape does not match grid")
    return GridField(grid, sfft.ifftn(sfft.ifftshift(coeffs)))


def discrete_l2_norm(field: GridField) -> float:
    h = float(np.prod(field.grid.spacing))
    return float(np.sqrt(h * np.sum(np.abs(field.values) ** 2)))


def _scaled_points(grid: UniformGrid, points: np.ndarray) -> list[np.ndarray]:
    """Rescale each coordinate so that the cell maps onto ``[0, 2 pi)``."""
    pts = grid.wrap(points)
    return [
        np.ascontiguousarray(2 * np.pi * (pts[:, k] - grid.lower[k]) / grid.lengths[k])
        for k in range(grid.dim)
    ]


def eval_coefficients_at(coeffs: np.ndarray, grid: UniformGrid, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant given centred coefficients.

    ``points`` has shape ``(M, d)`` or ``(..., d)``; the result has the leading shape.
    """
    points = np.asarray(points, float)
    lead = points.shape[:-1]
    flat = points.reshape(-1, grid.dim)
    xs = _scaled_points(grid, flat)
    c = np.ascontiguousarray(coeffs, dtype=complex)
    if grid.dim == 1:
        out = finufft.nufft1d2(xs[0], c, eps=NUFFT_TOL, isign=1)
    elif grid.dim == 2:
        out = finufft.nufft2d2(xs[0], xs[1], c, eps=NUFFT_TOL, isign=1)
    else:
        out = finufft.nufft3d2(xs[0], xs[1], xs[2], c, eps=NUFFT_TOL, isign=1)
    return (out / grid.size).reshape(lead)


def spectral_eval_at(field: GridField, points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of ``field`` at arbitrary points (wrapped into the cell)."""
    return eval_coefficients_at(transform_forward(field), field.grid, points)


def spectral_eval_direct(field: GridField, points: np.ndarray) -> np.ndarray:
    """O(N M) double-sum evaluation of the same interpolant; slow, used for cross-checks."""
    grid = field.grid
    points = np.asarray(points, float)
    lead = points.shape[:-1]
    flat = grid.wrap(points.reshape(-1, grid.dim))
    coeffs = transform_forward(field)
    phases = [
        np.exp(1j * np.outer(flat[:, k] - grid.lower[k], grid.wavenumbers(k))) for k in range(grid.dim)
    ]
    if grid.dim == 1:
        out = phases[0] @ coeffs
    elif grid.dim == 2:
        out = np.einsum("mk,kl,ml->m", phases[0], coeffs, phases[1])
    else:
        out = np.einsum("mk,klr,ml,mr->m", phases[0], coeffs, phases[1], phases[2])
    return (out / grid.size).reshape(lead)


class ScatteredEvaluator:
    """Reusable evaluator for a fixed point set (e.g. cached characteristic feet)."""

    def __init__(self, grid: UniformGrid, points: np.ndarray):
        self.grid = grid
        flat = np.asarray(points, float).reshape(-1, grid.dim)
        self._lead = np.asarray(points).shape[:-1]
        self._plan = finufft.Plan(2, grid.shape, eps=NUFFT_TOL, isign=1)
        self._plan.setpts(*_scaled_points(grid, flat))

    def from_native(self, native_coeffs: np.ndarray) -> np.ndarray:
        """Evaluate from FFT-native (unshifted) coefficients."""
        c = np.ascontiguousarray(sfft.fftshift(native_coeffs), dtype=complex)
        return (self._plan.execute(c) / self.grid.size).reshape(self._lead)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        return self.from_native(sfft.fftn(values))
