"""Moving between the transformed representation (w + packet parameters) and psi."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import GridField, UniformGrid, discrete_l2_norm, spectral_eval_at
from .packet import PacketInvariantError, PacketState, initial_state
from .wsolver import WState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianInitialData:
    """``psi0 = exp(i (xi^T C xi + p0^T xi + delta) / eps)`` with ``xi = x - x0``."""

    x0: np.ndarray
    p0: np.ndarray
    C: np.ndarray
    delta: complex = 0.0

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, float))
        d = x0.shape[0]
        C = np.asarray(self.C, complex)
        if C.ndim == 0:
            C = C * np.eye(d)
        if np.max(np.abs(C - C.T)) > 1e-14:
            raise ValueError("C must be symmetric")
        if np.linalg.eigvalsh(C.imag).min() <= 0:
            raise PacketInvariantError("Im C must be positive definite")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "p0", np.atleast_1d(np.asarray(self.p0, float)))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "delta", complex(self.delta))

    @property
    def dim(self) -> int:
        return self.x0.shape[0]

    def psi(self, x: np.ndarray, eps: float) -> np.ndarray:
        xi = np.asarray(x, float) - self.x0
        phase = np.einsum("...k,kl,...l->...", xi, self.C, xi) + xi @ self.p0 + self.delta
        return np.exp(1j * phase / eps)


def normalized_gaussian(x0, p0, C, gamma0: complex, eps: float) -> GaussianInitialData:
    """Gaussian data with unit L2 mass; the prefactor is folded into ``Im delta``."""
    x0 = np.atleast_1d(np.asarray(x0, float))
    d = x0.shape[0]
    C = np.asarray(C, complex)
    if C.ndim == 0:
        C = C * np.eye(d)
    log_prefactor = 0.25 * np.log(np.linalg.det(2 * C.imag) / (np.pi * eps) ** d)
    return GaussianInitialData(x0, p0, C, complex(gamma0) - 1j * eps * log_prefactor)


@dataclass(frozen=True)
class GeneralInitialData:
    """``psi0 = f(xi) exp(i (g(xi) + p0^T xi + delta) / eps)``, ``xi = x - q0``.

    ``g(0) = 0``, ``grad g(0) = 0`` and ``Im g`` convex; ``C = hess g(0) / 2``
    is computed by central differences unless supplied.
    """

    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    q0: np.ndarray
    p0: np.ndarray
    delta: complex = 0.0
    C: np.ndarray | None = None

    def __post_init__(self):
        q0 = np.atleast_1d(np.asarray(self.q0, float))
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "p0", np.atleast_1d(np.asarray(self.p0, float)))
        C = self.C if self.C is not None else 0.5 * _hessian_at_zero(self.g, q0.shape[0])
        C = np.asarray(C, complex)
        if C.ndim == 0:
            C = C * np.eye(q0.shape[0])
        C = 0.5 * (C + C.T)
        if np.linalg.eigvalsh(C.imag).min() <= 0:
            raise PacketInvariantError("Im C = Im hess g(0) / 2 must be positive definite")
        object.__setattr__(self, "C", C)

    @property
    def dim(self) -> int:
        return self.q0.shape[0]

    def psi(self, x: np.ndarray, eps: float) -> np.ndarray:
        xi = np.asarray(x, float) - self.q0
        return self.f(xi) * np.exp(1j * (self.g(xi) + xi @ self.p0 + self.delta) / eps)


def _hessian_at_zero(g, d: int, h: float = 2e-3) -> np.ndarray:
    """Central-difference Hessian at the origin, Richardson-extrapolated to O(h^4)."""

    def central(step):
        H = np.zeros((d, d), complex)
        E = np.eye(d) * step
        for i in range(d):
            for j in range(d):
                H[i, j] = (
                    g(E[i] + E[j]) - g(E[i] - E[j]) - g(-E[i] + E[j]) + g(-E[i] - E[j])
                ) / (4 * step * step)
        return H

    return (4 * central(h / 2) - central(h)) / 3


def _check_convex_imag(g, points: np.ndarray, rng=None) -> None:
    """Midpoint-convexity test of ``Im g`` on random pairs of sample points."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = points.reshape(-1, points.shape[-1])
    i = rng.integers(0, len(pts), 256)
    j = rng.integers(0, len(pts), 256)
    a, b = pts[i], pts[j]
    lhs = np.imag(g(0.5 * (a + b)))
    rhs = 0.5 * (np.imag(g(a)) + np.imag(g(b)))
    if np.any(lhs > rhs + 1e-12 * (1 + np.abs(rhs))):
        raise ValueError("Im g is not convex on the sampled domain")


def init_from_gaussian(data: GaussianInitialData, eta_grid: UniformGrid, eps: float):
    """Packet state and ``w(eta, 0) = exp(-|eta|^2)`` (independent of the data)."""
    state = initial_state(data.x0, data.p0, data.C, data.delta)
    eta = eta_grid.nodes
    w0 = np.exp(-np.sum(eta * eta, axis=-1)).astype(complex)
    return state, WState(GridField(eta_grid, w0), 0.0, eps)


def init_from_general(data: GeneralInitialData, eta_grid: UniformGrid, eps: float):
    if eps <= 0:
        raise ValueError("eps must be positive")
    state = initial_state(data.q0, data.p0, data.C, data.delta)
    Binv = np.linalg.inv(state.B)
    xi = np.sqrt(eps) * (eta_grid.nodes @ Binv.T)
    _check_convex_imag(data.g, xi)
    CR = data.C.real
    quad = np.einsum("...k,kl,...l->...", xi, CR, xi)
    w0 = data.f(xi) * np.exp(1j * (data.g(xi) - quad) / eps)
    w0 = np.broadcast_to(w0, eta_grid.shape).astype(complex)
    if not np.all(np.isfinite(w0)):
        raise FloatingPointError("initial w has non-finite samples")
    return state, WState(GridField(eta_grid, w0), 0.0, eps)


def _min_image(xi: np.ndarray, grid: UniformGrid) -> np.ndarray:
    L = grid.lengths
    return xi - L * np.round(xi / L)


def _eta_points(state: PacketState, x_grid: UniformGrid, eps: float) -> np.ndarray:
    xi = _min_image(x_grid.nodes - state.q, x_grid)
    return xi @ state.B.T / np.sqrt(eps)


def outside_fraction(w: WState, state: PacketState, x_grid: UniformGrid, eps: float) -> float:
    """Fraction of x-nodes whose ``eta`` lies outside the computational eta-cell."""
    inside = w.grid.contains(_eta_points(state, x_grid, eps))
    return float(1.0 - inside.mean())


def reconstruct_psi(w: WState, state: PacketState, x_grid: UniformGrid, eps: float, *, outside: str = "zero") -> GridField:
    """Evaluate ``psi = w(B xi / sqrt(eps)) exp(i (xi^T aR xi + p^T xi + gamma2) / eps)``.

    ``xi`` is the periodic minimum image of ``x - q``.  Points whose ``eta`` falls
    outside the computational eta-cell get ``w = 0`` (``outside="zero"``) or the
    periodic extension of ``w`` (``outside="wrap"``).
    """
    if abs(w.t - state.t) > 1e-9 * max(1.0, abs(state.t)):
        raise ValueError(f"w at t={w.t} but packet state at t={state.t}")
    if outside not in ("zero", "wrap"):
        raise ValueError("outside must be 'zero' or 'wrap'")
    xi = _min_image(x_grid.nodes - state.q, x_grid)
    eta = xi @ state.B.T / np.sqrt(eps)
    inside = w.grid.contains(eta)
    if not inside.all():
        log.debug("%d of %d x-nodes map outside the eta cell (outside=%s)", inside.size - inside.sum(), inside.size, outside)
    mask = np.ones(x_grid.shape, bool) if outside == "wrap" else inside
    out = np.zeros(x_grid.shape, complex)
    if not mask.any():
        return GridField(x_grid, out)
    xs = xi[mask]
    phase = np.einsum("mk,kl,ml->m", xs, state.alpha_R, xs) + xs @ state.p + state.gamma2
    out[mask] = spectral_eval_at(w.field, eta[mask]) * np.exp(1j * phase / eps)
    return GridField(x_grid, out)


@dataclass(frozen=True)
class PositionObservable:
    mean: np.ndarray
    mean_normalized: np.ndarray
    mass: float


def position_expectation(w: WState, state: PacketState, eps: float) -> PositionObservable:
    """``<x>`` computed from ``w`` and the packet parameters, without reconstructing psi."""
    d = state.dim
    eta = w.grid.nodes
    dens = np.abs(w.values) ** 2
    h = float(np.prod(w.grid.spacing))
    first = h * np.tensordot(dens, eta, axes=dens.ndim)
    zeroth = h * dens.sum()
    scale = np.exp(-2 * state.gamma2.imag / eps) / abs(np.linalg.det(state.B))
    Binv = np.linalg.inv(state.B)
    correction = eps ** ((d + 1) / 2) * scale * (Binv @ first)
    mass = eps ** (d / 2) * scale * zeroth
    return PositionObservable(
        mean=state.q + correction,
        mean_normalized=state.q + correction / mass,
        mass=float(mass),
    )


def _same_cell(a: UniformGrid, b: UniformGrid, tol: float = 1e-12) -> bool:
    return (
        a.dim == b.dim
        and np.allclose(a.lower, b.lower, rtol=0, atol=tol * max(1.0, np.max(np.abs(a.lower))))
        and np.allclose(a.upper, b.upper, rtol=0, atol=tol * max(1.0, np.max(np.abs(a.upper))))
    )


def resample(field: GridField, grid: UniformGrid) -> GridField:
    if not _same_cell(field.grid, grid):
        raise ValueError("fields live on different periodic cells")
    if field.grid == grid:
        return field
    return GridField(grid, spectral_eval_at(field, grid.nodes))


def l2_error(numerical: GridField, reference: GridField) -> tuple[float, float]:
    """Absolute and relative discrete L2 error on the reference grid."""
    if any(a > b for a, b in zip(numerical.grid.shape, reference.grid.shape)):
        raise ValueError("the reference grid must be at least as fine as the numerical grid")
    num = resample(numerical, reference.grid)
    diff = GridField(reference.grid, num.values - reference.values)
    absolute = discrete_l2_norm(diff)
    ref_norm = discrete_l2_norm(reference)
    return absolute, (absolute / ref_norm if ref_norm > 0 else float("inf"))


MAX_HERMITE_LEVEL = 10


def hermite_function(k: int, z: np.ndarray, eps: float) -> np.ndarray:
    """Unit-norm eigenfunction ``phi_k`` of ``-(eps^2/2) d_zz + z^2/2`` (eigenvalue ``(k+1/2) eps``)."""
    if not 0 <= k <= MAX_HERMITE_LEVEL:
        raise ValueError(f"mode index must be in [0, {MAX_HERMITE_LEVEL}]")
    s = np.asarray(z, float) / np.sqrt(eps)
    prev = np.zeros_like(s)
    cur = (np.pi * eps) ** -0.25 * np.exp(-0.5 * s * s)
    for n in range(k):
        prev, cur = cur, np.sqrt(2.0 / (n + 1)) * s * cur - np.sqrt(n / (n + 1)) * prev
    return cur


def oscillator_energy(k: int, eps: float) -> float:
    return (k + 0.5) * eps


def assemble_3d(u: GridField, k: int, eps: float, t: float, z) -> np.ndarray:
    """``psi(x, y, z, t) = u(x, y, t) exp(-i E_k t / eps) phi_k(z)``, shape ``u.shape + (Nz,)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if u.grid.dim != 2:
        raise ValueError("u must be a 2D field")
    zs = z.axis_nodes(0) if isinstance(z, UniformGrid) else np.asarray(z, float)
    phi = hermite_function(k, zs, eps)
    phase = np.exp(-1j * oscillator_energy(k, eps) * t / eps)
    return u.values[..., None] * phase * phi
