"""Direct semi-Lagrangian time-splitting solver for the untransformed equation.

Solves ``psi_t = (i eps/2) Lap psi + A . grad psi - (i/eps) U psi`` on a periodic
x-grid with Strang splitting ``K(h/2) C(h/2) P(h) C(h/2) K(h/2)``.  Requires
``dx = O(eps)`` and ``dt = O(eps)`` to resolve the wave function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import GridField, ScatteredEvaluator, UniformGrid
from .potentials import PotentialModel, effective_value
from .wsolver import time_steps


@dataclass(frozen=True)
class PsiState:
    field: GridField
    t: float
    eps: float

    @property
    def grid(self) -> UniformGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


class ReferenceSolver:
    """Holds the grid-dependent multipliers and the cached characteristic feet."""

    def __init__(self, model: PotentialModel, eps: float, grid: UniformGrid):
        if model.dim != grid.dim:
            raise ValueError("model and grid dimensions differ")
        self.model = model
        self.eps = eps
        self.grid = grid
        ks = grid.native_ksq_components
        self._ksq = sum(k * k for k in ks)
        self._U = effective_value(model, grid.nodes)
        self._evaluators: dict[float, ScatteredEvaluator] = {}

    def kinetic_multiplier(self, dt: float) -> np.ndarray:
        return np.exp(-0.5j * self.eps * self._ksq * dt)

    def potential_multiplier(self, dt: float) -> np.ndarray:
        return np.exp(-1j * self._U * dt / self.eps)

    def feet(self, dt: float) -> np.ndarray:
        """RK4 feet of ``dx/dt = -A(x)`` traced back over ``dt`` from every node."""
        A = self.model.A
        x = self.grid.nodes
        k1 = A(x)
        k2 = A(x + dt / 2 * k1)
        k3 = A(x + dt / 2 * k2)
        k4 = A(x + dt * k3)
        return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def evaluator(self, dt: float) -> ScatteredEvaluator:
        # autonomous characteristics: the feet only depend on dt
        ev = self._evaluators.get(dt)
        if ev is None:
            ev = ScatteredEvaluator(self.grid, self.feet(dt))
            self._evaluators[dt] = ev
        return ev

    def step(self, values: np.ndarray, dt: float) -> np.ndarray:
        Kh = self.kinetic_multiplier(dt / 2)
        conv = self.evaluator(dt / 2)
        c = Kh * sfft.fftn(values)
        psi = conv.from_native(c)
        psi = self.potential_multiplier(dt) * psi
        psi = conv(psi)
        return sfft.ifftn(Kh * sfft.fftn(psi))

    def run(self, values: np.ndarray, n_steps: int, dt: float, check_every: int = 64) -> np.ndarray:
        """``n_steps`` Strang steps with adjacent kinetic half-steps fused."""
        if n_steps == 0:
            return values.copy()
        Kh = self.kinetic_multiplier(dt / 2)
        Kf = Kh * Kh
        P = self.potential_multiplier(dt)
        conv = self.evaluator(dt / 2)
        c = Kh * sfft.fftn(values)
        for n in range(n_steps):
            psi = P * conv.from_native(c)
            c = sfft.fftn(conv(psi))
            c *= Kf if n < n_steps - 1 else Kh
            if (n + 1) % check_every == 0 and not np.all(np.isfinite(c)):
                raise FloatingPointError(f"reference solution became non-finite at step {n + 1}")
        out = sfft.ifftn(c)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("reference solution became non-finite")
        return out


def reference_advance(psi: PsiState, model: PotentialModel, dt: float, solver: ReferenceSolver | None = None) -> PsiState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    solver = solver or ReferenceSolver(model, psi.eps, psi.grid)
    values = solver.step(psi.values, dt)
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"reference step from t={psi.t} produced non-finite values")
    return PsiState(psi.field.with_values(values), psi.t + dt, psi.eps)


def run_reference(
    psi0: PsiState, model: PotentialModel, T: float, dt: float, solver: ReferenceSolver | None = None
) -> PsiState:
    """Advance ``psi0`` to absolute time ``T``; a final partial step lands exactly on ``T``."""
    if T < psi0.t:
        raise ValueError("T precedes the initial time")
    if dt <= 0:
        raise ValueError("dt must be positive")
    solver = solver or ReferenceSolver(model, psi0.eps, psi0.grid)
    steps = time_steps(T - psi0.t, dt)
    n_full = sum(1 for h in steps if h == dt)
    values = solver.run(psi0.values, n_full, dt)
    state = PsiState(psi0.field.with_values(values), psi0.t + n_full * dt, psi0.eps)
    for h in steps[n_full:]:
        state = reference_advance(state, model, h, solver)
    return PsiState(state.field, T, psi0.eps)
