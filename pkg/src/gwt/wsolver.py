"""Operator-split solver for the rescaled (non-oscillatory) w-equation.

The equation is split into

* kinetic:    ``w_t = (i/2) Tr(B^T (grad grad w) B)``      -- exact in Fourier space
* potential:  ``w_t = F(eta, t) w``  with ``F`` purely imaginary
* convection: ``w_t = G(eta, t) . grad w``                 -- semi-Lagrangian

and composed either as three parts (``SL-TS3``) or with potential and
convection fused into one characteristic solve (``SL-TS2``).  All coefficients
come from a precomputed :class:`~gwt.packet.PacketTrajectory`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .grid import GridField, discrete_l2_norm, spectral_eval_at
from .packet import PacketTrajectory
from .potentials import taylor_remainders

log = logging.getLogger(__name__)

SCHEMES = ("SL-TS2", "SL-TS3")
COMPOSITIONS = ("strang", "lie")
QUADRATURES = ("trapezoid", "midpoint")
TRACERS = ("heun", "rk4")
ORDERINGS = ("K-outer", "P-outer")

BOUNDARY_WARN = 1e-10


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "SL-TS3"
    composition: str = "strang"
    dt: float = 1 / 32
    quadrature: str = "trapezoid"
    tracer: str = "heun"
    ordering: str = "K-outer"
    half_quadratic: bool = True
    # testing hook: zero the potential term F; not reachable from the CLI
    disable_potential: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for value, allowed, label in (
            (self.scheme, SCHEMES, "scheme"),
            (self.composition, COMPOSITIONS, "composition"),
            (self.quadrature, QUADRATURES, "quadrature"),
            (self.tracer, TRACERS, "tracer"),
            (self.ordering, ORDERINGS, "ordering"),
        ):
            if value not in allowed:
                raise ValueError(f"{label} must be one of {allowed}, got {value!r}")


DEFAULT_CFG = SchemeConfig()


@dataclass(frozen=True)
class WState:
    field: GridField
    t: float
    eps: float

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def evolved(self, values: np.ndarray, t: float) -> "WState":
        return WState(self.field.with_values(values), t, self.eps)


# --- coefficients ------------------------------------------------------------------


def _displacements(state, eta: np.ndarray, eps: float) -> np.ndarray:
    Binv = np.linalg.inv(state.B)
    return np.sqrt(eps) * (np.asarray(eta, float) @ Binv.T)


def eval_G(traj: PacketTrajectory, t: float, eta: np.ndarray, *, half_quadratic: bool = True) -> np.ndarray:
    """Convection velocity ``B A_(1)(xi) / sqrt(eps)`` at points ``eta`` (shape ``(..., d)``)."""
    state = traj.sample(t)
    xi = _displacements(state, eta, traj.eps)
    rem = taylor_remainders(traj.model, state.q, xi, half_quadratic=half_quadratic)
    return rem.A1 @ state.B.T / np.sqrt(traj.eps)


def eval_F(traj: PacketTrajectory, t: float, eta: np.ndarray, *, half_quadratic: bool = True) -> np.ndarray:
    """Purely imaginary potential coefficient at points ``eta``.

    ``F = -2i eta^T B^{-T} aI^2 B^{-1} eta
          + (U_r - 2 A_(1)^T aR xi - A_r^T p) / (i eps)``  with ``xi = sqrt(eps) B^{-1} eta``.
    """
    eps = traj.eps
    state = traj.sample(t)
    eta = np.asarray(eta, float)
    Binv = np.linalg.inv(state.B)
    aI = state.alpha_I
    M = Binv.T @ aI @ aI @ Binv
    xi = np.sqrt(eps) * (eta @ Binv.T)
    rem = taylor_remainders(traj.model, state.q, xi, half_quadratic=half_quadratic)
    harmonic = np.einsum("...k,kl,...l->...", eta, M, eta)
    remainder = (
        rem.U_r
        - 2 * np.einsum("...k,kl,...l->...", rem.A1, state.alpha_R, xi)
        - rem.Ar @ state.p
    )
    return 1j * (-2 * harmonic - remainder / eps)


def _quad_rule(t0: float, t1: float, rule: str):
    h = t1 - t0
    if rule == "trapezoid":
        return [(t0, h / 2), (t1, h / 2)]
    return [(t0 + h / 2, h)]


def _t0(w: WState, t0):
    return w.t if t0 is None else t0


# --- sub-steps ---------------------------------------------------------------------


def kinetic_phase(traj: PacketTrajectory, grid, t0: float, t1: float, quadrature: str = "trapezoid") -> np.ndarray:
    """Quadrature of ``|B(s)^T zeta|^2 / 2`` over ``[t0, t1]``, native FFT layout."""
    ks = grid.native_ksq_components
    K = np.zeros(grid.shape)
    for s, weight in _quad_rule(t0, t1, quadrature):
        B = traj.sample(s).B
        BBt = B @ B.T
        for a in range(grid.dim):
            for b in range(grid.dim):
                K = K + weight * 0.5 * BBt[a, b] * ks[a] * ks[b]
    return K


def kinetic_step(w: WState, traj: PacketTrajectory, dt: float, cfg: SchemeConfig = DEFAULT_CFG, t0=None) -> WState:
    start = _t0(w, t0)
    if dt == 0:
        return w.evolved(w.values.copy(), start)
    K = kinetic_phase(traj, w.grid, start, start + dt, cfg.quadrature)
    values = sfft.ifftn(np.exp(-1j * K) * sfft.fftn(w.values))
    return w.evolved(values, start + dt)


def potential_step(w: WState, traj: PacketTrajectory, dt: float, cfg: SchemeConfig = DEFAULT_CFG, t0=None) -> WState:
    start = _t0(w, t0)
    if dt == 0 or cfg.disable_potential:
        return w.evolved(w.values.copy(), start + dt)
    eta = w.grid.nodes
    Fj = sum(weight * eval_F(traj, s, eta, half_quadratic=cfg.half_quadratic)
             for s, weight in _quad_rule(start, start + dt, cfg.quadrature))
    # F is imaginary by construction; exp of the imaginary part keeps |w_j| exactly
    return w.evolved(np.exp(1j * Fj.imag) * w.values, start + dt)


def trace_feet(
    traj: PacketTrajectory, eta: np.ndarray, t0: float, t1: float, tracer: str = "heun", *, half_quadratic: bool = True
) -> np.ndarray:
    """Feet at ``t0`` of the characteristics ``d eta/dt = -G`` that end at ``eta`` at ``t1``."""
    h = t1 - t0

    def G(x, t):
        return eval_G(traj, t, x, half_quadratic=half_quadratic)

    y = np.asarray(eta, float)
    if tracer == "heun":
        k1 = G(y, t1)
        k2 = G(y + h * k1, t0)
        feet = y + h / 2 * (k1 + k2)
    else:
        tm = t1 - h / 2
        k1 = G(y, t1)
        k2 = G(y + h / 2 * k1, tm)
        k3 = G(y + h / 2 * k2, tm)
        k4 = G(y + h * k3, t0)
        feet = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(feet)):
        raise FloatingPointError(f"non-finite characteristic feet on [{t0}, {t1}]")
    return feet


def convection_step(w: WState, traj: PacketTrajectory, dt: float, cfg: SchemeConfig = DEFAULT_CFG, t0=None) -> WState:
    start = _t0(w, t0)
    if dt == 0:
        return w.evolved(w.values.copy(), start)
    feet = trace_feet(traj, w.grid.nodes, start, start + dt, cfg.tracer, half_quadratic=cfg.half_quadratic)
    return w.evolved(spectral_eval_at(w.field, feet), start + dt)


def convection_potential_step(
    w: WState, traj: PacketTrajectory, dt: float, cfg: SchemeConfig = DEFAULT_CFG, t0=None
) -> WState:
    """Backward-forward step: trace the foot, then integrate F along the traced path."""
    start = _t0(w, t0)
    if dt == 0:
        return w.evolved(w.values.copy(), start)
    t1 = start + dt
    eta = w.grid.nodes
    hq = cfg.half_quadratic
    feet = trace_feet(traj, eta, start, t1, cfg.tracer, half_quadratic=hq)
    moved = spectral_eval_at(w.field, feet)
    if cfg.disable_potential:
        return w.evolved(moved, t1)
    if cfg.quadrature == "trapezoid":
        H = dt / 2 * (eval_F(traj, start, feet, half_quadratic=hq) + eval_F(traj, t1, eta, half_quadratic=hq))
    else:
        H = dt * eval_F(traj, start + dt / 2, 0.5 * (feet + eta), half_quadratic=hq)
    return w.evolved(np.exp(1j * H.imag) * moved, t1)


_OPS = {
    "K": kinetic_step,
    "P": potential_step,
    "C": convection_step,
    "CP": convection_potential_step,
}


def step_sequence(cfg: SchemeConfig, t: float, dt: float) -> list[tuple[str, float, float]]:
    """Sub-steps ``(operator, t_start, t_end)`` for one step, in application order."""
    m = t + dt / 2
    e = t + dt
    if cfg.composition == "lie":
        names = ["K", "P", "C"] if cfg.scheme == "SL-TS3" else ["K", "CP"]
        return [(n, t, e) for n in names]
    if cfg.scheme == "SL-TS3":
        outer, inner, core = ("K", "P", "C") if cfg.ordering == "K-outer" else ("P", "C", "K")
        return [(outer, t, m), (inner, t, m), (core, t, e), (inner, m, e), (outer, m, e)]
    outer, core = ("K", "CP") if cfg.ordering == "K-outer" else ("CP", "K")
    return [(outer, t, m), (core, t, e), (outer, m, e)]


def advance(w: WState, traj: PacketTrajectory, cfg: SchemeConfig, dt: float | None = None) -> WState:
    """One composed time step of size ``dt`` (defaults to ``cfg.dt``)."""
    dt = cfg.dt if dt is None else dt
    span = max(traj.t_end, 1.0)
    if w.t + dt > traj.t_end + 1e-12 * span:
        raise ValueError(f"step to t={w.t + dt} exceeds trajectory end {traj.t_end}")
    out = w
    for name, a, b in step_sequence(cfg, w.t, dt):
        out = _OPS[name](out, traj, b - a, cfg, t0=a)
    values = out.values
    if not np.all(np.isfinite(values)):
        raise FloatingPointError(f"non-finite w after step ending at t={w.t + dt}")
    return w.evolved(values, w.t + dt)


def boundary_ratio(w: WState) -> float:
    """Max ``|w|`` over boundary-adjacent nodes relative to max ``|w|``."""
    a = np.abs(w.values)
    peak = a.max()
    if peak == 0:
        return 0.0
    edge = 0.0
    for k in range(a.ndim):
        edge = max(edge, np.take(a, [0, -1], axis=k).max())
    return float(edge / peak)


def spectral_tail_ratio(w: WState, band: float = 0.75) -> float:
    """Max ``|what|`` over modes with ``|l_k| >= band * N_k / 2`` on any axis, relative to the peak.

    Small values mean ``w`` is resolved by the eta mesh.
    """
    c = np.abs(sfft.fftn(w.values))
    peak = c.max()
    if peak == 0:
        return 0.0
    outer = np.zeros(c.shape, bool)
    for k, n in enumerate(w.grid.shape):
        l = np.abs(sfft.fftfreq(n, 1.0 / n))
        shape = [1] * c.ndim
        shape[k] = n
        outer |= (l >= band * n / 2).reshape(shape)
    return float(c[outer].max() / peak)


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    norm: float
    boundary: float


def time_steps(T: float, dt: float) -> list[float]:
    n = int(np.floor(T / dt + 1e-9))
    steps = [dt] * n
    rest = T - n * dt
    if rest > 1e-12 * max(T, 1.0):
        steps.append(rest)
    return steps


def evolve(w0: WState, traj: PacketTrajectory, cfg: SchemeConfig, T: float, on_step=None):
    """Advance from ``w0.t`` to ``T``; returns the final state and per-step diagnostics.

    ``on_step(w)`` is called with the initial state and after every step.
    """
    w = w0
    if on_step is not None:
        on_step(w)
    diags = [StepDiagnostics(w.t, discrete_l2_norm(w.field), boundary_ratio(w))]
    warned = False
    for h in time_steps(T - w0.t, cfg.dt):
        w = advance(w, traj, cfg, h)
        d = StepDiagnostics(w.t, discrete_l2_norm(w.field), boundary_ratio(w))
        diags.append(d)
        if on_step is not None:
            on_step(w)
        if d.boundary > BOUNDARY_WARN and not warned:
            log.warning("w reaches %.2e of its peak at the eta-domain boundary (t=%.4g); "
                        "the computational domain may be too small", d.boundary, d.t)
            warned = True
    return w, diags


def with_dt(cfg: SchemeConfig, dt: float) -> SchemeConfig:
    return replace(cfg, dt=dt)
