"""Gaussian wave packet parameters: ODE right-hand side, RK4 integration, dense output."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .potentials import PotentialModel, eval_effective

log = logging.getLogger(__name__)


class PacketInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class PacketState:
    """Packet parameters at time ``t``; ``alpha`` is the complex symmetric Hessian."""

    t: float
    q: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    gamma2: complex
    B: np.ndarray

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def alpha_R(self) -> np.ndarray:
        return self.alpha.real

    @property
    def alpha_I(self) -> np.ndarray:
        return self.alpha.imag

    def b_drift(self) -> float:
        """Frobenius norm of ``B^T B - alpha_I``."""
        return float(np.linalg.norm(self.B.T @ self.B - self.alpha_I))

    def pack(self) -> np.ndarray:
        return np.concatenate(
            [
                self.q.astype(complex),
                self.p.astype(complex),
                self.alpha.ravel().astype(complex),
                [complex(self.gamma2)],
                self.B.ravel().astype(complex),
            ]
        )

    @classmethod
    def unpack(cls, t: float, y: np.ndarray, dim: int) -> "PacketState":
        d = dim
        i = 0
        q = y[i : i + d].real.copy(); i += d
        p = y[i : i + d].real.copy(); i += d
        alpha = y[i : i + d * d].reshape(d, d).copy(); i += d * d
        gamma2 = complex(y[i]); i += 1
        B = y[i : i + d * d].real.reshape(d, d).copy()
        return cls(float(t), q, p, alpha, gamma2, B)


def principal_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric positive square root of a symmetric positive definite matrix."""
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    if w.min() <= 0:
        raise PacketInvariantError(f"matrix is not positive definite (min eigenvalue {w.min():.3e})")
    return (V * np.sqrt(w)) @ V.T


def initial_state(q0, p0, alpha0, gamma0=0.0) -> PacketState:
    """Packet state at t=0 with ``B(0)`` the principal root of ``Im alpha0``."""
    q0 = np.atleast_1d(np.asarray(q0, float))
    d = q0.shape[0]
    p0 = np.atleast_1d(np.asarray(p0, float))
    alpha0 = np.asarray(alpha0, complex)
    if alpha0.ndim == 0:
        alpha0 = alpha0 * np.eye(d)
    alpha0 = 0.5 * (alpha0 + alpha0.T)
    return PacketState(0.0, q0, p0, alpha0, complex(gamma0), principal_sqrt(alpha0.imag))


def packet_rhs(state: PacketState, model: PotentialModel, eps: float) -> PacketState:
    """Time derivatives of all parameters, returned in a :class:`PacketState` shell."""
    q, p, alpha, B = state.q, state.p, state.alpha, state.B
    A = model.A(q)
    J = model.jac_A(q)
    HA = model.hess_A(q)
    U, gU, hU = eval_effective(model, q)

    dq = p - A
    dp = J.T @ p - gU
    hAp = np.einsum("ljk,l->jk", HA, p)
    dalpha = -2 * alpha @ alpha - 0.5 * hU + J.T @ alpha + alpha @ J + 0.5 * hAp
    dalpha = 0.5 * (dalpha + dalpha.T)
    dgamma2 = 0.5 * p @ p - U + 1j * eps * np.trace(alpha.real)
    dB = -2 * B @ alpha.real + B @ J
    return PacketState(state.t, dq, dp, dalpha, complex(dgamma2), dB)


@dataclass(frozen=True)
class PacketTrajectory:
    """RK4 node values plus node derivatives; off-node queries use cubic Hermite."""

    times: np.ndarray
    ys: np.ndarray
    fs: np.ndarray
    dim: int
    model: PotentialModel
    eps: float

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def state(self, k: int) -> PacketState:
        return PacketState.unpack(self.times[k], self.ys[k], self.dim)

    @property
    def final(self) -> PacketState:
        return self.state(len(self.times) - 1)

    def __len__(self) -> int:
        return len(self.times)

    def sample(self, t: float) -> PacketState:
        return sample_trajectory(self, t)


def _check_state(state: PacketState, tol_B: float | None, max_cond: float, on_drift: str = "raise") -> bool:
    """Abort on structural breaches; returns whether the B drift exceeded ``tol_B``."""
    aI = state.alpha_I
    if np.max(np.abs(state.alpha - state.alpha.T)) > 1e-12 * max(1.0, np.max(np.abs(state.alpha))):
        raise PacketInvariantError(f"alpha lost symmetry at t={state.t:.6g}")
    lam = np.linalg.eigvalsh(0.5 * (aI + aI.T))
    if lam.min() <= 0:
        raise PacketInvariantError(
            f"Im(alpha) lost positive definiteness at t={state.t:.6g} (min eigenvalue {lam.min():.3e})"
        )
    cond = np.linalg.cond(state.B)
    if not np.isfinite(cond) or cond > max_cond:
        raise PacketInvariantError(f"B is near singular at t={state.t:.6g} (cond {cond:.3e})")
    if tol_B is None:
        return False
    drift = state.b_drift()
    if drift <= tol_B * max(1.0, float(np.linalg.norm(aI))):
        return False
    msg = f"|B^T B - Im(alpha)| = {drift:.3e} exceeds {tol_B:.1e} at t={state.t:.6g}"
    if on_drift == "raise":
        raise PacketInvariantError(msg)
    if on_drift == "warn":
        log.warning("%s; reduce the packet step", msg)
    return True


def integrate_packet(
    state0: PacketState,
    model: PotentialModel,
    eps: float,
    T: float,
    dt: float,
    *,
    tol_B: float | None = 1e-10,
    max_cond: float = 1e12,
    on_drift: str = "warn",
) -> PacketTrajectory:
    """Classical RK4 with fixed step ``dt``; the last step is shortened to land on ``T``.

    Loss of symmetry or definiteness and a near-singular ``B`` always abort.  The
    ``B^T B = Im(alpha)`` drift is a discretization diagnostic: exceeding ``tol_B``
    logs one warning (``on_drift="warn"``), aborts (``"raise"``) or is ignored.
    """
    if on_drift not in ("warn", "raise", "ignore"):
        raise ValueError("on_drift must be 'warn', 'raise' or 'ignore'")
    if T < 0:
        raise ValueError("T must be non-negative")
    if T > 0 and dt <= 0:
        raise ValueError("dt must be positive")
    d = state0.dim
    if model.dim != d:
        raise ValueError(f"model dimension {model.dim} != packet dimension {d}")

    def f(t, y):
        return packet_rhs(PacketState.unpack(t, y, d), model, eps).pack()

    _check_state(state0, tol_B, max_cond, "raise")
    n_full = int(np.floor(T / dt + 1e-9)) if T > 0 else 0
    steps = [dt] * n_full
    rest = T - n_full * dt
    if rest > 1e-12 * max(T, 1.0):
        steps.append(rest)

    y = state0.pack()
    t = 0.0
    times = [0.0]
    ys = [y]
    fs = [f(0.0, y)]
    warned = False
    for k, h in enumerate(steps):
        k1 = fs[-1]
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (k + 1) * dt if k < n_full else T
        if not np.all(np.isfinite(y)):
            raise PacketInvariantError(f"non-finite packet parameters at t={t:.6g}")
        policy = "ignore" if warned and on_drift == "warn" else on_drift
        warned |= _check_state(PacketState.unpack(t, y, d), tol_B, max_cond, policy)
        times.append(t)
        ys.append(y)
        fs.append(f(t, y))
    return PacketTrajectory(np.array(times), np.array(ys), np.array(fs), d, model, eps)


def sample_trajectory(traj: PacketTrajectory, t: float) -> PacketState:
    times = traj.times
    span = max(traj.t_end, 1.0)
    if t < -1e-12 * span or t > traj.t_end + 1e-12 * span:
        raise ValueError(f"t={t} outside trajectory range [0, {traj.t_end}]")
    k = int(np.searchsorted(times, t))
    if k < len(times) and times[k] == t:
        return traj.state(k)
    k = min(max(k, 1), len(times) - 1)
    t0, t1 = times[k - 1], times[k]
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    y = h00 * traj.ys[k - 1] + h10 * h * traj.fs[k - 1] + h01 * traj.ys[k] + h11 * h * traj.fs[k]
    return PacketState.unpack(t, y, traj.dim)


def write_trajectory_csv(traj: PacketTrajectory, path: str | Path) -> None:
    d = traj.dim
    idx = [f"{j}" for j in range(d)]
    mat = [f"{j}{k}" for j in range(d) for k in range(d)]
    header = (
        ["t"]
        + [f"q_{i}" for i in idx]
        + [f"p_{i}" for i in idx]
        + [f"alpha_R_{m}" for m in mat]
        + [f"alpha_I_{m}" for m in mat]
        + ["gamma2_re", "gamma2_im"]
        + [f"B_{m}" for m in mat]
        + ["B_drift"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(traj)):
            s = traj.state(k)
            row = (
                [s.t, *s.q, *s.p, *s.alpha_R.ravel(), *s.alpha_I.ravel()]
                + [s.gamma2.real, s.gamma2.imag, *s.B.ravel(), s.b_drift()]
            )
            w.writerow([repr(float(v)) for v in row])
