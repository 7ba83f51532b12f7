"""Scalar/vector potential models with analytic derivatives.

All evaluators are vectorized over points of shape ``(..., d)``:

* ``V -> (...)``, ``grad_V -> (..., d)``, ``hess_V -> (..., d, d)``
* ``A -> (..., d)``, ``jac_A -> (..., d, d)`` with ``jac_A[..., j, k] = dA_j/dx_k``
* ``hess_A -> (..., d, d, d)`` with ``hess_A[..., j, k, l] = d^2 A_j / dx_k dx_l``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PotentialModel:
    name: str
    dim: int
    V: Evaluator
    grad_V: Evaluator
    hess_V: Evaluator
    A: Evaluator
    jac_A: Evaluator
    hess_A: Evaluator
    divergence_free: bool = True
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RemainderBundle:
    """Taylor remainders of U and A about a packet centre, evaluated at displacements xi."""

    U_r: np.ndarray
    A1: np.ndarray
    Aq: np.ndarray
    Ar: np.ndarray


def eval_effective(model: PotentialModel, x: np.ndarray):
    """Return ``(U, grad U, hess U)`` for ``U = |A|^2 / 2 + V``."""
    x = np.asarray(x, float)
    A = model.A(x)
    J = model.jac_A(x)
    H = model.hess_A(x)
    U = 0.5 * np.sum(A * A, axis=-1) + model.V(x)
    grad = np.einsum("...j,...jk->...k", A, J) + model.grad_V(x)
    hess = (
        np.einsum("...jk,...jl->...kl", J, J)
        + np.einsum("...j,...jkl->...kl", A, H)
        + model.hess_V(x)
    )
    return U, grad, hess


def effective_value(model: PotentialModel, x: np.ndarray) -> np.ndarray:
    A = model.A(x)
    return 0.5 * np.sum(A * A, axis=-1) + model.V(x)


def taylor_remainders(
    model: PotentialModel, q: np.ndarray, xi: np.ndarray, *, half_quadratic: bool = True
) -> RemainderBundle:
    """Remainders of the quadratic (U) and linear (A) expansions about ``q``.

    ``half_quadratic=False`` drops the 1/2 in the second-order vector term; that
    variant is inconsistent with the packet ODE and exists for sensitivity runs only.
    """
    q = np.asarray(q, float)
    xi = np.asarray(xi, float)
    x = q + xi
    Uq, gU, hU = eval_effective(model, q)
    Aq0 = model.A(q)
    JA = model.jac_A(q)
    HA = model.hess_A(q)

    U_r = (
        effective_value(model, x)
        - Uq
        - xi @ gU
        - 0.5 * np.einsum("...k,kl,...l->...", xi, hU, xi)
    )
    A1 = model.A(x) - Aq0 - xi @ JA.T
    quad = np.einsum("jkl,...k,...l->...j", HA, xi, xi)
    Aq = 0.5 * quad if half_quadratic else quad
    return RemainderBundle(U_r=U_r, A1=A1, Aq=Aq, Ar=A1 - Aq)


def divergence(model: PotentialModel, x: np.ndarray) -> np.ndarray:
    return np.trace(model.jac_A(np.asarray(x, float)), axis1=-2, axis2=-1)


def check_divergence_free(model: PotentialModel, points: np.ndarray, tol: float = 1e-10) -> float:
    """Raise if sampled div A exceeds ``tol``; returns the max sampled magnitude."""
    worst = float(np.max(np.abs(divergence(model, points))))
    if worst > tol:
        raise ValueError(f"model {model.name!r}: div A reaches {worst:.3e} > {tol:.1e}")
    return worst


# --- built-in catalogue -------------------------------------------------------------


def _zeros(shape_tail):
    def f(x):
        x = np.asarray(x, float)
        return np.zeros(x.shape[:-1] + shape_tail)

    return f


def free(dim: int = 1) -> PotentialModel:
    return PotentialModel(
        name="free",
        dim=dim,
        V=_zeros(()),
        grad_V=_zeros((dim,)),
        hess_V=_zeros((dim, dim)),
        A=_zeros((dim,)),
        jac_A=_zeros((dim, dim)),
        hess_A=_zeros((dim, dim, dim)),
        params={"dim": dim},
    )


def harmonic(K=1.0, L=None) -> PotentialModel:
    """``V = x^T K x / 2`` and ``A = L x`` (L must be trace-free)."""
    K = np.atleast_2d(np.asarray(K, float))
    d = K.shape[0]
    K = 0.5 * (K + K.T)
    L = np.zeros((d, d)) if L is None else np.atleast_2d(np.asarray(L, float))
    if abs(np.trace(L)) > 1e-14:
        raise ValueError("harmonic model requires a trace-free L (div A = 0)")

    def V(x):
        return 0.5 * np.einsum("...k,kl,...l->...", x, K, x)

    def gV(x):
        return np.asarray(x, float) @ K

    def hV(x):
        x = np.asarray(x, float)
        return np.broadcast_to(K, x.shape[:-1] + (d, d)).copy()

    def A(x):
        return np.asarray(x, float) @ L.T

    def jA(x):
        x = np.asarray(x, float)
        return np.broadcast_to(L, x.shape[:-1] + (d, d)).copy()

    return PotentialModel(
        name="harmonic",
        dim=d,
        V=V,
        grad_V=gV,
        hess_V=hV,
        A=A,
        jac_A=jA,
        hess_A=_zeros((d, d, d)),
        params={"K": K.tolist(), "L": L.tolist()},
    )


def example1() -> PotentialModel:
    """1D benchmark: ``V = 1 + cos x``, ``A = sin x``."""

    def s(x):
        return np.sin(np.asarray(x, float)[..., 0])

    def c(x):
        return np.cos(np.asarray(x, float)[..., 0])

    return PotentialModel(
        name="example1",
        dim=1,
        V=lambda x: 1.0 + c(x),
        grad_V=lambda x: -s(x)[..., None],
        hess_V=lambda x: -c(x)[..., None, None],
        A=lambda x: s(x)[..., None],
        jac_A=lambda x: c(x)[..., None, None],
        hess_A=lambda x: -s(x)[..., None, None, None],
        divergence_free=False,
    )


def gaussian_vector(v_coef: float = 2.0, a_width: float = 2.0) -> PotentialModel:
    """1D harmonic scalar plus localized vector potential: ``V = c x^2``, ``A = exp(-w x^2)``."""

    def x0(x):
        return np.asarray(x, float)[..., 0]

    def g(x):
        return np.exp(-a_width * x0(x) ** 2)

    return PotentialModel(
        name="gaussian_vector",
        dim=1,
        V=lambda x: v_coef * x0(x) ** 2,
        grad_V=lambda x: (2 * v_coef * x0(x))[..., None],
        hess_V=lambda x: np.full(np.shape(x)[:-1] + (1, 1), 2 * v_coef),
        A=lambda x: g(x)[..., None],
        jac_A=lambda x: (-2 * a_width * x0(x) * g(x))[..., None, None],
        hess_A=lambda x: ((4 * a_width**2 * x0(x) ** 2 - 2 * a_width) * g(x))[..., None, None, None],
        divergence_free=False,
        params={"v_coef": v_coef, "a_width": a_width},
    )


def example3(scalar_amplitude: float = 1.0, tilde_v_effective: bool = True) -> PotentialModel:
    """2D magnetic case: ``A = (sin y, sin x)``, ``Vt = s (cos x + cos y)``.

    With ``tilde_v_effective`` the given ``Vt`` is the full effective potential
    ``U = |A|^2/2 + V`` (so ``V = Vt - |A|^2/2``); otherwise ``Vt`` is used as ``V``.
    """
    s = float(scalar_amplitude)
    sub = 1.0 if tilde_v_effective else 0.0

    def parts(x):
        x = np.asarray(x, float)
        return x[..., 0], x[..., 1]

    def V(x):
        X, Y = parts(x)
        return s * (np.cos(X) + np.cos(Y)) - sub * 0.5 * (np.sin(Y) ** 2 + np.sin(X) ** 2)

    def gV(x):
        X, Y = parts(x)
        return np.stack(
            [-s * np.sin(X) - sub * np.sin(X) * np.cos(X), -s * np.sin(Y) - sub * np.sin(Y) * np.cos(Y)],
            axis=-1,
        )

    def hV(x):
        X, Y = parts(x)
        out = np.zeros(X.shape + (2, 2))
        out[..., 0, 0] = -s * np.cos(X) - sub * np.cos(2 * X)
        out[..., 1, 1] = -s * np.cos(Y) - sub * np.cos(2 * Y)
        return out

    def A(x):
        X, Y = parts(x)
        return np.stack([np.sin(Y), np.sin(X)], axis=-1)

    def jA(x):
        X, Y = parts(x)
        out = np.zeros(X.shape + (2, 2))
        out[..., 0, 1] = np.cos(Y)
        out[..., 1, 0] = np.cos(X)
        return out

    def hA(x):
        X, Y = parts(x)
        out = np.zeros(X.shape + (2, 2, 2))
        out[..., 0, 1, 1] = -np.sin(Y)
        out[..., 1, 0, 0] = -np.sin(X)
        return out

    return PotentialModel(
        name="example3",
        dim=2,
        V=V,
        grad_V=gV,
        hess_V=hV,
        A=A,
        jac_A=jA,
        hess_A=hA,
        params={"scalar_amplitude": s, "tilde_v_effective": tilde_v_effective},
    )


MODELS: dict[str, Callable[..., PotentialModel]] = {
    "free": free,
    "harmonic": harmonic,
    "example1": example1,
    "gaussian_vector": gaussian_vector,
    "example3": example3,
}


def make_model(name: str, require_divergence_free: bool = False, **params) -> PotentialModel:
    """Instantiate a catalogue model by name.

    ``require_divergence_free`` enforces a sampled ``div A = 0`` check; without it,
    the convection term ``A . grad psi`` is taken as given (no extra ``div A`` term).
    """
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown potential model {name!r}; known: {sorted(MODELS)}") from None
    model = factory(**params)
    if require_divergence_free:
        rng = np.random.default_rng(0)
        check_divergence_free(model, rng.uniform(-np.pi, np.pi, size=(64, model.dim)))
    return model
