"""Pipelines tying the solvers together: GWT runs, reference runs, error studies.

Reference solutions are expensive at small ``eps`` and are cached as snapshot
files keyed by a hash of everything that determines them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from . import __version__
from .config import ExperimentConfig, GridSpec
from .grid import GridField, UniformGrid, make_grid
from .io import observed_orders, read_snapshot, write_snapshot
from .packet import PacketTrajectory, integrate_packet
from .potentials import PotentialModel, make_model
from .reconstruct import (
    GaussianInitialData,
    GeneralInitialData,
    init_from_gaussian,
    init_from_general,
    l2_error,
    normalized_gaussian,
    position_expectation,
    reconstruct_psi,
)
from .reference import PsiState, run_reference
from .wsolver import SchemeConfig, StepDiagnostics, WState, evolve

log = logging.getLogger(__name__)

CACHE_ENV = "GWT_CACHE_DIR"
# dx above this multiple of eps cannot carry O(1) momenta without aliasing
RESOLUTION_LIMIT = math.pi


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV, ".gwt_cache"))


# --- builders -----------------------------------------------------------------------


def build_model(cfg: ExperimentConfig) -> PotentialModel:
    m = cfg.model
    model = make_model(m.name, m.require_divergence_free, **m.params)
    if model.dim != cfg.dim:
        raise ValueError(f"model {m.name!r} is {model.dim}D but the eta grid is {cfg.dim}D")
    return model


def _as_matrix(value, d: int) -> np.ndarray:
    if isinstance(value, tuple):
        return np.asarray(value, float)
    return float(value) * np.eye(d)


def example2_data(eps: float, q0: float = math.pi / 4, p0: float = 0.0, delta: complex = 1.0) -> GeneralInitialData:
    """``f = a``, ``g = i (y^2 + y^4) + cos y - 1`` with ``a`` normalizing ``psi0`` by quadrature."""
    mass = quad(lambda y: np.exp(-2 * (y * y + y**4) / eps), -np.inf, np.inf, epsabs=0, epsrel=1e-13)[0]
    a = mass**-0.5

    def f(xi):
        return np.full(np.shape(xi)[:-1], a, dtype=complex)

    def g(xi):
        y = xi[..., 0]
        return 1j * (y * y + y**4) + np.cos(y) - 1

    return GeneralInitialData(f, g, [q0], [p0], delta, C=np.array([[-0.5 + 1j]]))


def _gaussian_general(C: np.ndarray, x0, p0, delta, eps: float, normalize: bool) -> GeneralInitialData:
    d = C.shape[0]
    amp = (np.linalg.det(2 * C.imag) / (np.pi * eps) ** d) ** 0.25 if normalize else 1.0

    def f(xi):
        return np.full(np.shape(xi)[:-1], amp, dtype=complex)

    def g(xi):
        return np.einsum("...k,kl,...l->...", xi, C, xi)

    return GeneralInitialData(f, g, x0, p0, delta, C=C)


def build_initial(cfg: ExperimentConfig, eps: float):
    ini = cfg.initial
    d = cfg.dim
    C = _as_matrix(ini.C_re, d) + 1j * _as_matrix(ini.C_im, d)
    if ini.kind == "gaussian":
        if ini.normalize:
            return normalized_gaussian(ini.x0, ini.p0, C, ini.gamma0, eps)
        return GaussianInitialData(ini.x0, ini.p0, C, ini.gamma0)
    if ini.builtin == "example2":
        if d != 1:
            raise ValueError("the example2 profile is one dimensional")
        return example2_data(eps, ini.x0[0], ini.p0[0], ini.gamma0)
    return _gaussian_general(C, ini.x0, ini.p0, ini.gamma0, eps, ini.normalize)


def _even_round(x: float) -> int:
    n = int(round(x))
    return max(4, n + (n % 2))


def grid_from_spec(spec: GridSpec, eps: float | None = None, counts=None) -> UniformGrid:
    if counts is None:
        if spec.N is not None:
            counts = spec.N
        else:
            if eps is None:
                raise ValueError("dx_over_eps needs eps")
            counts = tuple(_even_round((b - a) / (spec.dx_over_eps * eps)) for a, b in spec.bounds)
    if isinstance(counts, int):
        counts = (counts,) * len(spec.bounds)
    return make_grid(spec.bounds, counts)


def eta_grid(cfg: ExperimentConfig, counts=None) -> UniformGrid:
    return grid_from_spec(cfg.eta, counts=counts)


def x_grid(cfg: ExperimentConfig, eps: float) -> UniformGrid:
    if cfg.x is None:
        raise ValueError(f"config {cfg.name!r} has no [x] grid")
    return grid_from_spec(cfg.x, eps)


def check_resolution(grid: UniformGrid, eps: float) -> bool:
    """Warn (and return False) when ``dx`` is too coarse for an ``eps``-oscillatory wave."""
    dx = float(np.max(grid.spacing))
    if dx > RESOLUTION_LIMIT * eps:
        log.warning("dx = %.3g is %.1f eps; wave functions with O(1) momenta are under-resolved "
                    "(dx = O(eps) is needed)", dx, dx / eps)
        return False
    return True


def scheme_config(cfg: ExperimentConfig, dt: float) -> SchemeConfig:
    s = cfg.scheme
    return SchemeConfig(
        scheme=s.name,
        composition=s.composition,
        dt=dt,
        quadrature=s.quadrature,
        tracer=s.tracer,
        ordering=s.ordering,
        half_quadratic=s.half_quadratic,
    )


# --- GWT pipeline -------------------------------------------------------------------


@dataclass
class GwtResult:
    w: WState
    traj: PacketTrajectory
    diagnostics: list[StepDiagnostics]
    eps: float
    dt: float
    data: object

    @property
    def final_state(self):
        return self.traj.final

    def psi(self, grid: UniformGrid) -> GridField:
        return reconstruct_psi(self.w, self.traj.sample(self.w.t), grid, self.eps)


def initialize(cfg: ExperimentConfig, eps: float, counts=None):
    data = build_initial(cfg, eps)
    grid = eta_grid(cfg, counts)
    if isinstance(data, GaussianInitialData):
        state0, w0 = init_from_gaussian(data, grid, eps)
    else:
        state0, w0 = init_from_general(data, grid, eps)
    return data, state0, w0


def run_gwt(
    cfg: ExperimentConfig,
    eps: float,
    dt: float,
    *,
    counts=None,
    T: float | None = None,
    traj: PacketTrajectory | None = None,
    on_step=None,
) -> GwtResult:
    """Integrate the packet with ``dt / packet_ratio`` and evolve ``w`` to ``T``."""
    T = cfg.T if T is None else T
    model = build_model(cfg)
    data, state0, w0 = initialize(cfg, eps, counts)
    if traj is None:
        traj = integrate_packet(state0, model, eps, T, dt / cfg.scheme.packet_ratio)
    w, diags = evolve(w0, traj, scheme_config(cfg, dt), T, on_step=on_step)
    return GwtResult(w, traj, diags, eps, dt, data)


# --- reference pipeline -------------------------------------------------------------


def reference_key(cfg: ExperimentConfig, eps: float, T: float, dt: float) -> str:
    grid = x_grid(cfg, eps)
    payload = {
        "version": __version__,
        "model": asdict(cfg.model),
        "initial": {k: (repr(v) if isinstance(v, complex) else v) for k, v in asdict(cfg.initial).items()},
        "grid": [list(grid.lower), list(grid.upper), list(grid.counts)],
        "eps": repr(float(eps)),
        "T": repr(float(T)),
        "dt": repr(float(dt)),
    }
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:20]


def initial_psi(cfg: ExperimentConfig, eps: float) -> PsiState:
    grid = x_grid(cfg, eps)
    data = build_initial(cfg, eps)
    return PsiState(GridField(grid, data.psi(grid.nodes, eps)), 0.0, eps)


def reference_psi(
    cfg: ExperimentConfig,
    eps: float,
    *,
    T: float | None = None,
    dt: float | None = None,
    cache_dir: str | Path | None | bool = None,
) -> PsiState:
    """Direct-solver wave function at ``T``, read from / written to the cache when enabled.

    ``cache_dir=False`` disables caching; ``None`` uses :func:`default_cache_dir`.
    """
    T = cfg.T if T is None else T
    dt = cfg.reference.dt_over_eps * eps if dt is None else dt
    path = None
    if cache_dir is not False:
        root = default_cache_dir() if cache_dir is None else Path(cache_dir)
        path = root / f"ref-{reference_key(cfg, eps, T, dt)}.snap"
        if path.exists():
            snap = read_snapshot(path)
            return PsiState(snap.field, snap.t, snap.eps)
    return reference_series(cfg, eps, [T], dt=dt, cache_dir=cache_dir)[0]


def reference_series(
    cfg: ExperimentConfig,
    eps: float,
    times,
    *,
    dt: float | None = None,
    cache_dir: str | Path | None | bool = None,
) -> list[PsiState]:
    """Reference states at several times from one sweep, resuming from the latest cached time.

    Times should be multiples of ``dt`` so that resuming matches a run from zero step for step.
    """
    dt = cfg.reference.dt_over_eps * eps if dt is None else dt
    times = sorted(float(t) for t in times)
    root = None if cache_dir is False else (default_cache_dir() if cache_dir is None else Path(cache_dir))

    def cache_path(T):
        return None if root is None else root / f"ref-{reference_key(cfg, eps, T, dt)}.snap"

    found: dict[float, PsiState] = {}
    for T in times:
        path = cache_path(T)
        if path is not None and path.exists():
            snap = read_snapshot(path)
            found[T] = PsiState(snap.field, snap.t, snap.eps)
    state = None
    model = None
    for T in times:
        if T in found:
            state = found[T]
            continue
        if state is None:
            state = initial_psi(cfg, eps)
            check_resolution(state.grid, eps)
        model = model or build_model(cfg)
        log.info("reference run: eps=%g, N=%s, dt=%g, t=%g -> %g", eps, state.grid.shape, dt, state.t, T)
        state = run_reference(state, model, T, dt)
        found[T] = state
        path = cache_path(T)
        if path is not None:
            write_snapshot(path, state.field, eps, state.t, {"kind": "reference", "model": cfg.model.name, "dt": dt})
    return [found[T] for T in times]


# --- studies ------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorRow:
    eps: float
    dt: float
    deta: float
    scheme: str
    abs_error: float
    rel_error: float
    observed_order: float | None = None

    def as_tuple(self) -> tuple:
        return (self.eps, self.dt, self.deta, self.scheme, self.abs_error, self.rel_error, self.observed_order)


def _with_orders(rows: list[ErrorRow], key: str) -> list[ErrorRow]:
    steps = [getattr(r, key) for r in rows]
    orders = observed_orders(steps, [r.abs_error for r in rows])
    return [ErrorRow(**{**asdict(r), "observed_order": o}) for r, o in zip(rows, orders)]


def _time_job(args) -> ErrorRow:
    cfg, eps, dt, ref_values = args
    res = run_gwt(cfg, eps, dt)
    grid = x_grid(cfg, eps)
    abs_err, rel_err = l2_error(res.psi(grid), GridField(grid, ref_values))
    deta = float(np.max(eta_grid(cfg).spacing))
    return ErrorRow(eps, dt, deta, cfg.scheme.name, abs_err, rel_err)


def time_convergence(
    cfg: ExperimentConfig, *, reference: PsiState | None = None, cache_dir=None, jobs: int = 1
) -> list[ErrorRow]:
    """One row per (eps, dt); ``reference`` overrides the direct-solver run for a single eps."""
    rows: list[ErrorRow] = []
    for eps in cfg.eps:
        if reference is not None:
            if len(cfg.eps) != 1 or not math.isclose(reference.eps, eps, rel_tol=1e-12):
                raise ValueError(f"reference snapshot has eps={reference.eps}, config asks for {eps}")
            if not math.isclose(reference.t, cfg.T, rel_tol=1e-12, abs_tol=1e-12):
                raise ValueError(f"reference snapshot is at t={reference.t}, config T={cfg.T}")
            if reference.grid != x_grid(cfg, eps):
                raise ValueError("reference snapshot grid differs from the configured x grid")
            ref = reference
        else:
            ref = reference_psi(cfg, eps, cache_dir=cache_dir)
        jobs_args = [(cfg, eps, dt, ref.values) for dt in cfg.scheme.dt]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                part = list(pool.map(_time_job, jobs_args))
        else:
            part = [_time_job(a) for a in jobs_args]
        rows.extend(_with_orders(part, "dt"))
    return rows


def space_convergence(cfg: ExperimentConfig) -> list[ErrorRow]:
    """Errors over eta point counts against a fine self-run, all at the study's ``dt``."""
    if cfg.space is None:
        raise ValueError(f"config {cfg.name!r} has no [space] section")
    sp = cfg.space
    rows: list[ErrorRow] = []
    for eps in cfg.eps:
        grid = x_grid(cfg, eps)
        fine = run_gwt(cfg, eps, sp.dt, counts=sp.reference_N)
        ref = fine.psi(grid)
        part = []
        for n in sp.N:
            res = run_gwt(cfg, eps, sp.dt, counts=n, traj=fine.traj)
            abs_err, rel_err = l2_error(res.psi(grid), ref)
            deta = float(np.max(res.w.grid.spacing))
            part.append(ErrorRow(eps, sp.dt, deta, cfg.scheme.name, abs_err, rel_err))
        rows.extend(_with_orders(part, "deta"))
    return rows


@dataclass(frozen=True)
class ObservableRow:
    t: float
    mean: tuple[float, ...]
    mass: float
    mean_raw: tuple[float, ...]
    q: tuple[float, ...]

    def as_tuple(self) -> tuple:
        return (self.t, *self.mean, self.mass, *self.mean_raw, *self.q)


def observable_series(cfg: ExperimentConfig, eps: float, dt: float, every: int | None = None):
    """``<x>`` (mass-normalized and literal), mass and packet centre along a GWT run."""
    every = cfg.outputs.observe_every if every is None else every
    model = build_model(cfg)
    _, state0, _ = initialize(cfg, eps)
    traj = integrate_packet(state0, model, eps, cfg.T, dt / cfg.scheme.packet_ratio)
    rows: list[ObservableRow] = []

    def observe(w: WState) -> ObservableRow:
        state = traj.sample(w.t)
        obs = position_expectation(w, state, eps)
        return ObservableRow(w.t, tuple(obs.mean_normalized), obs.mass, tuple(obs.mean), tuple(state.q))

    def record(w: WState):
        if len(rows) == 0 or (round(w.t / dt) % every == 0):
            rows.append(observe(w))

    res = run_gwt(cfg, eps, dt, traj=traj, on_step=record)
    if rows[-1].t != res.w.t:
        rows.append(observe(res.w))
    return rows, res
