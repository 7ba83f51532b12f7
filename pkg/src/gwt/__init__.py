"""Gaussian wave packet transform solvers for the semiclassical Schrodinger
equation with scalar and vector potentials."""

__version__ = "0.1.0"

from .grid import GridField, UniformGrid, discrete_l2_norm, make_grid, spectral_eval_at
from .packet import PacketInvariantError, PacketState, PacketTrajectory, initial_state, integrate_packet
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
from .reference import PsiState, ReferenceSolver, run_reference
from .wsolver import SchemeConfig, WState, advance, evolve

__all__ = [
    "GaussianInitialData",
    "GeneralInitialData",
    "GridField",
    "PacketInvariantError",
    "PacketState",
    "PacketTrajectory",
    "PotentialModel",
    "PsiState",
    "ReferenceSolver",
    "SchemeConfig",
    "UniformGrid",
    "WState",
    "advance",
    "discrete_l2_norm",
    "evolve",
    "init_from_gaussian",
    "init_from_general",
    "initial_state",
    "integrate_packet",
    "l2_error",
    "make_grid",
    "make_model",
    "normalized_gaussian",
    "position_expectation",
    "reconstruct_psi",
    "run_reference",
    "spectral_eval_at",
]
