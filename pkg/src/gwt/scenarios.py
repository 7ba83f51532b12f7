"""Ready-made experiment configurations for the benchmark problems.

``example1``   V = 1 + cos x, A = sin x, Gaussian packet at pi/4
``example2``   same potentials, non-Gaussian profile i(y^2 + y^4) + cos y - 1
``example3``   2D, A = (sin y, sin x), effective potential cos x + cos y
``growth``     V = 2 x^2, A = exp(-2 x^2), long-time error growth
``spatial``    eta-mesh refinement against a fine GWT self-run
``trajectory`` 2D, zero scalar potential, position expectation vs classical path
"""

from __future__ import annotations

import math

from .config import (
    ExperimentConfig,
    GridSpec,
    InitialSpec,
    ModelSpec,
    OutputSpec,
    ReferenceSpec,
    SchemeSpec,
    SpaceStudySpec,
)

PI = math.pi
TIME_STEPS = (1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
# dx = 2 pi eps / 32 on [-pi, pi) gives N = 32 / eps
DX_OVER_EPS = 2 * PI / 32
X_1D = (((-PI, PI),))


def example1(eps=(1 / 256,), scheme: str = "SL-TS3", dts=TIME_STEPS) -> ExperimentConfig:
    return ExperimentConfig(
        name=f"example1-{scheme.lower()}",
        eps=tuple(eps),
        T=0.5,
        model=ModelSpec("example1"),
        initial=InitialSpec("gaussian", (PI / 4,), (-0.5,), 0.0, 1.0, 0j, True),
        eta=GridSpec(((-2 * PI, 2 * PI),), (1024,)),
        x=GridSpec(X_1D, None, DX_OVER_EPS),
        scheme=SchemeSpec(name=scheme, dt=tuple(dts)),
        reference=ReferenceSpec(1 / 32),
    )


def example2(eps=(1 / 256,), scheme: str = "SL-TS3", dts=TIME_STEPS) -> ExperimentConfig:
    return ExperimentConfig(
        name=f"example2-{scheme.lower()}",
        eps=tuple(eps),
        T=0.5,
        model=ModelSpec("example1"),
        initial=InitialSpec("general", (PI / 4,), (0.0,), -0.5, 1.0, 1 + 0j, True, "example2"),
        eta=GridSpec(((-2 * PI, 2 * PI),), (1024,)),
        x=GridSpec(X_1D, None, DX_OVER_EPS),
        scheme=SchemeSpec(name=scheme, dt=tuple(dts)),
        reference=ReferenceSpec(1 / 32),
    )


def example3(eps=(1 / 16,), eta_N: int = 256, dts=TIME_STEPS[:4], T: float = 0.5) -> ExperimentConfig:
    """Reference mesh ``dx = pi eps / 16``, ``dt = eps / 16`` on ``[-pi, pi)^2``."""
    return ExperimentConfig(
        name="example3",
        eps=tuple(eps),
        T=T,
        model=ModelSpec("example3"),
        initial=InitialSpec("gaussian", (0.5, 0.0), (-2.0, 0.0), 0.0, 1.0, 0j, True),
        eta=GridSpec(((-8.0, 8.0), (-8.0, 8.0)), (eta_N, eta_N)),
        x=GridSpec(((-PI, PI), (-PI, PI)), None, PI / 16),
        scheme=SchemeSpec(name="SL-TS3", dt=tuple(dts)),
        reference=ReferenceSpec(1 / 16),
    )


def growth(eps=(1 / 64, 1 / 256, 1 / 1024), T: float = 2.0, reference_dt_over_eps: float = 1 / 64) -> ExperimentConfig:
    """eta box ``[-16, 16)`` with 652 points (``d eta = 0.04908``, the nearest even count to pi/64)."""
    return ExperimentConfig(
        name="growth",
        eps=tuple(eps),
        T=T,
        model=ModelSpec("gaussian_vector", {"v_coef": 2.0, "a_width": 2.0}),
        initial=InitialSpec("gaussian", (0.0,), (0.0,), 0.0, 1.0, 0j, True),
        eta=GridSpec(((-16.0, 16.0),), (652,)),
        x=GridSpec(X_1D, None, DX_OVER_EPS),
        scheme=SchemeSpec(name="SL-TS3", dt=(1 / 100,)),
        reference=ReferenceSpec(reference_dt_over_eps),
    )


def spatial(eps=(1 / 1024,), counts=(4, 8, 16, 32, 64)) -> ExperimentConfig:
    """``d eta = pi/1 ... pi/16`` on ``[-2 pi, 2 pi)`` against ``d eta = 2 pi / 4096``."""
    base = example1(eps)
    return ExperimentConfig(
        name="spatial",
        eps=tuple(eps),
        T=0.5,
        model=base.model,
        initial=base.initial,
        eta=base.eta,
        x=base.x,
        scheme=SchemeSpec(name="SL-TS3", dt=(1 / 2048,)),
        space=SpaceStudySpec(tuple(counts), 8192, 1 / 2048),
    )


def trajectory(eps=(1 / 8, 1 / 16, 1 / 32), T: float = 2.0, dt: float = 1 / 64) -> ExperimentConfig:
    return ExperimentConfig(
        name="trajectory",
        eps=tuple(eps),
        T=T,
        model=ModelSpec("example3", {"scalar_amplitude": 0.0}),
        initial=InitialSpec("gaussian", (0.4, 0.3), (0.0, 0.0), 0.0, 1.0, 0j, True),
        eta=GridSpec(((-8.0, 8.0), (-8.0, 8.0)), (128, 128)),
        scheme=SchemeSpec(name="SL-TS3", dt=(dt,)),
        outputs=OutputSpec(reports=("observables",), observe_every=4),
    )


SCENARIOS = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "growth": growth,
    "spatial": spatial,
    "trajectory": trajectory,
}
