import dataclasses

import numpy as np
import pytest
from scipy.integrate import quad

from gwt import experiments as ex
from gwt import scenarios
from gwt.config import GridSpec
from gwt.grid import GridField, discrete_l2_norm, make_grid
from gwt.packet import PacketInvariantError, integrate_packet
from gwt.potentials import example1
from gwt.reconstruct import (
    GaussianInitialData,
    GeneralInitialData,
    assemble_3d,
    hermite_function,
    init_from_gaussian,
    init_from_general,
    l2_error,
    normalized_gaussian,
    oscillator_energy,
    outside_fraction,
    position_expectation,
    reconstruct_psi,
    resample,
)
from gwt.wsolver import SchemeConfig, WState, evolve

EPS = 1 / 256
ETA_1D = make_grid([(-2 * np.pi, 2 * np.pi)], 256)


def example1_data(eps=EPS):
    return normalized_gaussian([np.pi / 4], [-0.5], 1j, 0.0, eps)


class TestInitialData:
    def test_gaussian_w0_is_parameter_free(self):
        grid = make_grid([(-2 * np.pi, 2 * np.pi)], 8)
        for data in (example1_data(), GaussianInitialData([0.3], [2.0], 0.1 + 3j, 0.5 - 0.2j)):
            _, w0 = init_from_gaussian(data, grid, EPS)
            assert w0.values[4] == 1.0
            assert w0.values[0] == pytest.approx(np.exp(-4 * np.pi**2), rel=1e-14)

    def test_example1_state(self):
        state, w0 = init_from_gaussian(example1_data(), ETA_1D, EPS)
        np.testing.assert_allclose(state.B, [[1.0]])
        np.testing.assert_allclose(state.q, [np.pi / 4])
        np.testing.assert_allclose(state.p, [-0.5])
        assert w0.t == 0.0 and w0.eps == EPS

    def test_example3_state(self):
        grid = make_grid([(-8.0, 8.0)] * 2, 16)
        state, _ = init_from_gaussian(GaussianInitialData([0.5, 0.0], [-2.0, 0.0], 1j), grid, 1 / 16)
        np.testing.assert_allclose(state.B, np.eye(2), atol=1e-15)

    def test_normalized_gaussian_has_unit_mass(self):
        data = example1_data()
        mass = quad(lambda x: abs(data.psi(np.array([x]), EPS)) ** 2, np.pi / 4 - 2, np.pi / 4 + 2, points=[np.pi / 4])[0]
        assert mass == pytest.approx(1.0, rel=1e-10)

    @pytest.mark.parametrize("C", [-1j, [[1j, 0], [0, -1j]], [[1j, 0.1], [0.2, 1j]]])
    def test_gaussian_rejects_bad_C(self, C):
        x0 = [0.0] if np.ndim(C) == 0 else [0.0, 0.0]
        with pytest.raises((PacketInvariantError, ValueError)):
            GaussianInitialData(x0, x0, C)

    def test_general_reduces_to_gaussian(self):
        C = np.array([[0.3 + 1.2j, 0.1 + 0.2j], [0.1 + 0.2j, -0.4 + 0.8j]])
        grid = make_grid([(-6.0, 6.0)] * 2, 32)
        data = GeneralInitialData(
            lambda xi: np.ones(xi.shape[:-1], complex),
            lambda xi: np.einsum("...k,kl,...l->...", xi, C, xi),
            [0.2, -0.1], [1.0, 0.5],
        )
        np.testing.assert_allclose(data.C, C, atol=1e-8)
        _, w_gen = init_from_general(data, grid, 1 / 64)
        _, w_gau = init_from_gaussian(GaussianInitialData([0.2, -0.1], [1.0, 0.5], C), grid, 1 / 64)
        np.testing.assert_allclose(w_gen.values, w_gau.values, atol=1e-12)

    def test_example2_initial_w(self):
        data = ex.example2_data(EPS)
        # C = hess g(0) / 2 = (2i - 1)/2
        np.testing.assert_allclose(data.C, [[-0.5 + 1j]], atol=1e-14)
        state, w0 = init_from_general(data, ETA_1D, EPS)
        a = data.f(np.zeros((1, 1)))[0]
        centre = 128
        assert w0.values[centre] == pytest.approx(a, rel=1e-14)
        mod = np.abs(w0.values[centre:centre + 40])
        assert np.all(np.diff(mod) < 0)

    def test_example2_hessian_from_differences(self):
        data = ex.example2_data(EPS)
        derived = GeneralInitialData(data.f, data.g, data.q0, data.p0, data.delta)
        np.testing.assert_allclose(derived.C, data.C, atol=1e-9)

    def test_general_matches_ansatz_division(self):
        data = ex.example2_data(EPS)
        state, w0 = init_from_general(data, ETA_1D, EPS)
        xi = np.sqrt(EPS) * ETA_1D.nodes / state.B[0, 0]
        x = data.q0 + xi
        carrier = np.exp(1j * (data.C.real[0, 0] * xi[:, 0] ** 2 + data.p0[0] * xi[:, 0] + data.delta) / EPS)
        direct = data.psi(x, EPS) / carrier
        np.testing.assert_allclose(w0.values, direct, rtol=1e-13, atol=1e-300)

    def test_general_rejects_nonconvex_imaginary_phase(self):
        data = GeneralInitialData(
            lambda xi: np.ones(xi.shape[:-1], complex),
            lambda xi: 1j * (xi[..., 0] ** 2 - xi[..., 0] ** 4),
            [0.0], [0.0], C=[[1j]],
        )
        with pytest.raises(ValueError, match="convex"):
            init_from_general(data, make_grid([(-40.0, 40.0)], 64), EPS)

    def test_general_requires_positive_eps(self):
        with pytest.raises(ValueError):
            init_from_general(ex.example2_data(EPS), ETA_1D, 0.0)


class TestReconstruction:
    def test_round_trip_at_t0(self):
        data = example1_data()
        state, w0 = init_from_gaussian(data, ETA_1D, EPS)
        x = make_grid([(-np.pi, np.pi)], 2048)
        psi = reconstruct_psi(w0, state, x, EPS)
        exact = data.psi(x.nodes, EPS)
        assert np.abs(psi.values - exact).max() < 1e-12 * np.abs(exact).max()

    def test_round_trip_2d(self):
        eps = 1 / 16
        data = normalized_gaussian([0.5, 0.0], [-2.0, 0.0], [[1j, 0.2], [0.2, 2j]], 0.0, eps)
        state, w0 = init_from_gaussian(data, make_grid([(-8.0, 8.0)] * 2, 64), eps)
        x = make_grid([(-np.pi, np.pi)] * 2, 128)
        psi = reconstruct_psi(w0, state, x, eps)
        exact = data.psi(x.nodes, eps)
        assert np.abs(psi.values - exact).max() < 1e-12 * np.abs(exact).max()

    def test_wrap_and_zero_agree_inside_the_eta_cell(self):
        state, w0 = init_from_gaussian(example1_data(), ETA_1D, EPS)
        # |x - q| < 0.3 maps to |eta| < 4.8, inside [-2 pi, 2 pi)
        x = make_grid([(np.pi / 4 - 0.3, np.pi / 4 + 0.3)], 128)
        a = reconstruct_psi(w0, state, x, EPS)
        b = reconstruct_psi(w0, state, x, EPS, outside="wrap")
        assert np.abs(a.values - b.values).max() < 1e-12

    def test_wrap_aliases_outside_the_eta_cell(self):
        data = example1_data()
        state, w0 = init_from_gaussian(data, ETA_1D, EPS)
        x = make_grid([(-np.pi, np.pi)], 512)
        exact = data.psi(x.nodes, EPS)
        wrapped = reconstruct_psi(w0, state, x, EPS, outside="wrap")
        zeroed = reconstruct_psi(w0, state, x, EPS)
        assert np.abs(wrapped.values - exact).max() > 0.1 * np.abs(exact).max()
        assert np.abs(zeroed.values - exact).max() < 1e-12 * np.abs(exact).max()

    def test_outside_fraction(self):
        state, w0 = init_from_gaussian(example1_data(), ETA_1D, EPS)
        # B = 1, so the eta cell [-2 pi, 2 pi) covers |x - q| < pi / 8, an eighth of the x cell
        x = make_grid([(-np.pi, np.pi)], 512)
        assert outside_fraction(w0, state, x, EPS) == pytest.approx(7 / 8, abs=2 / 512)
        near = make_grid([(np.pi / 4 - 0.3, np.pi / 4 + 0.3)], 128)
        assert outside_fraction(w0, state, near, EPS) == 0.0

    def test_unknown_outside_mode_rejected(self):
        state, w0 = init_from_gaussian(example1_data(), ETA_1D, EPS)
        with pytest.raises(ValueError, match="outside"):
            reconstruct_psi(w0, state, make_grid([(-np.pi, np.pi)], 64), EPS, outside="clip")

    def test_time_mismatch_rejected(self):
        state, w0 = init_from_gaussian(example1_data(), ETA_1D, EPS)
        with pytest.raises(ValueError):
            reconstruct_psi(WState(w0.field, 0.5, EPS), state, make_grid([(-np.pi, np.pi)], 64), EPS)


@pytest.fixture(scope="module")
def evolved():
    """Example 1 evolved to t = 0.25 at eps = 1/64, with the reconstructed psi on a fine grid."""
    eps = 1 / 64
    data = example1_data(eps)
    state0, w0 = init_from_gaussian(data, ETA_1D, eps)
    traj = integrate_packet(state0, example1(), eps, 0.25, 1e-3)
    w, _ = evolve(w0, traj, SchemeConfig(dt=1 / 32), 0.25)
    x = make_grid([(-np.pi, np.pi)], 4096)
    state = traj.final
    return eps, w, state, reconstruct_psi(w, state, x, eps)


class TestObservables:
    def test_even_w_gives_packet_centre(self):
        state, w0 = init_from_gaussian(example1_data(), ETA_1D, EPS)
        obs = position_expectation(w0, state, EPS)
        np.testing.assert_allclose(obs.mean, state.q, atol=1e-15)
        assert obs.mass == pytest.approx(1.0, rel=1e-12)

    def test_normalized_mean_matches_quadrature(self, evolved):
        eps, w, state, psi = evolved
        dens = np.abs(psi.values) ** 2
        direct = np.sum(psi.grid.nodes[:, 0] * dens) / dens.sum()
        obs = position_expectation(w, state, eps)
        assert obs.mean_normalized[0] == pytest.approx(direct, rel=1e-8)

    def test_mass_matches_reconstructed_norm(self, evolved):
        eps, w, state, psi = evolved
        obs = position_expectation(w, state, eps)
        assert obs.mass == pytest.approx(discrete_l2_norm(psi) ** 2, rel=1e-8)

    def test_mean_approaches_classical_path(self):
        cfg = scenarios.trajectory(T=1.0)
        gaps = []
        for eps in cfg.eps:
            rows, _ = ex.observable_series(cfg, eps, cfg.scheme.dt[0])
            gaps.append(max(np.linalg.norm(np.subtract(r.mean, r.q)) for r in rows))
        assert gaps[0] > gaps[1] > gaps[2]


class TestErrors:
    def test_identical_fields(self):
        f = GridField(ETA_1D, np.exp(-ETA_1D.nodes[:, 0] ** 2) + 0j)
        assert l2_error(f, f) == (0.0, 0.0)

    def test_constant_offset(self):
        grid = make_grid([(-1.0, 2.0), (0.0, 1.0)], (16, 8))
        rng = np.random.default_rng(0)
        ref = GridField(grid, rng.standard_normal(grid.shape) + 0j)
        c = 0.3 - 0.4j
        abs_err, rel_err = l2_error(GridField(grid, ref.values + c), ref)
        assert abs_err == pytest.approx(abs(c) * np.sqrt(3.0), rel=1e-12)
        assert rel_err == pytest.approx(abs_err / discrete_l2_norm(ref))

    def test_coarse_field_is_resampled(self):
        coarse = make_grid([(0.0, 2 * np.pi)], 16)
        fine = make_grid([(0.0, 2 * np.pi)], 64)
        fn = lambda x: np.exp(2j * x) + np.cos(3 * x)
        abs_err, _ = l2_error(GridField(coarse, fn(coarse.axis_nodes(0))), GridField(fine, fn(fine.axis_nodes(0))))
        assert abs_err < 1e-13

    def test_resample_is_non_expansive(self):
        coarse = make_grid([(0.0, 1.0)], 32)
        rng = np.random.default_rng(2)
        f = GridField(coarse, rng.standard_normal(32) + 1j * rng.standard_normal(32))
        g = resample(f, make_grid([(0.0, 1.0)], 128))
        assert discrete_l2_norm(g) <= discrete_l2_norm(f) * (1 + 1e-12)

    def test_incompatible_grids(self):
        a = GridField(make_grid([(0.0, 1.0)], 32), np.zeros(32, complex))
        with pytest.raises(ValueError):
            l2_error(a, GridField(make_grid([(0.0, 2.0)], 64), np.zeros(64, complex)))
        with pytest.raises(ValueError):
            l2_error(a, GridField(make_grid([(0.0, 1.0)], 16), np.zeros(16, complex)))


class TestAssembly3D:
    @pytest.mark.parametrize("k", range(11))
    def test_hermite_unit_norm(self, k):
        eps = 1 / 64
        val = quad(lambda z: hermite_function(k, z, eps) ** 2, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_hermite_orthogonal_eigenfunctions(self):
        eps = 1 / 32
        z = np.linspace(-3, 3, 6001)
        h = z[1] - z[0]
        phis = np.array([hermite_function(k, z, eps) for k in range(6)])
        np.testing.assert_allclose(h * phis @ phis.T, np.eye(6), atol=1e-10)
        # H_z phi_k = E_k phi_k checked away from the truncated tails
        k = 3
        phi = phis[k]
        d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / h**2
        lhs = -0.5 * eps**2 * d2 + 0.5 * z[1:-1] ** 2 * phi[1:-1]
        assert np.abs(lhs - oscillator_energy(k, eps) * phi[1:-1]).max() < 1e-4

    def test_ground_state_closed_form(self):
        eps = 0.1
        z = np.linspace(-2, 2, 9)
        np.testing.assert_allclose(hermite_function(0, z, eps), (np.pi * eps) ** -0.25 * np.exp(-z * z / (2 * eps)))

    def test_energies(self):
        assert oscillator_energy(0, 0.2) == pytest.approx(0.1)
        assert oscillator_energy(1, 0.2) == pytest.approx(0.3)

    def test_assemble_modulus(self):
        eps = 1 / 16
        grid = make_grid([(-1.0, 1.0)] * 2, 8)
        rng = np.random.default_rng(0)
        u = GridField(grid, rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
        z = make_grid([(-2.0, 2.0)], 16)
        psi = assemble_3d(u, 2, eps, 0.7, z)
        assert psi.shape == (8, 8, 16)
        expected = np.abs(u.values)[..., None] * np.abs(hermite_function(2, z.axis_nodes(0), eps))
        np.testing.assert_allclose(np.abs(psi), expected, rtol=1e-14)

    @pytest.mark.parametrize("k", [-1, 11])
    def test_mode_range(self, k):
        with pytest.raises(ValueError):
            hermite_function(k, np.zeros(3), 0.1)

    def test_rejects_wrong_dimension(self):
        u = GridField(make_grid([(0.0, 1.0)], 8), np.zeros(8, complex))
        with pytest.raises(ValueError):
            assemble_3d(u, 0, 0.1, 0.0, np.zeros(4))


@pytest.mark.slow
def test_example1_small_eps_reconstruction():
    """eps = 1/1024, dt = 1/2048, d eta = pi/16, psi on dx = pi/8192 against the direct solver."""
    cfg = scenarios.example1(eps=(1 / 1024,), dts=(1 / 2048,))
    cfg = dataclasses.replace(cfg, eta=GridSpec(cfg.eta.bounds, (64,)), x=GridSpec(cfg.x.bounds, None, np.pi / 8))
    eps = cfg.eps[0]
    grid = ex.x_grid(cfg, eps)
    assert grid.shape == (16384,)
    ref = ex.reference_psi(cfg, eps)
    res = ex.run_gwt(cfg, eps, 1 / 2048)
    abs_err, _ = l2_error(res.psi(grid), ref.field)
    assert abs_err < 1e-6
