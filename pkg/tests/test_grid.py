import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwt.grid import (
    GridField,
    ScatteredEvaluator,
    UniformGrid,
    discrete_l2_norm,
    eval_coefficients_at,
    make_grid,
    spectral_eval_at,
    spectral_eval_direct,
    transform_forward,
    transform_inverse,
)


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    return GridField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


class TestUniformGrid:
    def test_nodes_exclude_upper_bound(self):
        g = make_grid([(-2.0, 2.0)], 8)
        x = g.axis_nodes(0)
        assert x[0] == -2.0
        assert x[-1] == pytest.approx(2.0 - 0.5)
        assert g.spacing[0] == pytest.approx(0.5)

    def test_nodes_shape_2d(self):
        g = make_grid([(-1, 1), (0, 3)], (4, 6))
        assert g.nodes.shape == (4, 6, 2)
        assert g.cell_volume == pytest.approx(2.0 * 3.0)
        np.testing.assert_allclose(g.spacing, [0.5, 0.5])

    @pytest.mark.parametrize("n", [3, 5, 2, 0])
    def test_rejects_bad_counts(self, n):
        with pytest.raises(ValueError):
            make_grid([(0, 1)], n)

    def test_rejects_degenerate_interval(self):
        with pytest.raises(ValueError):
            make_grid([(1.0, 1.0)], 8)

    def test_rejects_dimension_four(self):
        with pytest.raises(ValueError):
            UniformGrid((0,) * 4, (1,) * 4, (4,) * 4)

    def test_wavenumbers_centred(self):
        g = make_grid([(-np.pi, np.pi)], 8)
        np.testing.assert_allclose(g.wavenumbers(0), np.arange(-4, 4))

    def test_wrap_and_contains(self):
        g = make_grid([(-1.0, 1.0)], 8)
        p = np.array([[1.5], [-1.0], [0.999], [1.0]])
        np.testing.assert_allclose(g.wrap(p)[:, 0], [-0.5, -1.0, 0.999, -1.0])
        assert g.contains(p).tolist() == [False, True, True, False]


class TestTransforms:
    @pytest.mark.parametrize("shape", [(8,), (16,), (8, 6), (4, 6, 8)])
    def test_round_trip(self, shape):
        g = make_grid([(-1.0, 2.0)] * len(shape), shape)
        f = random_field(g)
        back = transform_inverse(transform_forward(f), g)
        rel = np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values))
        assert rel < 1e-13

    def test_forward_convention_matches_direct_sum(self):
        # what_l = sum_j w_j exp(-i zeta_l (eta_j - a)), centred l
        g = make_grid([(-3.0, 1.0)], 8)
        f = random_field(g, 3)
        zeta = 2 * np.pi * np.arange(-4, 4) / 4.0
        direct = np.exp(-1j * np.outer(zeta, g.axis_nodes(0) + 3.0)) @ f.values
        np.testing.assert_allclose(transform_forward(f), direct, atol=1e-12)

    def test_single_mode(self):
        g = make_grid([(0.0, 2 * np.pi)], 8)
        f = GridField(g, np.exp(2j * g.axis_nodes(0)))
        c = transform_forward(f)
        expected = np.zeros(8, complex)
        expected[4 + 2] = 8
        np.testing.assert_allclose(c, expected, atol=1e-12)

    def test_discrete_norm_of_constant(self):
        g = make_grid([(-1.0, 1.0), (0.0, 4.0)], (8, 16))
        f = GridField(g, np.full(g.shape, 3.0 + 0j))
        assert discrete_l2_norm(f) == pytest.approx(3.0 * np.sqrt(2.0 * 4.0))


class TestSpectralEval:
    def test_reproduces_nodes(self):
        g = make_grid([(-2.0, 2.0)], 32)
        f = random_field(g, 1)
        np.testing.assert_allclose(spectral_eval_at(f, g.nodes), f.values, atol=1e-12)

    def test_trig_polynomial_exact_off_grid(self):
        g = make_grid([(0.0, 2 * np.pi)], 16)
        fn = lambda x: np.exp(3j * x) + 0.5 * np.cos(5 * x) - 0.25j * np.sin(x)
        f = GridField(g, fn(g.axis_nodes(0)))
        pts = np.linspace(-7, 9, 57)[:, None]
        np.testing.assert_allclose(spectral_eval_at(f, pts), fn(pts[:, 0]), atol=1e-12)

    def test_gaussian_interpolation_spectral(self):
        g = make_grid([(-8.0, 8.0), (-8.0, 8.0)], (64, 64))
        fn = lambda p: np.exp(-np.sum(p * p, axis=-1))
        f = GridField(g, fn(g.nodes).astype(complex))
        pts = np.random.default_rng(2).uniform(-3, 3, (200, 2))
        np.testing.assert_allclose(spectral_eval_at(f, pts), fn(pts), atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), dim=st.sampled_from([1, 2, 3]))
    def test_nufft_matches_direct_sum(self, seed, dim):
        shape = {1: (32,), 2: (12, 8), 3: (6, 4, 8)}[dim]
        g = make_grid([(-1.5, 2.5)] * dim, shape)
        f = random_field(g, seed)
        pts = np.random.default_rng(seed).uniform(-6, 6, (40, dim))
        fast = spectral_eval_at(f, pts)
        slow = spectral_eval_direct(f, pts)
        assert np.max(np.abs(fast - slow)) < 1e-11 * np.sum(np.abs(f.values))

    def test_shape_preserved(self):
        g = make_grid([(-1.0, 1.0)], 16)
        f = random_field(g)
        pts = np.zeros((3, 5, 1))
        assert spectral_eval_at(f, pts).shape == (3, 5)

    def test_coefficient_entry_point(self):
        g = make_grid([(-1.0, 1.0)], 16)
        f = random_field(g)
        pts = np.array([[0.1], [0.7]])
        np.testing.assert_allclose(eval_coefficients_at(transform_forward(f), g, pts), spectral_eval_at(f, pts))

    def test_scattered_evaluator_reuse(self):
        g = make_grid([(-1.0, 1.0), (-2.0, 2.0)], (8, 16))
        pts = np.random.default_rng(5).uniform(-3, 3, g.shape + (2,))
        ev = ScatteredEvaluator(g, pts)
        for seed in range(3):
            f = random_field(g, seed)
            np.testing.assert_allclose(ev(f.values), spectral_eval_at(f, pts), atol=1e-12)
            np.testing.assert_allclose(ev.from_native(np.fft.fftn(f.values)), ev(f.values), atol=1e-12)


class TestGridField:
    def test_shape_checked(self):
        g = make_grid([(0, 1)], 8)
        with pytest.raises(ValueError):
            GridField(g, np.zeros(6))

    def test_with_values(self):
        g = make_grid([(0, 1)], 8)
        f = GridField(g, np.zeros(8, complex))
        h = f.with_values(np.ones(8))
        assert h.grid is g
        np.testing.assert_array_equal(h.values, 1.0)
