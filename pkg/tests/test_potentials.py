import mpmath as mp
import numpy as np
import pytest

from gwt.potentials import (
    MODELS,
    check_divergence_free,
    divergence,
    eval_effective,
    example1,
    example3,
    free,
    gaussian_vector,
    harmonic,
    make_model,
    taylor_remainders,
)

BUILTINS = {
    "free1": lambda: free(1),
    "free2": lambda: free(2),
    "harmonic1": lambda: harmonic(1.0),
    "harmonic2": lambda: harmonic([[1.0, 0.2], [0.2, 2.0]], [[0.3, -0.4], [0.7, -0.3]]),
    "example1": example1,
    "gaussian_vector": gaussian_vector,
    "example3": example3,
    "example3_plain": lambda: example3(tilde_v_effective=False),
}


def fd_grad(f, x, h=1e-5):
    """Central differences of f along each coordinate, stacked on a new last axis."""
    d = x.shape[-1]
    cols = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


@pytest.fixture(params=sorted(BUILTINS))
def model(request):
    return BUILTINS[request.param]()


def sample_points(model, n=10, seed=0):
    return np.random.default_rng(seed).uniform(-2.0, 2.0, (n, model.dim))


class TestDerivatives:
    def test_grad_V(self, model):
        x = sample_points(model)
        np.testing.assert_allclose(model.grad_V(x), fd_grad(model.V, x), atol=1e-6)

    def test_hess_V_and_symmetry(self, model):
        x = sample_points(model)
        H = model.hess_V(x)
        np.testing.assert_allclose(H, fd_grad(model.grad_V, x), atol=1e-6)
        np.testing.assert_allclose(H, np.swapaxes(H, -1, -2), atol=1e-14)

    def test_jac_A(self, model):
        x = sample_points(model)
        # jac_A[..., j, k] = dA_j / dx_k
        np.testing.assert_allclose(model.jac_A(x), fd_grad(model.A, x), atol=1e-6)

    def test_hess_A_and_symmetry(self, model):
        x = sample_points(model)
        H = model.hess_A(x)
        np.testing.assert_allclose(H, fd_grad(model.jac_A, x), atol=1e-6)
        np.testing.assert_allclose(H, np.swapaxes(H, -1, -2), atol=1e-14)

    def test_effective_chain_rule(self, model):
        x = sample_points(model, seed=1)
        U, gU, hU = eval_effective(model, x)
        Uf = lambda y: eval_effective(model, y)[0]
        gUf = lambda y: eval_effective(model, y)[1]
        np.testing.assert_allclose(U, 0.5 * np.sum(model.A(x) ** 2, axis=-1) + model.V(x), atol=1e-15)
        np.testing.assert_allclose(gU, fd_grad(Uf, x), atol=1e-6)
        np.testing.assert_allclose(hU, fd_grad(gUf, x), atol=1e-6)


class TestEffectivePotential:
    def test_example1_at_origin(self):
        U, gU, hU = eval_effective(example1(), np.zeros(1))
        assert U == pytest.approx(2.0, abs=1e-15)
        assert np.abs(gU).max() < 1e-15
        # U = 1 + cos x + sin^2 x / 2 has U'' = -cos x + cos 2x = 0 at 0
        assert np.abs(hU).max() < 1e-15

    def test_zero_vector_potential_reduces_to_V(self):
        m = harmonic([[2.0]])
        x = np.array([[0.3], [-1.2]])
        U, gU, hU = eval_effective(m, x)
        np.testing.assert_allclose(U, m.V(x))
        np.testing.assert_allclose(gU, m.grad_V(x))
        np.testing.assert_allclose(hU, m.hess_V(x))

    def test_example3_at_origin(self):
        U, _, _ = eval_effective(example3(), np.zeros(2))
        assert U == pytest.approx(2.0, abs=1e-15)

    def test_example3_effective_is_tilde_v(self):
        x = np.random.default_rng(3).uniform(-3, 3, (20, 2))
        U, _, _ = eval_effective(example3(), x)
        np.testing.assert_allclose(U, np.cos(x[:, 0]) + np.cos(x[:, 1]), atol=1e-14)

    def test_example3_plain_adds_magnetic_energy(self):
        x = np.random.default_rng(3).uniform(-3, 3, (20, 2))
        U, _, _ = eval_effective(example3(tilde_v_effective=False), x)
        expected = np.cos(x[:, 0]) + np.cos(x[:, 1]) + 0.5 * (np.sin(x[:, 1]) ** 2 + np.sin(x[:, 0]) ** 2)
        np.testing.assert_allclose(U, expected, atol=1e-14)


class TestRemainders:
    def test_identity_and_zero_at_centre(self, model):
        q = sample_points(model, 1)[0]
        xi = sample_points(model, 7, seed=4) * 0.3
        r = taylor_remainders(model, q, xi)
        np.testing.assert_allclose(r.Ar, r.A1 - r.Aq, atol=1e-15)
        r0 = taylor_remainders(model, q, np.zeros(model.dim))
        for v in (r0.U_r, r0.A1, r0.Aq, r0.Ar):
            assert np.abs(v).max() < 1e-15

    def test_quadratic_linear_model_has_no_remainder(self):
        m = harmonic([[1.0, 0.5], [0.5, 3.0]], [[1.0, 2.0], [-1.0, -1.0]])
        xi = np.random.default_rng(0).uniform(-2, 2, (30, 2))
        r = taylor_remainders(m, np.array([0.4, -0.1]), xi)
        for v in (r.U_r, r.A1, r.Aq, r.Ar):
            assert np.abs(v).max() < 1e-13

    def test_example1_against_extended_precision(self):
        mp.mp.dps = 40
        q, xi = mp.pi / 4, mp.mpf("0.1")
        U = lambda x: 1 + mp.cos(x) + mp.sin(x) ** 2 / 2
        dU = mp.diff(U, q)
        d2U = mp.diff(U, q, 2)
        exact = U(q + xi) - U(q) - xi * dU - xi**2 * d2U / 2
        r = taylor_remainders(example1(), np.array([np.pi / 4]), np.array([0.1]))
        assert abs(float(r.U_r) - float(exact)) < 1e-14
        A1 = mp.sin(q + xi) - mp.sin(q) - mp.cos(q) * xi
        assert abs(float(r.A1[0]) - float(A1)) < 1e-15

    @pytest.mark.parametrize("name", ["example1", "gaussian_vector", "example3"])
    def test_scaling_exponents(self, name):
        m = BUILTINS[name]()
        q = np.full(m.dim, 0.37)
        direction = np.linspace(1.0, 0.6, m.dim)
        h = 1e-2
        big = taylor_remainders(m, q, h * direction)
        small = taylor_remainders(m, q, 0.5 * h * direction)
        ratio_U = big.U_r / small.U_r
        ratio_A1 = np.linalg.norm(big.A1) / np.linalg.norm(small.A1)
        ratio_Ar = np.linalg.norm(big.Ar) / np.linalg.norm(small.Ar)
        assert ratio_U == pytest.approx(8.0, rel=0.1)
        assert ratio_A1 == pytest.approx(4.0, rel=0.1)
        assert ratio_Ar == pytest.approx(8.0, rel=0.1)

    def test_full_quadratic_flag_doubles_Aq(self):
        m = example1()
        a = taylor_remainders(m, np.array([0.4]), np.array([0.2]))
        b = taylor_remainders(m, np.array([0.4]), np.array([0.2]), half_quadratic=False)
        np.testing.assert_allclose(b.Aq, 2 * a.Aq)


class TestDivergence:
    @pytest.mark.parametrize("name", ["free1", "free2", "harmonic1", "harmonic2", "example3"])
    def test_divergence_free_models(self, name):
        m = BUILTINS[name]()
        pts = np.random.default_rng(0).uniform(-np.pi, np.pi, (50, m.dim))
        assert check_divergence_free(m, pts) <= 1e-10
        assert m.divergence_free

    @pytest.mark.parametrize("name", ["example1", "gaussian_vector"])
    def test_one_dimensional_models_are_flagged(self, name):
        m = BUILTINS[name]()
        assert not m.divergence_free
        pts = np.linspace(-1, 1, 11)[:, None]
        assert np.abs(divergence(m, pts)).max() > 0.1
        with pytest.raises(ValueError, match="div A"):
            make_model(name, require_divergence_free=True)

    def test_harmonic_rejects_trace(self):
        with pytest.raises(ValueError):
            harmonic([[1.0]], [[1.0]])


class TestCatalogue:
    def test_make_model_by_name(self):
        for name in MODELS:
            assert make_model(name).name == name

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown potential model"):
            make_model("no-such-model")

    def test_parameters_forwarded(self):
        m = make_model("gaussian_vector", v_coef=3.0, a_width=1.0)
        x = np.array([[0.5]])
        np.testing.assert_allclose(m.V(x), [0.75])
        np.testing.assert_allclose(m.A(x)[:, 0], [np.exp(-0.25)])
