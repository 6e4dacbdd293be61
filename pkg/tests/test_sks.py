"""Stochastic Kuramoto-Sivashinsky stepping, Newton solve, and adjoints."""

import numpy as np
import pytest

from spdefilter import ModelState, SksModel, SksParams, u_initial
from spdefilter.models.sks import sks_step, spin_up_initial


def small_model(n_cells=8, **kw):
    kw.setdefault("dt", 0.01)
    return SksModel(SksParams(n_cells=n_cells, **kw))


class TestParams:
    def test_defaults(self):
        p = SksParams()
        assert (p.length, p.n_cells, p.alpha, p.beta, p.gamma) == \
            (4.0, 100, 0.03, 1.1, 1.0)
        assert (p.noise_amp, p.eta, p.n_obs) == (2.5, 5.0, 10)

    def test_validation(self):
        with pytest.raises(ValueError):
            SksParams(n_cells=3)
        with pytest.raises(ValueError):
            SksParams(eta=0.0)
        with pytest.raises(ValueError):
            SksParams(dt=-0.01)


class TestInitialProfile:
    def test_formula(self):
        for x in (0.0, 1.3, 2.0, 4.0):
            expected = (0.4 / (np.exp(x - 403.0 / 15.0)
                               + np.exp(-x + 403.0 / 15.0))
                        + 1.0 / (np.exp(x - 203.0 / 15.0)
                                 + np.exp(-x + 203.0 / 15.0)))
            assert u_initial(x) == pytest.approx(expected, rel=1e-15)

    def test_tiny_on_domain(self):
        # both bump centres sit far outside [0, 4], so the seed profile is
        # near zero there and the spin-up is driven by noise and instability
        x = np.linspace(0, 4, 50)
        vals = u_initial(x)
        assert np.all(vals > 0)
        assert vals.max() < 1e-4


class TestStep:
    def test_gamma_zero_is_linear_solve(self):
        # without convection the midpoint step is one linear system; solve
        # it densely here and compare
        model = small_model(gamma=0.0)
        p = model.params
        rng = np.random.default_rng(0)
        u = rng.normal(size=model.n_dof) * 0.1
        xi = rng.normal(size=model.n_noise) * np.sqrt(p.dt)

        ops = p.alpha * model.cip - p.beta * model.stiffness
        lhs = model.mass + 0.5 * p.dt * ops
        rhs = (model.mass - 0.5 * p.dt * ops) @ u \
            + p.noise_amp * (model.noise_proj @ xi)
        expected = np.linalg.solve(lhs, rhs)
        got = model.step(u, xi)
        np.testing.assert_allclose(got, expected, atol=1e-10)

    def test_zero_state_zero_noise_fixed_point(self):
        model = small_model()
        out = model.step(np.zeros(model.n_dof), np.zeros(model.n_noise))
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_deterministic(self):
        model = small_model()
        rng = np.random.default_rng(1)
        u = rng.normal(size=model.n_dof) * 0.3
        xi = rng.normal(size=model.n_noise) * 0.1
        a = model.step(u.copy(), xi.copy())
        b = model.step(u.copy(), xi.copy())
        assert np.array_equal(a, b)

    def test_newton_exhaustion_raises(self):
        model = small_model(newton_max_iter=1, dt=0.5)
        rng = np.random.default_rng(2)
        u = rng.normal(size=model.n_dof)
        with pytest.raises(RuntimeError, match="Newton"):
            model.step(u, np.zeros(model.n_noise))

    def test_mean_conserved_without_noise_amplitude(self):
        # with c = 0 the weak form has no source, and every term of G is a
        # perfect gradient against the constant test function
        model = small_model(n_cells=16, noise_amp=0.0)
        rng = np.random.default_rng(3)
        u = ModelState(0.5 * rng.normal(size=model.n_dof))
        ones = np.ones(model.n_dof)
        mean0 = ones @ (model.mass @ u.dof)
        for k in range(50):
            xi = rng.normal(size=model.n_noise) * 0.1  # multiplied by c = 0
            u = ModelState(model.step(u.dof, xi))
        drift = abs(ones @ (model.mass @ u.dof) - mean0)
        assert drift < 1e-8

    def test_sks_step_wrapper(self):
        params = SksParams(n_cells=8, dt=0.01)
        model = SksModel(params)
        rng = np.random.default_rng(4)
        d_w = rng.normal(size=8) * 0.1
        lam = rng.normal(size=8)
        state = ModelState(rng.normal(size=16) * 0.1, time_index=3)
        out = sks_step(state, d_w, lam, params, model)
        assert out.time_index == 4
        np.testing.assert_array_equal(
            out.dof, model.step(state.dof, d_w + lam * params.dt))


class TestJacobianAndAdjoint:
    def test_residual_jacobian_matches_fd(self):
        model = small_model()
        rng = np.random.default_rng(5)
        u = rng.normal(size=model.n_dof) * 0.5
        u_next = u + 0.01 * rng.normal(size=model.n_dof)
        xi = rng.normal(size=model.n_noise) * 0.1
        jac = model.residual_jacobian(u, u_next)
        eps = 1e-6
        worst = 0.0
        for k in range(model.n_dof):
            up, um = u_next.copy(), u_next.copy()
            up[k] += eps
            um[k] -= eps
            col = (model.residual(u, up, xi) - model.residual(u, um, xi)) \
                / (2 * eps)
            denom = max(np.linalg.norm(col), 1e-12)
            worst = max(worst, np.linalg.norm(jac[:, k] - col) / denom)
        assert worst < 1e-6

    def test_vjp_state_matches_fd(self):
        model = small_model()
        rng = np.random.default_rng(6)
        u = rng.normal(size=model.n_dof) * 0.3
        xi = rng.normal(size=model.n_noise) * 0.1
        _, cache = model.step_with_cache(u, xi)
        gbar = rng.normal(size=model.n_dof)
        delta = rng.normal(size=model.n_dof)
        eps = 1e-7
        fd = (model.step(u + eps * delta, xi)
              - model.step(u - eps * delta, xi)) / (2 * eps)
        lhs = gbar @ fd
        rhs = model.vjp_state(cache, gbar) @ delta
        assert lhs == pytest.approx(rhs, rel=1e-5)

    def test_vjp_noise_matches_fd(self):
        model = small_model()
        rng = np.random.default_rng(7)
        u = rng.normal(size=model.n_dof) * 0.3
        xi = rng.normal(size=model.n_noise) * 0.1
        _, cache = model.step_with_cache(u, xi)
        gbar = rng.normal(size=model.n_dof)
        delta = rng.normal(size=model.n_noise)
        eps = 1e-7
        fd = (model.step(u, xi + eps * delta)
              - model.step(u, xi - eps * delta)) / (2 * eps)
        assert gbar @ fd == pytest.approx(
            model.vjp_noise(cache, gbar) @ delta, rel=1e-5)

    def test_vjp_both_consistent(self):
        model = small_model()
        rng = np.random.default_rng(8)
        u = rng.normal(size=model.n_dof) * 0.3
        _, cache = model.step_with_cache(u, np.zeros(model.n_noise))
        gbar = rng.normal(size=model.n_dof)
        dj, gprev = model.vjp_both(cache, gbar)
        np.testing.assert_allclose(dj, model.vjp_noise(cache, gbar))
        np.testing.assert_allclose(gprev, model.vjp_state(cache, gbar))


class TestObservation:
    def test_equispaced_points(self):
        model = small_model(n_cells=16, n_obs=4)
        np.testing.assert_allclose(model.obs_points, [0.0, 1.0, 2.0, 3.0])
        assert model.obs_matrix.shape == (4, model.n_dof)

    def test_observe_constant_field(self):
        model = small_model(n_cells=16, n_obs=5)
        np.testing.assert_allclose(model.observe(np.ones(model.n_dof)), 1.0,
                                   rtol=1e-13)

    def test_observe_reads_point_values(self):
        model = small_model(n_cells=16, n_obs=4)
        u = np.sin(2 * np.pi * model.mesh.dof_x / 4.0)
        got = model.observe(u)
        # observation points coincide with vertices of the 16-cell mesh
        np.testing.assert_allclose(got, np.sin(2 * np.pi
                                               * model.obs_points / 4.0),
                                   atol=1e-12)


class TestSpinUp:
    def test_zero_noise_deterministic_and_finite(self):
        model = small_model(n_cells=8)
        zero = lambda k: np.zeros(model.n_noise)
        a = spin_up_initial(model, zero, steps=20)
        b = spin_up_initial(model, zero, steps=20)
        assert np.array_equal(a.dof, b.dof)
        assert np.all(np.isfinite(a.dof))

    def test_noise_driven_spin_up_grows_structure(self):
        model = small_model(n_cells=16)
        rng = np.random.default_rng(9)
        draws = [rng.normal(scale=0.1, size=model.n_noise) for _ in range(60)]
        out = spin_up_initial(model, lambda k: draws[k], steps=60)
        assert np.all(np.isfinite(out.dof))
        assert np.abs(out.dof).max() > 1e-3  # far above the 1e-11 seed scale
