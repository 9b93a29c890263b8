import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebml.autodiff import ParamStore, Tape, finite_diff_check, value_and_grad
from ebml.blocks import IdentityBlock, LinearBlock
from ebml.cli.datasets import generate_dataset
from ebml.latent import (MdnModel, VaeModel, entropy_categorical, gmm_e_step, gmm_elbo, gmm_fit,
                         gmm_log_density, gmm_m_step, gmm_minibatch_step, is_log_marginal,
                         kl_gaussian_diag, kmeans_fit, linear_gaussian_log_marginal, mdn_credible_set,
                         mdn_loss, mdn_loss_value, ppca_e_step, ppca_elbo, ppca_fit, ppca_m_step,
                         principal_angles, vae_loss, wcss)
from ebml.optim import Optimizer

LOG2PI = np.log(2 * np.pi)


class TestDivergences:
    def test_kl_zero_at_prior(self):
        assert kl_gaussian_diag(np.zeros(3), np.full(3, 2.0), prior_var=2.0) == 0.0

    def test_kl_monte_carlo(self):
        rng = np.random.default_rng(0)
        mu, var, pv = rng.normal(size=3), rng.uniform(0.2, 2.0, size=3), 1.5
        z = mu + np.sqrt(var) * rng.standard_normal((100_000, 3))
        logq = -0.5 * np.sum((z - mu) ** 2 / var + np.log(2 * np.pi * var), axis=1)
        logp = -0.5 * np.sum(z ** 2 / pv + np.log(2 * np.pi * pv), axis=1)
        d = logq - logp
        assert abs(kl_gaussian_diag(mu, var, prior_var=pv) - d.mean()) < 3 * d.std() / np.sqrt(len(d))
        assert kl_gaussian_diag(mu, var, prior_var=pv) > 0

    def test_entropy(self):
        assert entropy_categorical(np.full(5, 0.2)) == pytest.approx(np.log(5), abs=1e-14)
        assert entropy_categorical(np.array([0.0, 1.0, 0.0])) == 0.0


class TestGmmSteps:
    def test_single_component(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        np.testing.assert_array_equal(gmm_e_step(X, np.zeros((1, 2))), 1.0)

    def test_equidistant(self):
        R = gmm_e_step(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0], [-1.0, 0.0]]))
        np.testing.assert_allclose(R, [[0.5, 0.5]], atol=1e-15)

    def test_rows_stochastic(self):
        rng = np.random.default_rng(1)
        R = gmm_e_step(rng.normal(size=(50, 3)) * 10, rng.normal(size=(4, 3)), 0.3)
        np.testing.assert_allclose(R.sum(axis=1), 1.0, atol=1e-10)
        assert np.all(R >= 0)

    def test_m_step_cases(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 2))
        lab = np.arange(30) % 3
        R = np.eye(3)[lab]
        np.testing.assert_allclose(gmm_m_step(X, R), [X[lab == k].mean(axis=0) for k in range(3)], atol=1e-14)
        np.testing.assert_allclose(gmm_m_step(X, np.full((30, 3), 1 / 3)), np.tile(X.mean(axis=0), (3, 1)), atol=1e-14)
        Rr = rng.dirichlet(np.ones(3), size=30)
        ref = np.stack([np.average(X, axis=0, weights=Rr[:, k]) for k in range(3)])
        np.testing.assert_allclose(gmm_m_step(X, Rr), ref, atol=1e-13)

    def test_empty_component_reseeded(self):
        X = np.random.default_rng(3).normal(size=(10, 2))
        R = np.zeros((10, 2))
        R[:, 0] = 1.0
        means = gmm_m_step(X, R, rng=np.random.default_rng(0))
        assert any(np.array_equal(means[1], x) for x in X)

    def test_elbo_tight_at_posterior(self):
        rng = np.random.default_rng(4)
        X, means = rng.normal(size=(20, 2)), rng.normal(size=(3, 2))
        R = gmm_e_step(X, means)
        # brute-force mixture density with unit covariances and weights 1/M
        sq = ((X[:, None] - means[None]) ** 2).sum(-1)
        # the objective is a per-point average
        ref = np.mean(np.log(np.mean(np.exp(-0.5 * sq - LOG2PI), axis=1)))
        np.testing.assert_allclose(gmm_elbo(X, means, R), ref, rtol=1e-12)
        np.testing.assert_allclose(gmm_log_density(X, means).mean(), ref, rtol=1e-12)
        other = rng.dirichlet(np.ones(3), size=20)
        assert gmm_elbo(X, means, other) < ref

    def test_elbo_single_point(self):
        assert gmm_elbo(np.array([[1.0, 2.0]]), np.array([[1.0, 2.0]]), np.ones((1, 1))) == pytest.approx(-LOG2PI)

    def test_minibatch_step_moves_towards_data(self):
        X = np.random.default_rng(5).normal(size=(40, 2)) + 3.0
        m0 = np.zeros((1, 2))
        m1 = gmm_minibatch_step(X, m0, 0.5)
        assert np.linalg.norm(m1 - X.mean(axis=0)) < np.linalg.norm(m0 - X.mean(axis=0))


class TestKMeans:
    def test_k_equals_n(self):
        X = np.random.default_rng(0).normal(size=(6, 2))
        res = kmeans_fit(X, 6, np.random.default_rng(0))
        assert wcss(X, res.means, res.assignments) == 0.0

    def test_one_cluster(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        np.testing.assert_allclose(kmeans_fit(X, 1, np.random.default_rng(0)).means[0], X.mean(axis=0), atol=1e-14)

    def test_two_blobs(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=25) - 10, rng.normal(size=25) + 10
        X = np.concatenate([a, b])[:, None]
        res = kmeans_fit(X, 2, rng)
        np.testing.assert_allclose(np.sort(res.means[:, 0]), [a.mean(), b.mean()], atol=1e-9)

    def test_wcss_non_increasing(self):
        X = np.random.default_rng(2).normal(size=(200, 2))
        res = kmeans_fit(X, 5, np.random.default_rng(2))
        assert np.all(np.diff(res.wcss_history) <= 1e-12)

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kmeans_fit(np.zeros((3, 1)), 4, np.random.default_rng(0))

    def test_equals_zero_temperature_em(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 2))
        init = X[:4].copy()
        res = kmeans_fit(X, 4, rng, max_iters=1, init_means=init)
        R = gmm_e_step(X, init, 0.0)
        np.testing.assert_array_equal(res.means, gmm_m_step(X, R))


class TestPpca:
    def test_square_w_infinite_prior(self):
        rng = np.random.default_rng(0)
        W, b = rng.normal(size=(3, 3)), rng.normal(size=3)
        X = rng.normal(size=(5, 3))
        np.testing.assert_allclose(ppca_e_step(X, W, b, np.inf), np.linalg.solve(W, (X - b).T).T, atol=1e-10)

    def test_at_bias(self):
        W, b = np.random.default_rng(0).normal(size=(4, 2)), np.ones(4)
        np.testing.assert_array_equal(ppca_e_step(b[None], W, b, 2.0), 0.0)

    def test_finite_prior_solve(self):
        rng = np.random.default_rng(1)
        W, b, X = rng.normal(size=(4, 2)), rng.normal(size=4), rng.normal(size=(6, 4))
        A = W.T @ W + np.eye(2) / 0.7
        ref = np.stack([np.linalg.solve(A, W.T @ (x - b)) for x in X])
        np.testing.assert_allclose(ppca_e_step(X, W, b, 0.7), ref, atol=1e-12)

    def test_m_step_zero_latents(self):
        X = np.random.default_rng(2).normal(size=(10, 3))
        W, b = ppca_m_step(X, np.zeros((10, 2)), np.zeros(3))
        np.testing.assert_array_equal(W, 0.0)
        np.testing.assert_allclose(b, X.mean(axis=0), atol=1e-14)

    def test_m_step_scalar(self):
        x = np.array([1.0, 2.0, 4.0])
        mu = np.array([0.5, -1.0, 2.0])
        W, b = ppca_m_step(x[:, None], mu[:, None], np.array([0.3]))
        ref = np.mean((x - 0.3) * mu) / (1 + np.mean(mu ** 2))
        np.testing.assert_allclose(W[0, 0], ref, rtol=1e-12)

    def test_em_monotone(self):
        rng = np.random.default_rng(3)
        Wt = rng.normal(size=(5, 2)) * 2
        X = rng.normal(size=(300, 2)) @ Wt.T + 0.3 * rng.normal(size=(300, 5)) + 1.0
        st_ = ppca_fit(X, 2, rng, sigma2=1.0, n_iter=100)
        h = np.array(st_.elbo_history)
        assert np.all(np.diff(h) >= -1e-9 * np.abs(h).max())

    def test_principal_angles(self):
        A = np.eye(4)[:, :2]
        assert np.allclose(principal_angles(A, A @ np.array([[2.0, 1.0], [0.0, 3.0]])), 0.0, atol=1e-7)
        np.testing.assert_allclose(principal_angles(A, np.eye(4)[:, 2:]), np.pi / 2)


class TestVae:
    def test_perfect_reconstruction(self):
        model = VaeModel(IdentityBlock("enc"), IdentityBlock("dec"), 3, sigma2_prior=np.inf, noise_scale=0.0)
        loss, _ = vae_loss(np.array([1.0, -2.0, 0.5]), model, ParamStore(), rng=np.random.default_rng(0))
        assert loss.item() == 0.0

    def test_linear_deterministic_quadratic(self):
        enc, dec = LinearBlock("enc", 3, 2), LinearBlock("dec", 2, 3)
        model = VaeModel(enc, dec, 2, sigma2_prior=2.0)
        store = model.init_params(ParamStore(), np.random.default_rng(0))
        x = np.array([0.5, -1.0, 2.0])
        t = Tape()
        from ebml.latent import vae_loss_var
        f = lambda p: vae_loss_var(p["enc.U"].tape.const(x), model, p, np.zeros(2))  # noqa: E731
        val, _ = value_and_grad(f, store)
        U, c = store.value("enc.U"), store.value("enc.c")
        V, e = store.value("dec.U"), store.value("dec.c")
        g = U @ x + c
        ref = 0.5 * np.sum((x - V @ g - e) ** 2) + np.sum(g ** 2) / (2 * 2.0)
        np.testing.assert_allclose(val, ref, rtol=1e-13)
        assert finite_diff_check(f, store) < 1e-6
        del t

    def test_zero_code_no_penalty(self):
        enc, dec = LinearBlock("enc", 2, 2), LinearBlock("dec", 2, 2)
        model = VaeModel(enc, dec, 2, sigma2_prior=1.0)
        store = model.init_params(ParamStore(), np.random.default_rng(0))
        store.set_value("enc.U", np.zeros((2, 2)))
        x = np.array([1.0, 1.0])
        loss, _ = vae_loss(x, model, store, eps=np.zeros(2))
        assert loss.item() == pytest.approx(0.5 * np.sum((x - store.value("dec.c")) ** 2))

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            VaeModel(LinearBlock("e", 3, 2), LinearBlock("d", 3, 3), 2)


class TestImportance:
    def test_prior_proposal_is_naive_monte_carlo(self):
        rng = np.random.default_rng(0)
        W, b, x = rng.normal(size=(2, 1)), np.zeros(2), np.array([0.3, -0.2])
        res = is_log_marginal(x, lambda Z: Z @ W.T + b, 1.0, (np.zeros(1), 1.0), 50, np.random.default_rng(1))
        Z = np.random.default_rng(1).standard_normal((50, 1))
        lik = np.exp(-0.5 * np.sum((x - Z @ W.T) ** 2, axis=1) - LOG2PI)
        np.testing.assert_allclose(res.estimate, np.log(lik.mean()), rtol=1e-12)

    def test_converges(self):
        rng = np.random.default_rng(2)
        W = rng.normal(size=(3, 2))
        x = rng.normal(size=3)
        exact = linear_gaussian_log_marginal(x, W, np.zeros(3), 1.0)
        res = is_log_marginal(x, lambda Z: Z @ W.T, 1.0, (np.zeros(2), 1.0), 100_000, rng)
        assert abs(res.estimate - exact) < 3 * res.stderr


def _sinusoid_fit(K, seed=0, steps=600):
    ds = generate_dataset("sinusoid", {"n": 300, "bimodal": True, "noise": 0.05}, seed)
    X, Y = ds.features, np.asarray(ds.targets).reshape(len(ds.features), -1)
    model = MdnModel(X.shape[1], Y.shape[1], K, hidden=(16,))
    store = model.init_params(ParamStore(), np.random.default_rng(seed))
    opt = Optimizer(alpha=0.02)
    for _ in range(steps):
        value_and_grad(lambda p: mdn_loss(p[store.names()[0]].tape.const(X), Y, model, p), store, store_grads=True)
        opt.step(store)
    return model, store, X, Y


class TestMdn:
    def test_single_component_regression(self):
        model = MdnModel(2, 3, 1, hidden=())
        store = model.init_params(ParamStore(), np.random.default_rng(0))
        store.set_value("mdn.logvar.U", np.zeros((1, 2)))
        x, y = np.array([[0.5, -1.0]]), np.array([[1.0, 0.0, 2.0]])
        mu, lv = model.head_values(x, store)
        np.testing.assert_array_equal(lv, 0.0)
        ref = 0.5 * np.sum((y - mu[0, 0]) ** 2) + 1.5 * LOG2PI
        np.testing.assert_allclose(mdn_loss_value(x, y, model, store), ref, rtol=1e-13)

    def test_tape_matches_numpy_and_gradcheck(self):
        model = MdnModel(2, 2, 3, hidden=(4,))
        rng = np.random.default_rng(1)
        store = model.init_params(ParamStore(), rng)
        x, y = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
        f = lambda p: mdn_loss(p[store.names()[0]].tape.const(x), y, model, p)  # noqa: E731
        val, _ = value_and_grad(f, store)
        np.testing.assert_allclose(val, mdn_loss_value(x, y, model, store), rtol=1e-12)
        assert finite_diff_check(f, store) < 1e-5

    def test_peaked_component(self):
        model = MdnModel(1, 1, 2, hidden=())
        store = model.init_params(ParamStore(), np.random.default_rng(0))
        store.set_value("mdn.mu.U", np.zeros((2, 1)))
        store.set_value("mdn.mu.c", np.array([0.0, 50.0]))
        store.set_value("mdn.logvar.c", np.array([-10.0, 0.0]))
        val = mdn_loss_value(np.zeros((1, 1)), np.zeros((1, 1)), model, store)
        peak = -0.5 * (-10.0) - 0.5 * LOG2PI
        np.testing.assert_allclose(val, np.log(2) - peak, rtol=1e-12)

    def test_component_permutation_invariance(self):
        model = MdnModel(1, 2, 3, hidden=(4,))
        rng = np.random.default_rng(2)
        store = model.init_params(ParamStore(), rng)
        for k in ("mdn.mu.c", "mdn.logvar.c"):
            store.set_value(k, rng.normal(size=store.value(k).shape))
        x, y = rng.normal(size=(4, 1)), rng.normal(size=(4, 2))
        base = mdn_loss_value(x, y, model, store)
        perm = [2, 0, 1]
        cols = np.concatenate([np.arange(2 * p, 2 * p + 2) for p in perm])
        s2 = store.copy()
        s2.set_value("mdn.mu.U", store.value("mdn.mu.U")[cols])
        s2.set_value("mdn.mu.c", store.value("mdn.mu.c")[cols])
        s2.set_value("mdn.logvar.U", store.value("mdn.logvar.U")[perm])
        s2.set_value("mdn.logvar.c", store.value("mdn.logvar.c")[perm])
        np.testing.assert_allclose(mdn_loss_value(x, y, model, s2), base, rtol=1e-13)

    def test_two_components_beat_one_on_bimodal_data(self):
        m1, s1, X, Y = _sinusoid_fit(1)
        m2, s2, _, _ = _sinusoid_fit(2)
        l1, l2 = mdn_loss_value(X, Y, m1, s1), mdn_loss_value(X, Y, m2, s2)
        assert l2 < l1 - 0.3, (l1, l2)


class TestCredibleSet:
    def _model(self, means, logvar):
        model = MdnModel(1, 1, len(means), hidden=())
        store = model.init_params(ParamStore(), np.random.default_rng(0))
        store.set_value("mdn.mu.U", np.zeros((len(means), 1)))
        store.set_value("mdn.mu.c", np.array(means, dtype=float))
        store.set_value("mdn.logvar.c", np.full(len(means), float(logvar)))
        return model, store

    def test_full_mass_keeps_everything(self):
        model, store = self._model([0.0], 0.0)
        assert len(mdn_credible_set(np.zeros(1), model, store, 100, 1.0, np.random.default_rng(0))) == 100

    def test_tight_gaussian(self):
        model, store = self._model([3.0], np.log(0.01))
        S = mdn_credible_set(np.zeros(1), model, store, 2000, 0.9, np.random.default_rng(0))
        assert np.mean(np.abs(S - 3.0) < 0.2) == 1.0
        assert 0.85 < len(S) / 2000 < 0.95

    def test_bimodal(self):
        model, store = self._model([-5.0, 5.0], np.log(0.25))
        S = mdn_credible_set(np.zeros(1), model, store, 2000, 0.8, np.random.default_rng(0))
        assert np.sum(S < 0) > 500 and np.sum(S > 0) > 500

    def test_needs_samples(self):
        model, store = self._model([0.0], 0.0)
        with pytest.raises(ValueError):
            mdn_credible_set(np.zeros(1), model, store, 5, 0.5, np.random.default_rng(0))
