import numpy as np
import pytest
from scipy import stats as sps

from ebml.autodiff import ParamStore, Tape
from ebml.blocks import IdentityBlock, mlp
from ebml.cli.datasets import generate_dataset
from ebml.energy import (AutoencoderEnergy, MarkovChainState, PcdBuffer, Proposal, RbmParams,
                         cd_k_gradient, ebgan_losses, ebgan_train, enumerate_states,
                         free_energy_grad, gaussian_kernel, gaussian_random_walk, generator_samples,
                         gibbs_sweep, independence_proposal, inflated_gaussian, mh_step, mmd2,
                         mmd2_terms, pcd_update, rbm_cond_hidden, rbm_cond_visible, rbm_energy,
                         rbm_log_likelihood, rbm_unnorm_logp, rbm_visible_probs, run_chain,
                         state_index)


def random_rbm(nv, nh, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return RbmParams(scale * rng.normal(size=(nv, nh)), rng.normal(size=nv), rng.normal(size=nh))


def zero_rbm(nv, nh):
    return RbmParams(np.zeros((nv, nh)), np.zeros(nv), np.zeros(nh))


class TestRbmEnergy:
    def test_zero_params(self):
        th = zero_rbm(3, 2)
        for x in enumerate_states(3):
            for z in enumerate_states(2):
                assert rbm_energy(x, z, th) == 0.0

    def test_all_ones(self):
        th = random_rbm(3, 2, 0)
        assert rbm_energy(np.ones(3), np.ones(2), th) == pytest.approx(-(th.W.sum() + th.b.sum() + th.c.sum()))

    def test_triple_sum(self):
        th = random_rbm(4, 3, 1)
        x, z = np.array([1.0, 0, 1, 1]), np.array([0.0, 1, 1])
        ref = -sum(x[i] * th.W[i, j] * z[j] for i in range(4) for j in range(3)) - x @ th.b - z @ th.c
        assert rbm_energy(x, z, th) == pytest.approx(ref, abs=1e-13)

    def test_non_binary_width(self):
        with pytest.raises(ValueError):
            rbm_energy(np.ones(2), np.ones(2), random_rbm(3, 2, 0))


class TestMarginal:
    def test_zero_params(self):
        np.testing.assert_allclose(rbm_unnorm_logp(enumerate_states(3), zero_rbm(3, 4)), 4 * np.log(2))

    def test_enumeration_all_states(self):
        th = random_rbm(6, 6, 2)
        Z = enumerate_states(6)
        X = enumerate_states(6)
        E = -(X @ th.W @ Z.T) - (X @ th.b)[:, None] - (Z @ th.c)[None, :]
        ref = np.log(np.exp(-E).sum(axis=1))
        assert np.abs(rbm_unnorm_logp(X, th) - ref).max() < 1e-9

    def test_product_of_experts(self):
        th = random_rbm(4, 3, 3)
        for x in enumerate_states(4):
            phi0 = np.exp(x @ th.b)
            phis = [1 + np.exp(x @ th.W[:, j] + th.c[j]) for j in range(3)]
            assert rbm_unnorm_logp(x, th) == pytest.approx(np.log(phi0) + np.sum(np.log(phis)), abs=1e-12)

    def test_large_activations_stable(self):
        th = RbmParams(np.full((2, 1), 400.0), np.zeros(2), np.zeros(1))
        assert np.isfinite(rbm_unnorm_logp(np.ones(2), th))


class TestConditionals:
    def test_zero_params(self):
        th = zero_rbm(3, 2)
        np.testing.assert_array_equal(rbm_cond_hidden(np.ones(3), th), 0.5)
        np.testing.assert_array_equal(rbm_cond_visible(np.ones(2), th), 0.5)

    def test_saturation(self):
        th = zero_rbm(2, 2)
        th.c[:] = [60.0, 0.0]
        assert rbm_cond_hidden(np.zeros(2), th)[0] == pytest.approx(1.0, abs=1e-20)

    def test_bayes_rule(self):
        th = random_rbm(4, 3, 4)
        X, Z = enumerate_states(4), enumerate_states(3)
        joint = np.exp(X @ th.W @ Z.T + (X @ th.b)[:, None] + (Z @ th.c)[None, :])
        for i, x in enumerate(X):
            post = joint[i] / joint[i].sum()
            np.testing.assert_allclose(rbm_cond_hidden(x, th), post @ Z, atol=1e-12)
        for j, z in enumerate(Z):
            post = joint[:, j] / joint[:, j].sum()
            np.testing.assert_allclose(rbm_cond_visible(z, th), post @ X, atol=1e-12)


class TestGibbs:
    def test_zero_params_uniform(self):
        rng = np.random.default_rng(0)
        x = gibbs_sweep(np.zeros((100_000, 3)), zero_rbm(3, 2), 1, rng)
        counts = np.bincount(state_index(x), minlength=8)
        assert sps.chisquare(counts).pvalue > 0.001

    def test_batch_chains_match_exact(self):
        th = random_rbm(4, 3, 5)
        rng = np.random.default_rng(1)
        x = gibbs_sweep((rng.random((4000, 4)) < 0.5).astype(float), th, 50, rng)
        p = np.bincount(state_index(x), minlength=16) / 4000
        assert 0.5 * np.abs(p - rbm_visible_probs(th)).sum() < 0.03

    def test_k_zero(self):
        with pytest.raises(ValueError):
            gibbs_sweep(np.zeros(3), zero_rbm(3, 2), 0, np.random.default_rng(0))

    def test_matches_mh_with_conditional_proposal(self):
        # a block proposal x' ~ sum_z p(z|x) p(x'|z) is reversible w.r.t. p(x): MH always accepts it
        th = random_rbm(3, 2, 6, scale=0.5)
        X, Z = enumerate_states(3), enumerate_states(2)
        pz = np.array([[np.prod(np.where(z, h, 1 - h)) for z in Z] for h in rbm_cond_hidden(X, th)])
        px = np.array([[np.prod(np.where(x, v, 1 - v)) for x in X] for v in rbm_cond_visible(Z, th)])
        T = pz @ px

        def sample(x, r):
            return X[r.choice(8, p=T[state_index(x)[0]])]

        prop = Proposal(sample, lambda to, frm: np.log(T[state_index(frm)[0], state_index(to)[0]]))
        st = MarkovChainState(X[0], np.random.default_rng(0))
        for _ in range(300):
            mh_step(st, lambda x: float(rbm_unnorm_logp(x, th)), prop)
        assert st.accepted == 300


class TestContrastiveDivergence:
    def test_returning_chain_gives_zero(self):
        th = random_rbm(3, 2, 0)
        x = np.array([[1.0, 0.0, 1.0]])
        g = {k: a - b for (k, a), b in zip(free_energy_grad(x, th).items(), free_energy_grad(x, th).values())}
        for v in g.values():
            np.testing.assert_array_equal(v, 0.0)
        # the same cancellation inside cd_k_gradient: a deterministic chain that stays put
        stuck = RbmParams(np.zeros((3, 2)), np.array([60.0, -60.0, 60.0]), np.zeros(2))
        g = cd_k_gradient(x, stuck, 3, np.random.default_rng(0))
        for v in g.values():
            np.testing.assert_array_equal(v, 0.0)

    def test_free_energy_gradient_finite_differences(self):
        th = random_rbm(4, 3, 1)
        x = np.array([1.0, 0.0, 1.0, 1.0])
        g = free_energy_grad(x, th)
        h = 1e-6
        for name in ("W", "b", "c"):
            arr = getattr(th, name)
            num = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                fp = -rbm_unnorm_logp(x, th)
                arr[idx] = old - h
                fm = -rbm_unnorm_logp(x, th)
                arr[idx] = old
                num[idx] = (fp - fm) / (2 * h)
            np.testing.assert_allclose(g[name], num, atol=1e-8)

    def test_long_chains_approach_exact_gradient(self):
        th = random_rbm(4, 2, 2, scale=0.5)
        X = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
        S = enumerate_states(4)
        p = rbm_visible_probs(th)
        neg = {k: np.tensordot(p, np.stack([free_energy_grad(s, th)[k] for s in S]), axes=1)
               for k in ("W", "b", "c")}
        exact = {k: free_energy_grad(X, th)[k] - neg[k] for k in neg}
        rng = np.random.default_rng(0)
        Xrep = np.repeat(X, 2000, axis=0)
        g = cd_k_gradient(Xrep, th, 30, rng)
        for k in exact:
            np.testing.assert_allclose(g[k], exact[k], atol=0.03)


class TestPcd:
    def test_zero_steps(self):
        buf = PcdBuffer(np.array([[1.0, 0.0, 1.0]]), steps=0)
        _, nb = pcd_update(buf, random_rbm(3, 2, 0), np.random.default_rng(0))
        np.testing.assert_array_equal(nb.particles, buf.particles)

    def test_deterministic(self):
        th = random_rbm(3, 2, 0)
        buf = PcdBuffer.init(3, np.random.default_rng(1))
        a = pcd_update(buf, th, np.random.default_rng(5))
        b = pcd_update(buf, th, np.random.default_rng(5))
        np.testing.assert_array_equal(a[1].particles, b[1].particles)

    def test_stationary_distribution(self):
        th = random_rbm(4, 3, 7)
        rng = np.random.default_rng(2)
        buf = PcdBuffer.init(4, rng, n_particles=500)
        counts = np.zeros(16)
        for t in range(300):
            _, buf = pcd_update(buf, th, rng)
            if t >= 100:
                counts += np.bincount(state_index(buf.particles), minlength=16)
        tv = 0.5 * np.abs(counts / counts.sum() - rbm_visible_probs(th)).sum()
        assert tv < 0.03

    def test_pcd_training_improves_likelihood(self):
        from ebml.energy import rbm_train
        X = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float)
        th0 = RbmParams.random(4, 3, np.random.default_rng(0), 0.1)
        th, _ = rbm_train(X, th0, np.random.default_rng(1), steps=300, method="pcd")
        assert rbm_log_likelihood(X, th) > rbm_log_likelihood(X, th0) + 0.3


class TestMetropolis:
    def test_symmetric_flat_accepts(self):
        st = MarkovChainState(np.zeros(2), np.random.default_rng(0))
        for _ in range(50):
            mh_step(st, lambda x: 0.0, gaussian_random_walk(1.0))
        assert st.acceptance_rate == 1.0

    def test_independence_from_target(self):
        logp = lambda x: float(sps.norm(1.0, 2.0).logpdf(x).sum())  # noqa: E731
        prop = independence_proposal(lambda r: 1.0 + 2.0 * r.standard_normal(1), logp)
        st = MarkovChainState(np.array([0.3]), np.random.default_rng(0))
        for _ in range(100):
            mh_step(st, logp, prop)
        assert st.accepted == 100

    def test_zero_target_density(self):
        st = MarkovChainState(np.array([-1.0]), np.random.default_rng(0))
        with pytest.raises(ValueError):
            mh_step(st, lambda x: 0.0 if x[0] > 0 else -np.inf, gaussian_random_walk(1.0))

    def test_run_chain_moments(self):
        st = MarkovChainState(np.array([0.0]), np.random.default_rng(1))
        S = run_chain(st, lambda x: -0.5 * float((x[0] - 3.0) ** 2) / 4.0, gaussian_random_walk(4.0),
                      5000, burn_in=500, thin=5)
        assert abs(S.mean() - 3.0) < 0.2
        assert abs(S.var() - 4.0) < 0.6


class TestMmd:
    def test_kernel(self):
        a, b = np.array([0.0, 1.0]), np.array([1.0, 1.0])
        assert gaussian_kernel(a, a, 2.0) == 1.0
        assert gaussian_kernel(a, b, 0.7) == gaussian_kernel(b, a, 0.7)
        assert gaussian_kernel(a, b, 1.0) == pytest.approx(np.exp(-1))

    def test_matched_sets(self):
        D = np.random.default_rng(0).normal(size=(50, 2))
        v = mmd2(D, D, sigma=1.0)
        assert v <= 0 and abs(v) < 0.05

    def test_far_apart(self):
        rng = np.random.default_rng(1)
        A, B = rng.normal(size=(60, 1)), rng.normal(size=(60, 1)) + 10.0
        a, b, c = mmd2_terms(A, B, sigma=1.0)
        assert c < 1e-12
        assert mmd2(A, B, sigma=1.0) == pytest.approx(a + b, abs=1e-12)

    def test_callable_kernel_matches_gram(self):
        rng = np.random.default_rng(2)
        A, B = rng.normal(size=(8, 2)), rng.normal(size=(6, 2))
        k = lambda a, b: gaussian_kernel(a, b, 1.3)  # noqa: E731
        assert mmd2(A, B, kernel=k) == pytest.approx(mmd2(A, B, sigma=1.3), abs=1e-12)

    def test_too_small(self):
        with pytest.raises(ValueError):
            mmd2(np.zeros((1, 2)), np.zeros((3, 2)))


class TestEbgan:
    def _models(self, seed=0):
        rng = np.random.default_rng(seed)
        gen = mlp("gen", [2, 8, 2], "tanh")
        en = AutoencoderEnergy("en", 2)
        store = ParamStore()
        gen.init_params(store, rng)
        en.init_params(store, rng)
        return gen, en, store

    def test_lambda_zero_is_energy_only(self):
        gen, en, store = self._models()
        t = Tape()
        p = store.to_vars(t)
        X = np.random.default_rng(1).normal(size=(16, 2))
        _, gl = ebgan_losses(X, gen, en, p, 0.0, 2.0, 16, np.random.default_rng(2), 2)
        eps = np.random.default_rng(2).standard_normal((16, 2))
        ref = en(t.const(gen(t.const(eps), p).value), p).value.mean()
        assert gl.item() == pytest.approx(ref, abs=1e-12)

    def test_constant_energy_saddle(self):
        # identity "generator" on data-distributed noise and a constant energy: no gradient signal
        class Const:
            name = "c"

            def param_names(self):
                return ["c.k"]

            def __call__(self, x, params):
                return params["c.k"] * np.ones(x.shape[0])

        store = ParamStore()
        store.add("c.k", np.array([0.7]))
        t = Tape()
        p = store.to_vars(t)
        el, gl = ebgan_losses(np.random.default_rng(0).normal(size=(32, 2)), IdentityBlock("g"), Const(), p,
                              0.0, 2.0, 32, np.random.default_rng(1), 2)
        g = t.backward(el)
        assert el.item() == 0.0
        np.testing.assert_array_equal(t.grad(g, p["c.k"]), 0.0)

    def test_validation(self):
        gen, en, store = self._models()
        p = store.to_vars(Tape())
        with pytest.raises(ValueError):
            ebgan_losses(np.zeros((4, 2)), gen, en, p, 1.0, 1.0, 4, np.random.default_rng(0), 2)
        with pytest.raises(ValueError):
            ebgan_losses(np.zeros((4, 2)), gen, en, p, -1.0, 2.0, 4, np.random.default_rng(0), 2)

    def test_inflated_gaussian(self):
        rng = np.random.default_rng(0)
        G = rng.normal(size=(500, 2)) * [1.0, 2.0]
        S = inflated_gaussian(G, 2.0, 20_000, rng)
        np.testing.assert_allclose(np.cov(S.T), 2.0 * np.cov(G.T), rtol=0.05, atol=0.05)
        # degenerate batch falls back to the ridge
        assert np.all(np.isfinite(inflated_gaussian(np.ones((5, 2)), 2.0, 10, rng)))

    @pytest.mark.parametrize("seed", range(3))
    def test_two_modes_covered(self, seed):
        ds = generate_dataset("gaussian-blobs", {"n": 400, "centers": 2, "sigma": 0.3, "separation": 6.0}, seed)
        rng = np.random.default_rng(seed)
        gen = mlp("gen", [2, 16, 2], "tanh")
        en = AutoencoderEnergy("en", 2)
        store = ParamStore()
        gen.init_params(store, rng)
        en.init_params(store, rng)
        before = mmd2(generator_samples(gen, store, 400, 2, np.random.default_rng(9)), ds.features)
        ebgan_train(ds.features, gen, en, store, rng, 2, steps=200)
        S = generator_samples(gen, store, 1000, 2, rng)
        lab = np.argmin(((S[:, None] - ds.meta["means"][None]) ** 2).sum(-1), axis=1)
        assert np.bincount(lab, minlength=2).min() >= 200
        assert mmd2(generator_samples(gen, store, 400, 2, np.random.default_rng(9)), ds.features) < before
