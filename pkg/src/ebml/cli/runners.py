"""Per-task experiment runners.

Every runner receives a validated config and a root RngStream and returns a
RunOutput. The command layer writes the artifacts. Randomness for data,
initialisation, training and sampling comes from separately named streams so
that changing one phase never shifts the draws of another.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import losses
from ..autodiff import ParamStore, RngStream, Tape
from ..blocks import LinearBlock, Sequential, mlp
from ..energy import (AutoencoderEnergy, RbmParams, ebgan_train, generator_samples, gibbs_sweep,
                      mmd2, rbm_free_energy, rbm_log_likelihood, rbm_train)
from ..ensemble import EnsembleSet, RegressionTree, bag_predict, bagging_gap, gradient_boost
from ..ensemble.boosting import LOSSES, BoostState
from ..hyperopt import HyperSpace, tune_then_report
from ..latent import (VaeModel, gmm_e_step, gmm_elbo, gmm_fit, kmeans_best_of, ppca_e_step,
                      ppca_elbo, ppca_fit, principal_angles, vae_loss, wcss)
from ..optim import Optimizer
from ..rl import ActorCritic, ToyEnv, actor_critic_train
from ..stats import bootstrap_distribution, bound_report, wald_ci
from ..autoreg import ArModel, ar_log_prob, ar_sample, ar_train_step
from .config import ConfigError, task_param
from .datasets import Dataset, generate_dataset, load_csv


@dataclass
class RunOutput:
    metrics: list = field(default_factory=list)
    store: ParamStore | None = None
    result: dict = field(default_factory=dict)
    samples: np.ndarray | None = None


# shared helpers ----------------------------------------------------------------

def load_data(cfg: dict) -> Dataset:
    data = cfg.get("data")
    if data is None:
        raise ConfigError("this task needs a data section", "$.data")
    if "kind" in data:
        try:
            return generate_dataset(data["kind"], data.get("params"), cfg["seed"])
        except ValueError as exc:
            raise ConfigError(str(exc), "$.data.params") from None
    return load_csv(data["path"], {"target": data.get("target", "none")})


def split_indices(n: int, fractions, rng) -> list[np.ndarray]:
    """Random disjoint index blocks; the first block takes what the fractions leave."""
    perm = rng.permutation(n)
    sizes = [int(round(f * n)) for f in fractions]
    head = n - sum(sizes)
    if head < 1:
        raise ConfigError("split fractions leave no training data", "$.data")
    out, start = [perm[:head]], head
    for s in sizes:
        out.append(perm[start:start + s])
        start += s
    return out


def _train_cfg(cfg):
    t = cfg.get("train", {})
    return int(t.get("steps", 200)), int(t.get("batch_size", 32)), int(t.get("log_every", 10))


def _classes(ds: Dataset) -> np.ndarray:
    if ds.targets is None:
        raise ConfigError("this task needs class targets", "$.data.target")
    y = np.asarray(ds.targets)
    if not np.issubdtype(y.dtype, np.integer):
        if np.any(y != np.round(y)):
            raise ConfigError("class targets must be integers", "$.data.target")
        y = y.astype(int)
    return y


def _best_perm_error(est, true) -> float:
    """Largest coordinate error after matching estimated to true means."""
    est, true = np.asarray(est), np.asarray(true)
    if est.shape != true.shape:
        return float("nan")
    if len(true) > 8:
        order = np.argmin(((est[:, None] - true[None]) ** 2).sum(-1), axis=0)
        return float(np.abs(est[order] - true).max())
    best = np.inf
    for p in itertools.permutations(range(len(true))):
        best = min(best, float(np.abs(est[list(p)] - true).max()))
    return best


def build_network(name: str, spec: dict | None, n_in: int, n_out: int, path: str) -> Sequential:
    """Linear layer program from a model spec.

    ``layers`` lists hidden linear layers ({"type": "linear", "out": width,
    "activation": ...}); a final identity layer of width ``n_out`` is
    appended. Without ``layers`` a ``hidden`` list of widths is used.
    """
    spec = spec or {}
    blocks, width = [], n_in
    if "layers" in spec:
        for i, layer in enumerate(spec["layers"]):
            if "out" not in layer:
                raise ConfigError("linear layer needs 'out'", f"{path}.layers[{i}]")
            act = layer.get("activation", "tanh")
            try:
                blocks.append(LinearBlock(f"{name}.l{i}", width, int(layer["out"]), act))
            except (KeyError, ValueError) as exc:
                raise ConfigError(str(exc), f"{path}.layers[{i}].activation") from None
            width = int(layer["out"])
    else:
        for i, h in enumerate(spec.get("hidden", [])):
            blocks.append(LinearBlock(f"{name}.l{i}", width, int(h), spec.get("activation", "tanh")))
            width = int(h)
    blocks.append(LinearBlock(f"{name}.l{len(blocks)}", width, n_out, spec.get("out_activation", "identity")))
    return Sequential(name, blocks)


class NetworkEnergy(losses.EnergyModel):
    """Per-class energies as the negated output of a layer program."""

    def __init__(self, net: Sequential, n_classes: int):
        self.net, self.n_classes = net, n_classes

    def init_params(self, store, rng):
        return self.net.init_params(store, rng)

    def energies(self, x, params):
        return -self.net(x, params)


def _minibatches(rng, n, batch_size):
    return rng.choice(n, size=min(batch_size, n), replace=False)


def _optimizer(cfg) -> Optimizer:
    try:
        return Optimizer.from_config(cfg.get("optimizer"))
    except ValueError as exc:
        raise ConfigError(str(exc), "$.optimizer") from None


# classify --------------------------------------------------------------------

def _classifier(cfg, ds):
    y = _classes(ds)
    C = int(task_param(cfg, "n_classes", int(y.max()) + 1 if len(y) else 2))
    net = build_network("energy", cfg.get("model"), ds.features.shape[1], C, "$.model")
    return NetworkEnergy(net, C), y


def _class_loss(cfg):
    kind = task_param(cfg, "loss", "cross_entropy")
    beta = float(task_param(cfg, "beta", 1.0))
    if kind == "cross_entropy":
        return lambda e, y: losses.cross_entropy_loss(e, y, beta)
    if kind == "margin":
        m = float(task_param(cfg, "margin", 1.0))
        return lambda e, y: losses.margin_loss(e, y, m)
    if kind == "perceptron":
        return losses.perceptron_loss
    raise ConfigError(f"unknown loss {kind!r}", "$.task_params.loss")


def train_energy_classifier(model, X, y, store, loss_fn, opt, steps, batch_size, rng,
                            log_every=0, metrics=None):
    for step in range(1, steps + 1):
        idx = _minibatches(rng, len(X), batch_size)
        tape = Tape()
        pv = store.to_vars(tape)
        loss = loss_fn(model.energies(tape.const(X[idx]), pv), y[idx])
        store.collect_grads(tape, tape.backward(loss), pv)
        opt.step(store)
        if metrics is not None and log_every and step % log_every == 0:
            metrics.append((step, "train_loss", loss.item()))
    return store


def _classify_report(model, store, X, y, gamma, prefix):
    err = float(np.mean(losses.predict(model.energy_values(X, store)) != y)) if len(y) else float("nan")
    out = {f"{prefix}_error": err}
    if len(y):
        ci = wald_ci(err, len(y), gamma)
        out[f"{prefix}_accuracy"] = 1.0 - err
        out[f"{prefix}_accuracy_ci"] = [ci.lower, ci.upper]
        out[f"{prefix}_small_sample"] = ci.small_sample
    return out


def classify_train(cfg, root: RngStream) -> RunOutput:
    ds = load_data(cfg)
    model, y = _classifier(cfg, ds)
    tr, te = split_indices(len(ds), [cfg["data"].get("test_fraction", 0.25)], root.derive("split").gen)
    store = model.init_params(ParamStore(), root.derive("init").gen)
    steps, bs, every = _train_cfg(cfg)
    out = RunOutput(store=store)
    train_energy_classifier(model, ds.features[tr], y[tr], store, _class_loss(cfg), _optimizer(cfg),
                            steps, bs, root.derive("train").gen, every, out.metrics)
    gamma = float(task_param(cfg, "gamma", 0.95))
    out.result.update(_classify_report(model, store, ds.features[tr], y[tr], gamma, "train"))
    out.result.update(_classify_report(model, store, ds.features[te], y[te], gamma, "test"))
    out.metrics.append((steps, "test_error", out.result["test_error"]))
    return out


def classify_evaluate(cfg, root, store) -> RunOutput:
    ds = load_data(cfg)
    model, y = _classifier(cfg, ds)
    _, te = split_indices(len(ds), [cfg["data"].get("test_fraction", 0.25)], root.derive("split").gen)
    res = _classify_report(model, store, ds.features[te], y[te], float(task_param(cfg, "gamma", 0.95)), "test")
    return RunOutput([(0, "test_error", res["test_error"])], None, res)


# gmm / kmeans -------------------------------------------------------------------

def gmm_train(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    M = int(task_param(cfg, "components", 3))
    beta = float(task_param(cfg, "beta", 1.0))
    st = gmm_fit(ds.features, M, root.derive("train").gen, int(task_param(cfg, "n_iter", 100)), beta)
    store = ParamStore()
    store.add("means", st.means)
    out = RunOutput([(i + 1, "elbo", v) for i, v in enumerate(st.elbo_history)], store)
    out.result = {"elbo": st.elbo_history[-1], "means": st.means,
                  "elbo_monotone": bool(np.all(np.diff(st.elbo_history) >= -1e-9))}
    if "means" in ds.meta:
        out.result["mean_error"] = _best_perm_error(st.means, ds.meta["means"])
    return out


def gmm_evaluate(cfg, root, store) -> RunOutput:
    ds = load_data(cfg)
    means = store.value("means")
    R = gmm_e_step(ds.features, means, float(task_param(cfg, "beta", 1.0)))
    e = gmm_elbo(ds.features, means, R)
    return RunOutput([(0, "elbo", e)], None, {"elbo": e})


def gmm_sample(cfg, root, store, n) -> np.ndarray:
    means = store.value("means")
    rng = root.derive("sample").gen
    z = rng.integers(len(means), size=n)
    return means[z] + rng.standard_normal((n, means.shape[1]))


def kmeans_train(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    K = int(task_param(cfg, "K", 3))
    res = kmeans_best_of(ds.features, K, root.derive("train").gen,
                         int(task_param(cfg, "restarts", 5)), int(task_param(cfg, "max_iters", 100)))
    store = ParamStore()
    store.add("means", res.means)
    out = RunOutput([(i, "wcss", v) for i, v in enumerate(res.wcss_history)], store)
    out.result = {"wcss": res.wcss_history[-1], "means": res.means, "n_iter": res.n_iter}
    if "means" in ds.meta:
        out.result["mean_error"] = _best_perm_error(res.means, ds.meta["means"])
    return out


def kmeans_evaluate(cfg, root, store) -> RunOutput:
    ds = load_data(cfg)
    means = store.value("means")
    a = gmm_e_step(ds.features, means, 0.0).argmax(axis=1)
    w = wcss(ds.features, means, a)
    return RunOutput([(0, "wcss", w)], None, {"wcss": w})


# ppca ------------------------------------------------------------------------------

def _ppca_sigma2(cfg):
    s = task_param(cfg, "sigma2", "inf")
    return float("inf") if s in ("inf", None) else float(s)


def ppca_train(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    K = int(task_param(cfg, "K", 2))
    sigma2 = _ppca_sigma2(cfg)
    st = ppca_fit(ds.features, K, root.derive("train").gen, sigma2, int(task_param(cfg, "n_iter", 200)))
    store = ParamStore()
    store.add("W", st.W)
    store.add("b", st.b)
    C = np.cov(ds.features.T, bias=True)
    top = np.linalg.eigh(C)[1][:, ::-1][:, :K]
    angles = principal_angles(st.W, top)
    out = RunOutput([(i + 1, "elbo", v) for i, v in enumerate(st.elbo_history)], store)
    out.result = {"elbo": st.elbo_history[-1], "max_principal_angle": float(np.max(angles))}
    return out


def ppca_evaluate(cfg, root, store) -> RunOutput:
    ds = load_data(cfg)
    W, b = store.value("W"), store.value("b")
    sigma2 = _ppca_sigma2(cfg)
    e = ppca_elbo(ds.features, W, b, ppca_e_step(ds.features, W, b, sigma2), sigma2)
    return RunOutput([(0, "elbo", e)], None, {"elbo": e})


def ppca_sample(cfg, root, store, n) -> np.ndarray:
    W, b = store.value("W"), store.value("b")
    rng = root.derive("sample").gen
    noise = float(task_param(cfg, "noise_sd", 1.0))
    return rng.standard_normal((n, W.shape[1])) @ W.T + b + noise * rng.standard_normal((n, W.shape[0]))


# vae -------------------------------------------------------------------------------

def _vae_model(cfg, d):
    K = int(task_param(cfg, "latent_dim", 1))
    spec = cfg.get("model", {})
    enc = build_network("enc", spec.get("encoder"), d, K, "$.model.encoder")
    dec = build_network("dec", spec.get("decoder"), K, d, "$.model.decoder")
    return VaeModel(enc, dec, K, float(task_param(cfg, "sigma2_prior", 1.0)),
                    task_param(cfg, "noise_scale"))


def vae_train(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    model = _vae_model(cfg, ds.features.shape[1])
    store = model.init_params(ParamStore(), root.derive("init").gen)
    opt = _optimizer(cfg)
    steps, bs, every = _train_cfg(cfg)
    rng = root.derive("train").gen
    out = RunOutput(store=store)
    for step in range(1, steps + 1):
        loss, tape = vae_loss(ds.features[_minibatches(rng, len(ds), bs)], model, store, rng)
        store.collect_grads(tape, tape.backward(loss), tape.params)
        opt.step(store)
        if step % every == 0:
            out.metrics.append((step, "loss", loss.item()))
    final, _ = vae_loss(ds.features, model, store, eps=np.zeros((len(ds), model.latent_dim)))
    out.result = {"loss_mean_code": final.item()}
    return out


def vae_evaluate(cfg, root, store) -> RunOutput:
    ds = load_data(cfg)
    model = _vae_model(cfg, ds.features.shape[1])
    loss, _ = vae_loss(ds.features, model, store, root.derive("eval").gen)
    return RunOutput([(0, "loss", loss.item())], None, {"loss": loss.item()})


def vae_sample(cfg, root, store, n) -> np.ndarray:
    model = _vae_model(cfg, _decoder_out(store))
    rng = root.derive("sample").gen
    sd = np.sqrt(model.sigma2_prior) if np.isfinite(model.sigma2_prior) else 1.0
    return model.decode(sd * rng.standard_normal((n, model.latent_dim)), store)


def _decoder_out(store) -> int:
    last = sorted((k for k in store.names() if k.startswith("dec.") and k.endswith(".c")),
                  key=lambda k: int(k.split(".")[1][1:]))[-1]
    return store.value(last).shape[0]


# rbm -------------------------------------------------------------------------------

def _binary(ds: Dataset) -> np.ndarray:
    X = ds.features
    if np.all((X == 0) | (X == 1)):
        return X
    return (X > X.mean(axis=0)).astype(np.float64)


def rbm_train_task(cfg, root) -> RunOutput:
    X = _binary(load_data(cfg))
    H = int(task_param(cfg, "n_hidden", 3))
    theta = RbmParams.random(X.shape[1], H, root.derive("init").gen, float(task_param(cfg, "init_scale", 0.1)))
    steps, _, every = _train_cfg(cfg)
    method = task_param(cfg, "method", "cd")
    exact = X.shape[1] + H <= 20
    rng = root.derive("train").gen
    out = RunOutput()
    buffer = None
    done = 0
    if method == "pcd":
        from ..energy import PcdBuffer
        buffer = PcdBuffer.init(X.shape[1], rng, int(task_param(cfg, "n_particles", 25)))
    while done < steps:
        chunk = min(every, steps - done)
        theta, _ = rbm_train(X, theta, rng, chunk, float(task_param(cfg, "lr", 0.1)), method,
                             int(task_param(cfg, "k", 1)), buffer)
        done += chunk
        if exact:
            out.metrics.append((done, "log_likelihood", rbm_log_likelihood(X, theta)))
        else:
            out.metrics.append((done, "free_energy", float(np.mean(rbm_free_energy(X, theta)))))
    out.store = ParamStore()
    for k, v in theta.as_dict().items():
        out.store.add(k, v)
    out.result = {"final_" + out.metrics[-1][1]: out.metrics[-1][2]}
    return out


def _theta(store) -> RbmParams:
    return RbmParams(store.value("W"), store.value("b"), store.value("c"))


def rbm_evaluate(cfg, root, store) -> RunOutput:
    X = _binary(load_data(cfg))
    theta = _theta(store)
    if X.shape[1] + theta.W.shape[1] <= 20:
        v = rbm_log_likelihood(X, theta)
        return RunOutput([(0, "log_likelihood", v)], None, {"log_likelihood": v})
    v = float(np.mean(rbm_free_energy(X, theta)))
    return RunOutput([(0, "free_energy", v)], None, {"free_energy": v})


def rbm_sample(cfg, root, store, n) -> np.ndarray:
    theta = _theta(store)
    rng = root.derive("sample").gen
    x0 = (rng.random((n, theta.n_visible)) < 0.5).astype(np.float64)
    return gibbs_sweep(x0, theta, int(task_param(cfg, "gibbs_steps", 200)), rng)


# ebgan -----------------------------------------------------------------------------

def _ebgan_models(cfg, d):
    L = int(task_param(cfg, "latent_dim", 2))
    gen = build_network("gen", cfg.get("model", {}).get("generator", {"hidden": [16]}), L, d,
                        "$.model.generator")
    en = AutoencoderEnergy("energy", d, int(task_param(cfg, "energy_hidden", 8)),
                           int(task_param(cfg, "energy_code", 1)))
    return gen, en, L


def ebgan_train_task(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    X = ds.features
    gen, en, L = _ebgan_models(cfg, X.shape[1])
    store = ParamStore()
    irng = root.derive("init").gen
    gen.init_params(store, irng)
    en.init_params(store, irng)
    steps, bs, every = _train_cfg(cfg)
    hist = ebgan_train(X, gen, en, store, root.derive("train").gen, L, steps, bs,
                       float(task_param(cfg, "lam", 1.0)), float(task_param(cfg, "alpha", 2.0)),
                       float(task_param(cfg, "lr", 1e-2)), task_param(cfg, "margin", 1.0))
    out = RunOutput(store=store)
    for i, (el, gl) in enumerate(hist, start=1):
        if i % every == 0:
            out.metrics += [(i, "energy_loss", el), (i, "generator_loss", gl)]
    S = generator_samples(gen, store, min(len(X), 200), L, root.derive("eval").gen)
    out.result = {"mmd2_to_data": mmd2(X[:200], S)}
    return out


def ebgan_evaluate(cfg, root, store) -> RunOutput:
    X = load_data(cfg).features
    gen, _, L = _ebgan_models(cfg, X.shape[1])
    S = generator_samples(gen, store, min(len(X), 200), L, root.derive("eval").gen)
    v = mmd2(X[:200], S)
    return RunOutput([(0, "mmd2", v)], None, {"mmd2_to_data": v})


def ebgan_sample(cfg, root, store, n) -> np.ndarray:
    d = store.value("energy.dec1.c").shape[0]
    gen, _, L = _ebgan_models(cfg, d)
    return generator_samples(gen, store, n, L, root.derive("sample").gen)


# autoreg ---------------------------------------------------------------------------

def _sequences(ds: Dataset) -> list:
    if isinstance(ds.targets, list):
        return [np.asarray(s, dtype=int) for s in ds.targets]
    X = ds.features
    if np.any(X != np.round(X)) or np.any(X < 0):
        raise ConfigError("sequence data must be non-negative integers", "$.data")
    return [row.astype(int) for row in X]


def _ar_model(cfg, C=None):
    spec = cfg.get("model", {})
    C = int(task_param(cfg, "n_symbols", C if C is not None else 2))
    return ArModel(C, spec.get("type", "gru"), int(spec.get("d_embed", 8)), int(spec.get("d_hidden", 16)),
                   int(spec.get("n_heads", 1)), bool(spec.get("rope", False)))


def _ar_nll(seqs, model, store):
    return float(-np.mean([ar_log_prob(s, model, store) for s in seqs]))


def autoreg_train(cfg, root) -> RunOutput:
    seqs = _sequences(load_data(cfg))
    model = _ar_model(cfg, int(max(s.max() for s in seqs)) + 1)
    store = model.init_params(ParamStore(), root.derive("init").gen)
    opt = _optimizer(cfg)
    steps, bs, every = _train_cfg(cfg)
    rng = root.derive("train").gen
    out = RunOutput(store=store)
    for step in range(1, steps + 1):
        idx = _minibatches(rng, len(seqs), bs)
        nll = ar_train_step([seqs[i] for i in idx], model, store, opt)
        if step % every == 0:
            out.metrics.append((step, "nll", nll))
    out.result = {"nll": _ar_nll(seqs, model, store), "n_symbols": model.C}
    return out


def autoreg_evaluate(cfg, root, store) -> RunOutput:
    seqs = _sequences(load_data(cfg))
    model = _ar_model(cfg, store.value("ar.emb").shape[0] - 1)
    v = _ar_nll(seqs, model, store)
    return RunOutput([(0, "nll", v)], None, {"nll": v})


def autoreg_sample(cfg, root, store, n) -> np.ndarray:
    model = _ar_model(cfg, store.value("ar.emb").shape[0] - 1)
    T = int(cfg.get("sample", {}).get("length", 8))
    return np.asarray(ar_sample(model, store, T, root.derive("sample").gen, n), dtype=np.float64)


# rl ----------------------------------------------------------------------------------

def _env(cfg) -> ToyEnv:
    try:
        return ToyEnv.from_config(cfg["env"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc), "$.env") from None


def _ac(cfg, env) -> ActorCritic:
    return ActorCritic(env.n_states, env.n_actions, task_param(cfg, "baseline", "expectation"),
                       int(task_param(cfg, "refresh_every", 100)))


def _policy_value(env, table):
    return float(env.v_policy(table)[env.start])


def rl_train(cfg, root) -> RunOutput:
    env = _env(cfg)
    ac = _ac(cfg, env)
    steps, _, every = _train_cfg(cfg)
    log = actor_critic_train(env, ac, steps, root.derive("train").gen,
                             float(task_param(cfg, "critic_lr", 0.1)), float(task_param(cfg, "actor_lr", 0.1)),
                             float(task_param(cfg, "value_lr", 0.1)))
    r = np.asarray(log["reward"])
    out = RunOutput()
    for s in range(every, steps + 1, every):
        out.metrics.append((s, "mean_reward", float(r[s - every:s].mean())))
    out.store = ParamStore()
    for src in (ac.policy.store, ac.q.store):
        for k in src.names():
            out.store.add(k, src.value(k))
    table = ac.policy.table(env.n_states)
    out.result = {"policy": table, "policy_value": _policy_value(env, table),
                  "optimal_value": float(env.value_iteration()[0][env.start])}
    return out


def _load_policy(cfg, env, store) -> ActorCritic:
    ac = _ac(cfg, env)
    for k in ac.policy.store.names():
        ac.policy.store.set_value(k, store.value(k))
    return ac


def rl_evaluate(cfg, root, store) -> RunOutput:
    env = _env(cfg)
    table = _load_policy(cfg, env, store).policy.table(env.n_states)
    v = _policy_value(env, table)
    return RunOutput([(0, "policy_value", v)], None, {"policy_value": v, "policy": table})


# boost / bag -----------------------------------------------------------------------

def _regression(ds):
    if ds.targets is None:
        raise ConfigError("this task needs real-valued targets", "$.data.target")
    return ds.features, np.asarray(ds.targets, dtype=np.float64)


def _tree_params(store: ParamStore, prefix: str, trees) -> None:
    for i, t in enumerate(trees):
        store.add(f"{prefix}{i}", t.to_array())


def boost_train(cfg, root) -> RunOutput:
    X, y = _regression(load_data(cfg))
    loss = task_param(cfg, "loss", "squared")
    if loss not in LOSSES:
        raise ConfigError(f"unknown loss {loss!r}; expected one of {sorted(LOSSES)}", "$.task_params.loss")
    st = gradient_boost(X, y, int(task_param(cfg, "n_stages", 10)), loss, int(task_param(cfg, "max_depth", 1)))
    store = ParamStore()
    store.add("base", np.atleast_1d(st.base))
    store.add("gammas", np.array([g for _, g in st.stages]) if st.stages else np.zeros(1))
    _tree_params(store, "tree", [t for t, _ in st.stages])
    out = RunOutput([(i, "train_loss", v) for i, v in enumerate(st.losses)], store)
    out.result = {"train_loss_total": st.losses[-1], "line_search_gammas": [g for _, g in st.stages],
                  "loss_non_increasing": bool(np.all(np.diff(st.losses) <= 1e-12))}
    return out


def _boost_from_store(store) -> BoostState:
    n = len([k for k in store.names() if k.startswith("tree")])
    st = BoostState(store.value("base")[0])
    gam = store.value("gammas")
    st.stages = [(RegressionTree.from_array(store.value(f"tree{i}")), float(gam[i])) for i in range(n)]
    return st


def boost_evaluate(cfg, root, store) -> RunOutput:
    X, y = _regression(load_data(cfg))
    loss = LOSSES[task_param(cfg, "loss", "squared")]()
    v = float(np.mean(loss.value(_boost_from_store(store).predict(X), y)))
    return RunOutput([(0, "mean_loss", v)], None, {"mean_loss": v})


def bag_train(cfg, root) -> RunOutput:
    from ..ensemble import fit_bagged

    X, y = _regression(load_data(cfg))
    depth = int(task_param(cfg, "max_depth", 3))
    ens = fit_bagged(X, y, lambda Xb, yb: RegressionTree(depth).fit(Xb, yb),
                     int(task_param(cfg, "n_members", 10)), root.derive("train").gen)
    P = ens.member_predictions(X)
    out = RunOutput()
    for i in range(1, len(ens) + 1):
        lm, ml = bagging_gap(P[:i], y)
        out.metrics += [(i, "ensemble_loss", lm), (i, "mean_member_loss", ml)]
    out.store = ParamStore()
    _tree_params(out.store, "member", ens.members)
    lm, ml = bagging_gap(P, y)
    out.result = {"ensemble_loss": lm, "mean_member_loss": ml, "n_members": len(ens)}
    return out


def bag_evaluate(cfg, root, store) -> RunOutput:
    X, y = _regression(load_data(cfg))
    ens = EnsembleSet([RegressionTree.from_array(store.value(k)) for k in store.names()])
    v = float(np.mean((bag_predict(ens, X) - y) ** 2))
    return RunOutput([(0, "ensemble_loss", v)], None, {"ensemble_loss": v})


# tune / bound / bootstrap ----------------------------------------------------------

def tune_run(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    y = _classes(ds)
    tcfg = cfg["tune"]
    try:
        space = HyperSpace.from_config(tcfg["space"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc), "$.tune.space") from None
    vf = cfg["data"].get("val_fraction", 0.2)
    tf = cfg["data"].get("test_fraction", 0.2)
    tr, va, te = split_indices(len(ds), [vf, tf], root.derive("split").gen)
    X = ds.features
    C = int(y.max()) + 1
    steps = int(tcfg.get("steps", 100))
    spec = cfg.get("model")

    def train_fn(params, Xt, yt, seed):
        mspec = dict(spec or {})
        if "hidden" in params:
            mspec = {"hidden": [int(params["hidden"])]}
        net = build_network("energy", mspec, X.shape[1], C, "$.model")
        model = NetworkEnergy(net, C)
        r = RngStream(seed, "trial")
        store = model.init_params(ParamStore(), r.derive("init").gen)
        opt = Optimizer("adam", float(params.get("lr", 0.05)))
        train_energy_classifier(model, Xt, yt, store, _class_loss(cfg), opt, steps, 32, r.derive("train").gen)
        return lambda Z: losses.predict(model.energy_values(Z, store))

    kw = {}
    if tcfg.get("method", "random") == "smbo":
        kw = {"batch_size": int(tcfg.get("batch_size", 5)), "beta": float(tcfg.get("beta", 1e6)),
              "alpha": float(tcfg.get("alpha", 1.0))}
    rep = tune_then_report(space, train_fn, (X[tr], y[tr], tr), (X[va], y[va], va), (X[te], y[te], te),
                           int(tcfg.get("budget", 10)), root.derive("search").gen,
                           tcfg.get("retrain_on", "train"), tcfg.get("method", "random"),
                           gamma=float(task_param(cfg, "gamma", 0.95)), **kw)
    hist = rep.pop("history")
    rep.pop("tuning_indices")
    out = RunOutput()
    best = np.inf
    for i, t in enumerate(hist, start=1):
        out.metrics.append((i, "trial_risk", t.risk if t.status == "ok" else float("nan")))
        if t.status == "ok":
            best = min(best, t.risk)
        out.metrics.append((i, "best_risk", best))
    rep["disjoint_splits"] = True
    out.result = rep
    return out


def bound_run(cfg, root) -> RunOutput:
    b = cfg["bound"]
    try:
        rep = bound_report(int(b["N"]), float(b["delta"]), b.get("n_hypotheses"), b.get("kl_qp"))
    except ValueError as exc:
        raise ConfigError(str(exc), "$.bound") from None
    rows = [(0, k, v) for k, v in rep.items() if k not in ("N", "delta")]
    return RunOutput(rows, None, rep)


_STATS = {"mean": np.mean, "median": np.median, "std": lambda a: np.std(a, ddof=1)}


def bootstrap_run(cfg, root) -> RunOutput:
    ds = load_data(cfg)
    b = cfg.get("bootstrap", {})
    col = int(b.get("column", -1))
    if col == -1:
        if ds.targets is None or isinstance(ds.targets, list):
            v = ds.features[:, 0]
        else:
            v = np.asarray(ds.targets, dtype=np.float64)
    else:
        if col >= ds.features.shape[1]:
            raise ConfigError(f"column {col} out of range", "$.bootstrap.column")
        v = ds.features[:, col]
    stat = _STATS[b.get("statistic", "mean")]
    dist = bootstrap_distribution(v, stat, int(b.get("M", 1000)), root.derive("bootstrap").gen)
    gamma = float(b.get("gamma", 0.95))
    lo, hi = np.quantile(dist, [(1 - gamma) / 2, (1 + gamma) / 2])
    sd = float(np.std(dist, ddof=1))
    res = {"statistic": float(stat(v)), "bootstrap_sd": sd, "percentile_ci": [float(lo), float(hi)],
           "gamma": gamma, "N": int(len(v))}
    if b.get("statistic", "mean") == "mean":
        res["plugin_se"] = float(np.std(v, ddof=1) / np.sqrt(len(v)))
    rows = [(i, "replicate", float(x)) for i, x in enumerate(dist)]
    return RunOutput(rows, None, res)


TRAIN = {
    "classify": classify_train, "gmm": gmm_train, "kmeans": kmeans_train, "ppca": ppca_train,
    "vae": vae_train, "rbm": rbm_train_task, "ebgan": ebgan_train_task, "autoreg": autoreg_train,
    "rl": rl_train, "boost": boost_train, "bag": bag_train,
    "tune": tune_run, "bound": bound_run, "bootstrap": bootstrap_run,
}

EVALUATE = {
    "classify": classify_evaluate, "gmm": gmm_evaluate, "kmeans": kmeans_evaluate,
    "ppca": ppca_evaluate, "vae": vae_evaluate, "rbm": rbm_evaluate, "ebgan": ebgan_evaluate,
    "autoreg": autoreg_evaluate, "rl": rl_evaluate, "boost": boost_evaluate, "bag": bag_evaluate,
}

SAMPLE = {
    "gmm": gmm_sample, "ppca": ppca_sample, "vae": vae_sample, "rbm": rbm_sample,
    "ebgan": ebgan_sample, "autoreg": autoreg_sample,
}
