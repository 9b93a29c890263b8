import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ebml.autodiff import (ContractError, NonFiniteError, ParamStore, RngStream, ShapeError,
                           Tape, Tensor, backward, derive_seed, finite_diff_check, forward, ops,
                           value_and_grad)

finite = st.floats(-10, 10, allow_nan=False)


class TestTensor:
    def test_rejects_nonfinite(self):
        with pytest.raises(NonFiniteError):
            Tensor([1.0, np.nan])
        with pytest.raises(NonFiniteError):
            Tensor([[np.inf]])

    def test_rank_cap(self):
        Tensor(np.zeros((2, 2, 2)))
        with pytest.raises(ShapeError):
            Tensor(np.zeros((1, 1, 1, 1)))

    def test_copies_data(self):
        a = np.array([1.0, 2.0])
        t = Tensor(a)
        a[0] = 9
        np.testing.assert_array_equal(t.numpy(), [1.0, 2.0])
        assert t.shape == (2,) and t.size == 2


class TestForward:
    def test_identity_program(self):
        out, tape = forward(lambda i, p: i["x"], {"x": [1.0, 2.0]}, None)
        np.testing.assert_array_equal(out.value, [1.0, 2.0])

    def test_zero_relu_layer(self):
        store = ParamStore()
        store.add("U", np.zeros((3, 2)))
        store.add("c", np.zeros(2))
        out, _ = forward(lambda i, p: ops.relu(p["U"].T @ i["x"] + p["c"]), {"x": [1.0, -2.0, 3.0]}, store)
        np.testing.assert_array_equal(out.value, np.zeros(2))

    def test_two_layer_matches_straight_line(self):
        rng = np.random.default_rng(0)
        U, V = rng.normal(size=(4, 3)), rng.normal(size=(5, 4))
        c, s = rng.normal(size=3), rng.normal(size=4)
        x = rng.normal(size=5)
        store = ParamStore()
        for k, v in dict(U=U, V=V, c=c, s=s).items():
            store.add(k, v)

        def prog(i, p):
            z = ops.tanh(p["V"].T @ i["x"] + p["s"])
            return ops.sigmoid(p["U"].T @ z + p["c"])

        out, tape = forward(prog, {"x": x}, store)
        ref = 1 / (1 + np.exp(-(U.T @ np.tanh(V.T @ x + s) + c)))
        np.testing.assert_allclose(out.value, ref, rtol=1e-14)
        np.testing.assert_array_equal(tape.replay(), out.value)

    def test_replay_is_deterministic(self):
        rng = RngStream(7)
        a = forward(lambda i, p: ops.exp(i["x"]).sum(), {"x": rng.normal(size=4)}, None)[0].value
        rng = RngStream(7)
        b = forward(lambda i, p: ops.exp(i["x"]).sum(), {"x": rng.normal(size=4)}, None)[0].value
        assert a.tobytes() == b.tobytes()

    def test_shape_mismatch_names_op(self):
        with pytest.raises(ShapeError, match="matmul"):
            forward(lambda i, p: i["a"] @ i["b"], {"a": np.ones((2, 3)), "b": np.ones((2, 3))}, None)

    def test_nonfinite_op_output(self):
        with pytest.raises(NonFiniteError):
            forward(lambda i, p: ops.log(i["x"]), {"x": [0.0]}, None)


class TestBackward:
    def test_identity_derivative(self):
        out, tape = forward(lambda i, p: i["x"].sum(), {"x": 3.0}, None)
        g = backward(tape, out)
        np.testing.assert_array_equal(tape.grad(g, tape.inputs["x"]), 1.0)

    def test_product_rule(self):
        out, tape = forward(lambda i, p: i["x"] * i["y"], {"x": 2.0, "y": 3.0}, None)
        g = backward(tape, out)
        assert tape.grad(g, tape.inputs["x"]) == 3.0
        assert tape.grad(g, tape.inputs["y"]) == 2.0

    def test_non_scalar_output(self):
        out, tape = forward(lambda i, p: i["x"] * 2.0, {"x": [1.0, 2.0]}, None)
        with pytest.raises(ContractError):
            backward(tape, out)

    def test_mixed_tapes(self):
        a, b = Tape().leaf(1.0), Tape().leaf(2.0)
        with pytest.raises(ContractError):
            ops.add(a, b)

    def test_linearity(self):
        rng = np.random.default_rng(1)
        store = ParamStore()
        store.add("w", rng.normal(size=5))
        f = lambda p: ops.sum(ops.tanh(p["w"]) ** 2)  # noqa: E731
        g = lambda p: ops.logsumexp(p["w"])  # noqa: E731
        a, b = 1.7, -0.4
        _, gf = value_and_grad(f, store)
        _, gg = value_and_grad(g, store)
        _, gh = value_and_grad(lambda p: a * f(p) + b * g(p), store)
        np.testing.assert_allclose(gh["w"], a * gf["w"] + b * gg["w"], atol=1e-12)

    def test_two_layer_chain_rule(self):
        # dV = x (dz * z')^T with dz = U dh
        rng = np.random.default_rng(2)
        x = rng.normal(size=4)
        store = ParamStore()
        store.add("V", rng.normal(size=(4, 3)))
        store.add("s", rng.normal(size=3))
        store.add("U", rng.normal(size=(3, 2)))
        store.add("c", rng.normal(size=2))
        R = rng.normal(size=2)

        def f(p):
            z = ops.sigmoid(p["V"].T @ x + p["s"])
            h = ops.sigmoid(p["U"].T @ z + p["c"])
            return ops.sum(h * R)

        _, g = value_and_grad(f, store)
        V, s, U, c = (store.value(k) for k in "VsUc")
        sig = lambda a: 1 / (1 + np.exp(-a))  # noqa: E731
        z = sig(V.T @ x + s)
        h = sig(U.T @ z + c)
        dh = R * h * (1 - h)
        dz = U @ dh
        np.testing.assert_allclose(g["V"], np.outer(x, dz * z * (1 - z)), atol=1e-10)

    @given(hnp.arrays(np.float64, st.integers(1, 6), elements=finite))
    @settings(max_examples=30, deadline=None)
    def test_primitive_gradients(self, x):
        store = ParamStore()
        store.add("x", x)
        fns = [
            lambda p: ops.sum(ops.tanh(p["x"]) * ops.sigmoid(p["x"])),
            lambda p: ops.logsumexp(p["x"]),
            lambda p: ops.sum(ops.softmax(p["x"]) * np.arange(len(x))),
            lambda p: ops.sum(ops.exp(p["x"] / 10.0)),
            lambda p: ops.sum(ops.square(p["x"]) + ops.sqrt(ops.square(p["x"]) + 1.0)),
        ]
        for f in fns:
            assert finite_diff_check(f, store) < 1e-5


class TestFiniteDiff:
    def test_linear_exact(self):
        store = ParamStore()
        store.add("w", np.array([1.0, -2.0, 0.5]))
        a = np.array([3.0, 1.0, -1.0])
        assert finite_diff_check(lambda p: ops.sum(p["w"] * a), store) < 1e-9

    def test_quadratic(self):
        store = ParamStore()
        store.add("w", np.array([1.0, -2.0, 0.5]))
        assert finite_diff_check(lambda p: ops.sum(p["w"] * p["w"]), store) < 1e-8

    def test_restores_values(self):
        store = ParamStore()
        store.add("w", np.array([1.0, -2.0]))
        finite_diff_check(lambda p: ops.sum(ops.exp(p["w"])), store)
        np.testing.assert_array_equal(store.value("w"), [1.0, -2.0])

    def test_nonfinite_names_coordinate(self):
        store = ParamStore()
        store.add("w", np.array([1.0, 5e-6]))
        with pytest.raises(NonFiniteError, match=r"w.*1"):
            finite_diff_check(lambda p: ops.sum(ops.log(p["w"])), store, h=1e-5)

    def test_subsampled_needs_rng(self):
        store = ParamStore()
        store.add("w", np.zeros(4))
        with pytest.raises(ValueError):
            finite_diff_check(lambda p: p["w"].sum(), store, max_coords=2)

    def test_bad_step(self):
        store = ParamStore()
        store.add("w", np.zeros(1))
        with pytest.raises(ValueError):
            finite_diff_check(lambda p: p["w"].sum(), store, h=0.0)


class TestParamStore:
    def test_unique_names(self):
        store = ParamStore()
        store.add("a", np.zeros(2))
        with pytest.raises(KeyError):
            store.add("a", np.zeros(2))

    def test_grad_shape(self):
        store = ParamStore()
        store.add("a", np.zeros((2, 3)))
        assert store.grad("a").shape == (2, 3)
        with pytest.raises(ShapeError):
            store.set_grad("a", np.zeros(3))

    def test_copy_is_independent(self):
        store = ParamStore()
        store.add("a", np.ones(2))
        c = store.copy()
        c.value("a")[0] = 5.0
        assert store.value("a")[0] == 1.0


class TestRng:
    def test_same_seed_same_stream(self):
        a, b = RngStream(3), RngStream(3)
        np.testing.assert_array_equal(a.normal(size=5), b.normal(size=5))
        assert a.counter == 1

    def test_derived_streams_differ(self):
        root = RngStream(3)
        x, y = root.derive("a").normal(size=3), root.derive("b").normal(size=3)
        assert not np.array_equal(x, y)
        assert derive_seed(3, "a") == derive_seed(3, "a")
