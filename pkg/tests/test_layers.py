import math

import numpy as np
import pytest

from flowids import layers
from flowids.gradcheck import layer_gradient_error
from flowids.tensor_core import ShapeError, make_rng


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def lstm_scalar_oracle(W, U, b, x):
    """Step-by-step LSTM with explicit per-unit scalar loops."""
    T, d_in = x.shape
    n = U.shape[0]
    h = [0.0] * n
    c = [0.0] * n
    outs = []
    for t in range(T):
        z = []
        for j in range(4 * n):
            acc = b[j]
            for k in range(d_in):
                acc += x[t, k] * W[k, j]
            for k in range(n):
                acc += h[k] * U[k, j]
            z.append(acc)
        new_h = []
        for j in range(n):
            i_g, f_g = _sig(z[j]), _sig(z[n + j])
            g_g, o_g = math.tanh(z[2 * n + j]), _sig(z[3 * n + j])
            c[j] = f_g * c[j] + i_g * g_g
            new_h.append(o_g * math.tanh(c[j]))
        h = new_h
        outs.append(list(h))
    return np.array(outs)


def attention_scalar_oracle(p, H):
    T, d = H.shape
    u = p.Wt.shape[1]
    e = np.zeros((T, T))
    for t in range(T):
        for s in range(T):
            acc = p.ba[0]
            for j in range(u):
                pre = p.bh[j]
                for k in range(d):
                    pre += H[t, k] * p.Wt[k, j] + H[s, k] * p.Wx[k, j]
                acc += p.Wa[j, 0] * math.tanh(pre)
            e[t, s] = _sig(acc)
    out = np.zeros((T, d))
    for t in range(T):
        denom = sum(math.exp(e[t, s]) for s in range(T))
        for s in range(T):
            a = math.exp(e[t, s]) / denom
            for k in range(d):
                out[t, k] += a * H[s, k]
    return out


def randomized_attention(rng, d, u):
    p = layers.init_attention(d, u, rng)
    p.bh[:] = rng.normal(size=u)
    p.ba[:] = rng.normal()
    return p


class TestLstm:
    def test_zero_weights_give_zero_output(self, rng):
        p = layers.LstmParams(np.zeros((3, 20)), np.zeros((5, 20)), np.zeros(20))
        out, _ = layers.lstm_forward(p, rng.standard_normal((4, 3)))
        assert out.shape == (4, 5) and not out.any()

    def test_forget_bias_alone_creates_no_state(self, rng):
        p = layers.LstmParams(np.zeros((3, 20)), np.zeros((5, 20)), np.zeros(20))
        p.b[5:10] = 1.0
        out, _ = layers.lstm_forward(p, rng.standard_normal((1, 3)), return_sequences=False)
        assert not out.any()

    def test_init_layout(self):
        p = layers.init_lstm(3, 5, make_rng(0))
        assert p.W.shape == (3, 20) and p.U.shape == (5, 20) and p.b.shape == (20,)
        assert np.all(p.b[5:10] == 1.0) and not p.b[:5].any() and not p.b[10:].any()
        assert p.n_params == 4 * 5 * (3 + 5 + 1)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_scalar_oracle(self, seed):
        r = make_rng(seed)
        p = layers.init_lstm(3, 5, r)
        p.b[:] += r.normal(0, 0.5, 20)
        x = r.standard_normal((4, 3))
        out, _ = layers.lstm_forward(p, x)
        np.testing.assert_allclose(out, lstm_scalar_oracle(p.W, p.U, p.b, x), rtol=0, atol=1e-12)
        last, _ = layers.lstm_forward(p, x, return_sequences=False)
        np.testing.assert_array_equal(last, out[-1])

    def test_batch_rows_are_independent_sequences(self, rng):
        p = layers.init_lstm(2, 3, rng)
        xs = rng.standard_normal((3, 5, 2))
        batched, _ = layers.lstm_forward(p, xs)
        for i in range(3):
            np.testing.assert_allclose(batched[i], layers.lstm_forward(p, xs[i])[0], atol=1e-14)

    def test_hidden_state_bounded(self, rng):
        p = layers.init_lstm(2, 6, rng)
        p.W *= 50
        out, cache = layers.lstm_forward(p, rng.standard_normal((30, 2)) * 10)
        assert np.all(np.abs(out) <= 1.0)
        assert np.all(np.abs(cache["tanh_c"]) <= 1.0)

    def test_shape_errors(self, rng):
        p = layers.init_lstm(3, 5, rng)
        with pytest.raises(ShapeError):
            layers.lstm_forward(p, np.zeros((4, 2)))
        _, cache = layers.lstm_forward(p, np.zeros((4, 3)))
        with pytest.raises(ShapeError):
            layers.lstm_backward(p, cache, np.zeros((4, 4)))


class TestAttention:
    def test_param_count(self):
        p = layers.init_attention(256, 32, make_rng(0))
        assert p.n_params == 2 * 256 * 32 + 2 * 32 + 1 == 16449

    def test_zero_emission_gives_time_mean(self, rng):
        p = randomized_attention(rng, 4, 3)
        p.Wa[:] = 0
        p.ba[:] = 0
        H = rng.standard_normal((5, 4))
        out, cache = layers.attention_forward(p, H)
        np.testing.assert_allclose(cache["A"], 0.2)
        np.testing.assert_allclose(out, np.broadcast_to(H.mean(axis=0), H.shape), atol=1e-12)

    def test_single_step_is_identity(self, rng):
        p = randomized_attention(rng, 4, 2)
        H = rng.standard_normal((1, 4))
        out, cache = layers.attention_forward(p, H)
        assert cache["A"].tolist() == [[[1.0]]]
        np.testing.assert_array_equal(out, H)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_scalar_oracle(self, seed):
        r = make_rng(seed)
        p = randomized_attention(r, 4, 2)
        H = r.standard_normal((3, 4))
        out, _ = layers.attention_forward(p, H)
        np.testing.assert_allclose(out, attention_scalar_oracle(p, H), rtol=0, atol=1e-12)

    def test_weights_row_stochastic(self, rng):
        p = randomized_attention(rng, 6, 4)
        _, cache = layers.attention_forward(p, rng.standard_normal((2, 7, 6)) * 5)
        A = cache["A"]
        np.testing.assert_allclose(A.sum(axis=-1), 1.0, atol=1e-6)
        assert A.min() >= 0 and A.max() <= 1

    def test_duplicated_timestep_uniform_case(self, rng):
        # with uniform weights, duplicating a step and averaging equals the weighted mean
        p = randomized_attention(rng, 3, 2)
        p.Wa[:] = 0
        H = rng.standard_normal((4, 3))
        H_dup = np.vstack([H, H[1:2]])
        out, _ = layers.attention_forward(p, H_dup)
        expected = (H.sum(axis=0) + H[1]) / 5
        np.testing.assert_allclose(out, np.broadcast_to(expected, out.shape), atol=1e-12)


class TestDense:
    def test_identity(self, rng):
        x = rng.uniform(0, 1, (3, 4))
        out, _ = layers.dense_forward(layers.DenseParams(np.eye(4), np.zeros(4)), x, "relu")
        np.testing.assert_array_equal(out, x)

    def test_zero_input_sigmoid(self):
        p = layers.DenseParams(np.ones((3, 2)), np.zeros(2))
        out, _ = layers.dense_forward(p, np.zeros((2, 3)), "sigmoid")
        assert np.all(out == 0.5)

    def test_hand_evaluation(self):
        p = layers.DenseParams(np.array([[1.0, -1.0, 0.5], [2.0, 0.0, -1.0]]), np.array([0.5, 0.0, -0.5]))
        x = np.array([[1.0, 2.0], [-1.0, 0.5]])
        out, _ = layers.dense_forward(p, x, "relu")
        # row 0: [1+4+0.5, -1+0, 0.5-2-0.5] ; row 1: [-1+1+0.5, 1, -0.5-0.5-0.5]
        np.testing.assert_allclose(out, [[5.5, 0.0, 0.0], [0.5, 1.0, 0.0]])

    def test_linear_weight_gradient_closed_form(self, rng):
        p = layers.init_dense(3, 2, rng)
        x = rng.standard_normal((4, 3))
        g_out = rng.standard_normal((4, 2))
        _, cache = layers.dense_forward(p, x, "linear")
        grads, dx = layers.dense_backward(p, cache, g_out)
        np.testing.assert_array_equal(grads.W, x.T @ g_out)
        np.testing.assert_array_equal(dx, g_out @ p.W.T)


@pytest.mark.parametrize("make,x_shape,kw", [
    (lambda r: layers.init_lstm(3, 5, r), (4, 3), {}),
    (lambda r: layers.init_lstm(3, 5, r), (4, 3), {"return_sequences": False}),
    (lambda r: randomized_attention(r, 4, 2), (3, 4), {}),
    (lambda r: layers.init_dense(3, 4, r), (2, 3), {"kind": "relu"}),
    (lambda r: layers.init_dense(3, 4, r), (2, 3), {"kind": "sigmoid"}),
])
def test_zero_upstream_gradient(make, x_shape, kw, rng):
    p = make(rng)
    fwd = {layers.LstmParams: layers.lstm_forward, layers.AttentionParams: layers.attention_forward,
           layers.DenseParams: layers.dense_forward}[type(p)]
    out, cache = fwd(p, rng.standard_normal(x_shape), **kw)
    grads, dx = layers.backward(p, cache, np.zeros_like(out))
    assert not dx.any()
    assert all(not g.any() for g in grads.named_arrays().values())


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("case", ["lstm_seq", "lstm_last", "attention", "dense_relu", "dense_sigmoid"])
def test_finite_differences(case, seed):
    r = make_rng(100 + seed)
    if case.startswith("lstm"):
        p, x = layers.init_lstm(3, 5, r), r.standard_normal((4, 3))
        kw = {"return_sequences": case == "lstm_seq"}
    elif case == "attention":
        p, x, kw = randomized_attention(r, 4, 2), r.standard_normal((3, 4)), {}
    else:
        p, x = layers.init_dense(3, 4, r), r.standard_normal((2, 3))
        p.b[:] = r.normal(size=4)
        kw = {"kind": case.split("_")[1]}
    assert layer_gradient_error(p, x, r, step=1e-6, **kw) < 1e-5
