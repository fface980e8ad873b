import numpy as np
import pytest

from uts import numerics as nx
from uts.model import layers
from uts.numerics import ParamStore, Tensor

from conftest import numeric_grad


def leaf(a):
    return Tensor(np.array(a, dtype=np.float64), requires_grad=True)


def lstm_reference(xw, h, c, U, H, mask=None):
    z = xw + h @ U
    i, f, o = nx.sigmoid(z[:, :H]), nx.sigmoid(z[:, H:2 * H]), nx.sigmoid(z[:, 2 * H:3 * H])
    g = nx.tanh(z[:, 3 * H:])
    c2 = f * c + i * g
    h2 = o * nx.tanh(c2)
    if mask is not None:
        h2 = h2 * mask + h * (1.0 - mask)
        c2 = c2 * mask + c * (1.0 - mask)
    return h2, c2


def sru_reference(xw, gv, s, U_rz, U_s, mask=None):
    H = U_s.shape[0]
    su = s @ U_rz
    r = nx.sigmoid(xw[:, :H] + su[:, :H])
    z = nx.sigmoid(xw[:, H:2 * H] + su[:, H:] + gv)
    cand = nx.tanh(xw[:, 2 * H:] + (r * s) @ U_s)
    out = z * s + (1.0 - z) * cand
    if mask is not None:
        out = out * mask + s * (1.0 - mask)
    return out


def grads_of(fn, inputs, w):
    for t in inputs:
        t.grad = None
    outs = fn(*inputs)
    outs = outs if isinstance(outs, tuple) else (outs,)
    loss = sum((o * wi).sum() for o, wi in zip(outs, w))
    nx.backward(loss)
    return [o.data for o in outs], [t.grad.copy() for t in inputs]


@pytest.mark.parametrize("masked", [False, True])
def test_fused_lstm_matches_composite(rng, masked):
    N, H = 4, 3
    mask = np.array([[1.0], [0.0], [1.0], [0.0]]) if masked else None
    inputs = [leaf(rng.normal(size=(N, 4 * H))), leaf(rng.normal(size=(N, H))), leaf(rng.normal(size=(N, H))),
              leaf(rng.normal(size=(H, 4 * H)))]
    w = [rng.normal(size=(N, H)), rng.normal(size=(N, H))]
    out_f, g_f = grads_of(lambda *a: layers.lstm_cell(*a, H, mask), inputs, w)
    out_r, g_r = grads_of(lambda *a: lstm_reference(*a, H, mask), inputs, w)
    for a, b in zip(out_f + g_f, out_r + g_r):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_fused_lstm_broadcast_initial_state(rng):
    N, H = 3, 2
    inputs = [leaf(rng.normal(size=(N, 4 * H))), leaf(rng.normal(size=(1, H))), leaf(rng.normal(size=(1, H))),
              leaf(rng.normal(size=(H, 4 * H)))]
    w = [rng.normal(size=(N, H)), rng.normal(size=(N, H))]
    out_f, g_f = grads_of(lambda *a: layers.lstm_cell(*a, H), inputs, w)
    out_r, g_r = grads_of(lambda *a: lstm_reference(*a, H), inputs, w)
    for a, b in zip(out_f + g_f, out_r + g_r):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("masked", [False, True])
def test_fused_sru_matches_composite(rng, masked):
    N, H = 4, 3
    mask = np.array([[1.0], [1.0], [0.0], [1.0]]) if masked else None
    inputs = [leaf(rng.normal(size=(N, 3 * H))), leaf(rng.normal(size=(N, H))), leaf(rng.normal(size=(N, H))),
              leaf(rng.normal(size=(H, 2 * H))), leaf(rng.normal(size=(H, H)))]
    w = [rng.normal(size=(N, H))]
    out_f, g_f = grads_of(lambda *a: layers.sru_cell(*a, mask=mask), inputs, w)
    out_r, g_r = grads_of(lambda *a: sru_reference(*a, mask), inputs, w)
    for a, b in zip(out_f + g_f, out_r + g_r):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_additive_scores_and_bmv_match_composite(rng):
    B, N, A, D = 2, 5, 3, 4
    q, k, v = leaf(rng.normal(size=(B, A))), leaf(rng.normal(size=(B, N, A))), leaf(rng.normal(size=(A, 1)))
    w = [rng.normal(size=(B, N))]
    out_f, g_f = grads_of(layers.additive_scores, [q, k, v], w)
    out_r, g_r = grads_of(lambda q, k, v: (nx.tanh(k + q.reshape(B, 1, A)) @ v).reshape(B, N), [q, k, v], w)
    for a, b in zip(out_f + g_f, out_r + g_r):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    wt, vals = leaf(rng.normal(size=(B, N))), leaf(rng.normal(size=(B, N, D)))
    w = [rng.normal(size=(B, D))]
    out_f, g_f = grads_of(layers.bmv, [wt, vals], w)
    out_r, g_r = grads_of(lambda a, b: (a.reshape(B, N, 1) * b).sum(axis=1), [wt, vals], w)
    for a, b in zip(out_f + g_f, out_r + g_r):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def sru_store(rng, D, G, H, r=0.5):
    ps = ParamStore(np.float64)
    layers.add_sru(ps, rng, "sru", D, G, H, r)
    return ps


def test_sru_gate_extremes(rng):
    D = H = 3
    ps = sru_store(rng, D, 1, H)
    x = Tensor(rng.normal(size=(1, 4, D)))
    mask = np.ones((1, 4))
    # z -> 1 keeps the zero initial state frozen
    ps["sru.V_z"].data[:] = 200.0
    final, _ = layers.sru_sequence(ps, "sru", x, Tensor(np.ones((1, 1))), mask)
    np.testing.assert_allclose(final.data, 0.0, atol=1e-12)
    # z -> 0 keeps only the candidate, so the last state depends on the last input through tanh
    ps["sru.V_z"].data[:] = -200.0
    final, states = layers.sru_sequence(ps, "sru", x, Tensor(np.ones((1, 1))), mask)
    W, U_rz, U_s = ps["sru.W"].data, ps["sru.U_rz"].data, ps["sru.U_s"].data
    s = np.zeros((1, H))
    for t in range(4):
        xw = x.data[:, t] @ W
        r = 1 / (1 + np.exp(-(xw[:, :H] + s @ U_rz[:, :H])))
        s = np.tanh(xw[:, 2 * H:] + (r * s) @ U_s)
    np.testing.assert_allclose(final.data, s, atol=1e-12)


def test_sru_single_word_is_one_step(rng):
    ps = sru_store(rng, 2, 2, 2)
    x, g = rng.normal(size=(1, 1, 2)), rng.normal(size=(1, 2))
    final, _ = layers.sru_sequence(ps, "sru", Tensor(x), Tensor(g), np.ones((1, 1)))
    direct = layers.sru_cell(Tensor(x[:, 0] @ ps["sru.W"].data), Tensor(g @ ps["sru.V_z"].data),
                             Tensor(np.zeros((1, 2))), ps["sru.U_rz"], ps["sru.U_s"])
    np.testing.assert_allclose(final.data, direct.data)


def test_lstm_sequence_padding_carries_state(rng):
    ps = ParamStore(np.float64)
    layers.add_lstm(ps, rng, "l", 2, 3, 0.5)
    x = rng.normal(size=(2, 4, 2))
    mask = np.array([[1, 1, 0, 0], [1, 1, 1, 1]], dtype=float)
    outs = layers.lstm_sequence(ps, "l", Tensor(x), mask)
    np.testing.assert_array_equal(outs[1].data[0], outs[3].data[0])
    alone = layers.lstm_sequence(ps, "l", Tensor(x[:1, :2]), np.ones((1, 2)))
    np.testing.assert_allclose(alone[-1].data[0], outs[3].data[0], atol=1e-14)


def test_bilstm_reverse_starts_at_last_real_token(rng):
    ps = ParamStore(np.float64)
    layers.add_lstm(ps, rng, "b.fwd", 2, 3, 0.5)
    layers.add_lstm(ps, rng, "b.bwd", 2, 3, 0.5)
    x = rng.normal(size=(1, 5, 2))
    padded, last = layers.bilstm(ps, "b", Tensor(x), np.array([[1, 1, 1, 0, 0]], dtype=float))
    exact, last2 = layers.bilstm(ps, "b", Tensor(x[:, :3]), np.ones((1, 3)))
    np.testing.assert_allclose(padded.data[:, :3], exact.data, atol=1e-14)
    np.testing.assert_allclose(last.data, last2.data, atol=1e-14)


def test_lstm_forget_bias_initialized_to_one(rng):
    ps = ParamStore(np.float64)
    layers.add_lstm(ps, rng, "l", 2, 3, 0.02)
    b = ps["l.b"].data
    np.testing.assert_array_equal(b[3:6], 1.0)
    assert np.abs(np.delete(b, range(3, 6))).max() <= 0.02


def test_gru_step_gradients(rng):
    ps = ParamStore(np.float64)
    layers.add_gru(ps, rng, "g", 3, 2, 0.5)
    x, h = rng.normal(size=(2, 3)), leaf(rng.normal(size=(2, 2)))
    w = rng.normal(size=(2, 2))
    nx.backward((layers.gru_step(ps, "g", Tensor(x), h) * w).sum())

    def f():
        with nx.no_grad():
            return float((layers.gru_step(ps, "g", Tensor(x), Tensor(h.data)).data * w).sum())

    np.testing.assert_allclose(h.grad, numeric_grad(f, h.data), rtol=1e-6, atol=1e-8)
