"""Recurrent cells (LSTM, GRU, SRU) and small helpers shared by the modules.

Weights are stored input-major: ``y = x @ W + b``.
"""

from __future__ import annotations

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor


def uniform(rng: np.random.Generator, shape, r: float) -> np.ndarray:
    return rng.uniform(-r, r, size=shape)


def add_linear(ps, rng, name: str, n_in: int, n_out: int, r: float, bias: bool = True) -> None:
    ps.add(f"{name}.W", uniform(rng, (n_in, n_out), r))
    if bias:
        ps.add(f"{name}.b", uniform(rng, (n_out,), r))


def linear(ps, name: str, x: Tensor) -> Tensor:
    y = x @ ps[f"{name}.W"]
    b = f"{name}.b"
    return y + ps[b] if b in ps else y


def const(x, dtype=None) -> Tensor:
    return Tensor(np.asarray(x, dtype=dtype or nx.autodiff.default_dtype()))


# ---------------------------------------------------------------------------
# LSTM


def add_lstm(ps, rng, name: str, n_in: int, hidden: int, r: float) -> None:
    ps.add(f"{name}.W", uniform(rng, (n_in, 4 * hidden), r))
    ps.add(f"{name}.U", uniform(rng, (hidden, 4 * hidden), r))
    b = uniform(rng, (4 * hidden,), r)
    b[hidden:2 * hidden] = 1.0  # forget gate
    ps.add(f"{name}.b", b)


def _sig(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_cell(xw: Tensor, h: Tensor, c: Tensor, U: Tensor, hidden: int,
              mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
    """One LSTM step given the precomputed input projection ``xw = x @ W + b``.

    Gate order along the 4H axis: input, forget, output, candidate. Rows with
    ``mask == 0`` ([N,1]) keep their previous (h, c). Fused into a single op
    with a hand-written backward; the tests check it against the composite form.
    """
    H = hidden
    N = xw.shape[0]
    hb = h.data if h.shape == (N, H) else np.broadcast_to(h.data, (N, H))
    cb = c.data if c.shape == (N, H) else np.broadcast_to(c.data, (N, H))
    z = xw.data + hb @ U.data
    i, f, o = _sig(z[:, :H]), _sig(z[:, H:2 * H]), _sig(z[:, 2 * H:3 * H])
    g = np.tanh(z[:, 3 * H:])
    c_new = f * cb + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    if mask is not None:
        h_new = mask * h_new + (1.0 - mask) * hb
        c_new = mask * c_new + (1.0 - mask) * cb
    out = np.concatenate([h_new, c_new], axis=1)

    def backward(grad):
        gh, gc = grad[:, :H], grad[:, H:]
        gh_in = gc_in = 0.0
        if mask is not None:
            gh_in, gc_in = (1.0 - mask) * gh, (1.0 - mask) * gc
            gh, gc = mask * gh, mask * gc
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate([dc * g * i * (1.0 - i), dc * cb * f * (1.0 - f), gh * tc * o * (1.0 - o),
                             dc * i * (1.0 - g * g)], axis=1)
        dh = dz @ U.data.T + gh_in
        dcell = dc * f + gc_in
        return (dz, nx.unbroadcast(dh, h.shape), nx.unbroadcast(dcell, c.shape),
                hb.T @ dz if U.requires_grad else None)

    hc = nx.custom_op(out, (xw, h, c, U), backward, "lstm_cell")
    return hc[:, :H], hc[:, H:]


def lstm_step(ps, name: str, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    U = ps[f"{name}.U"]
    xw = x @ ps[f"{name}.W"] + ps[f"{name}.b"]
    return lstm_cell(xw, h, c, U, U.shape[0])


def lstm_sequence(ps, name: str, x: Tensor, mask: np.ndarray, reverse: bool = False) -> list[Tensor]:
    """Run an LSTM over ``x`` [N,T,D]; padded steps (mask 0) carry the state through unchanged.

    Padding sits at the end of each row, so the reverse pass starts every row
    from the zero state at its last real token.
    """
    U = ps[f"{name}.U"]
    H = U.shape[0]
    N, T = mask.shape
    xw = x @ ps[f"{name}.W"] + ps[f"{name}.b"]
    h = const(np.zeros((N, H)))
    c = const(np.zeros((N, H)))
    outs: list[Tensor | None] = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        m = mask[:, t:t + 1]
        if not m.any():
            outs[t] = h
            continue
        h, c = lstm_cell(xw[:, t], h, c, U, H, None if m.all() else m)
        outs[t] = h
    return outs


def bilstm(ps, name: str, x: Tensor, mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """Bi-LSTM with summed directions. Returns (states [N,T,H], state at last real token [N,H])."""
    fwd = lstm_sequence(ps, f"{name}.fwd", x, mask)
    bwd = lstm_sequence(ps, f"{name}.bwd", x, mask, reverse=True)
    states = nx.stack(fwd, axis=1) + nx.stack(bwd, axis=1)
    lengths = mask.sum(1).astype(int)
    last = states[np.arange(mask.shape[0]), np.maximum(lengths - 1, 0)]
    return states, last


# ---------------------------------------------------------------------------
# GRU


def add_gru(ps, rng, name: str, n_in: int, hidden: int, r: float) -> None:
    ps.add(f"{name}.W", uniform(rng, (n_in, 3 * hidden), r))
    ps.add(f"{name}.U", uniform(rng, (hidden, 3 * hidden), r))
    ps.add(f"{name}.b", uniform(rng, (3 * hidden,), r))


def gru_step(ps, name: str, x: Tensor, h: Tensor) -> Tensor:
    U = ps[f"{name}.U"]
    H = U.shape[0]
    xw = x @ ps[f"{name}.W"] + ps[f"{name}.b"]
    hu = h @ U[:, : 2 * H]
    rz = nx.sigmoid(xw[..., : 2 * H] + hu)
    r = rz[..., :H]
    z = rz[..., H:]
    n = nx.tanh(xw[..., 2 * H:] + (r * h) @ U[:, 2 * H:])
    return z * h + (1.0 - z) * n


# ---------------------------------------------------------------------------
# SRU: a GRU whose update gate also sees a coarse conditioning vector g
#   r = sig(x W_r + s U_r)
#   z = sig(x W_z + s U_z + g V_z)
#   s~ = tanh(x W_s + (r*s) U_s)
#   s' = z*s + (1-z)*s~


def add_sru(ps, rng, name: str, n_in: int, n_cond: int, hidden: int, r: float) -> None:
    ps.add(f"{name}.W", uniform(rng, (n_in, 3 * hidden), r))   # [W_r | W_z | W_s]
    ps.add(f"{name}.U_rz", uniform(rng, (hidden, 2 * hidden), r))
    ps.add(f"{name}.U_s", uniform(rng, (hidden, hidden), r))
    ps.add(f"{name}.V_z", uniform(rng, (n_cond, hidden), r))


def sru_cell(xw: Tensor, gv: Tensor, s: Tensor, U_rz: Tensor, U_s: Tensor,
             mask: np.ndarray | None = None) -> Tensor:
    """One SRU step given ``xw = x @ W`` and ``gv = g @ V_z`` (fused, hand-written backward)."""
    H = U_s.shape[0]
    N = xw.shape[0]
    sb = s.data if s.shape == (N, H) else np.broadcast_to(s.data, (N, H))
    x = xw.data
    su = sb @ U_rz.data
    r = _sig(x[:, :H] + su[:, :H])
    z = _sig(x[:, H:2 * H] + su[:, H:] + gv.data)
    rs = r * sb
    cand = np.tanh(x[:, 2 * H:] + rs @ U_s.data)
    out = z * sb + (1.0 - z) * cand
    if mask is not None:
        out = mask * out + (1.0 - mask) * sb

    def backward(g):
        ds = 0.0
        if mask is not None:
            ds = (1.0 - mask) * g
            g = mask * g
        da = g * (1.0 - z) * (1.0 - cand * cand)
        d_rs = da @ U_s.data.T
        dpr = d_rs * sb * r * (1.0 - r)
        dpz = g * (sb - cand) * z * (1.0 - z)
        dsu = np.concatenate([dpr, dpz], axis=1)
        ds = ds + g * z + d_rs * r + dsu @ U_rz.data.T
        return (np.concatenate([dpr, dpz, da], axis=1), nx.unbroadcast(dpz, gv.shape), nx.unbroadcast(ds, s.shape),
                sb.T @ dsu if U_rz.requires_grad else None, rs.T @ da if U_s.requires_grad else None)

    return nx.custom_op(out, (xw, gv, s, U_rz, U_s), backward, "sru_cell")


def sru_sequence(ps, name: str, x: Tensor, g: Tensor, mask: np.ndarray) -> tuple[Tensor, list[Tensor]]:
    """Run the SRU over ``x`` [N,T,D] conditioned on ``g`` [N,G]; returns (final state, per-step states)."""
    U_rz, U_s = ps[f"{name}.U_rz"], ps[f"{name}.U_s"]
    H = U_s.shape[0]
    N, T = mask.shape
    xw = x @ ps[f"{name}.W"]
    gv = g @ ps[f"{name}.V_z"]
    s = const(np.zeros((N, H)))
    outs = []
    for t in range(T):
        m = mask[:, t:t + 1]
        if m.any():
            s = sru_cell(xw[:, t], gv, s, U_rz, U_s, None if m.all() else m)
        outs.append(s)
    return s, outs


def additive_scores(query_proj: Tensor, keys_proj: Tensor, v: Tensor) -> Tensor:
    """v^T tanh(q + k_i) for every key: query [B,A], keys [B,N,A], v [A,1] -> [B,N] (single fused op)."""
    B, A = query_proj.shape
    hidden = np.tanh(keys_proj.data + query_proj.data[:, None, :])
    out = (hidden @ v.data)[..., 0]

    def backward(g):
        dpre = g[..., None] * v.data[:, 0] * (1.0 - hidden * hidden)   # [B,N,A]
        gq = dpre.sum(axis=1)
        gk = dpre if keys_proj.requires_grad else None
        gv = np.einsum("bna,bn->a", hidden, g)[:, None] if v.requires_grad else None
        return gq, gk, gv

    return nx.custom_op(out, (query_proj, keys_proj, v), backward, "additive_scores")


def bmv(weights: Tensor, values: Tensor) -> Tensor:
    """Batched weighted sum: weights [B,N], values [B,N,D] -> [B,D]."""
    w, vals = weights.data, values.data
    out = (w[:, None, :] @ vals)[:, 0, :]

    def backward(g):
        gw = (vals @ g[:, :, None])[..., 0] if weights.requires_grad else None
        gv = w[:, :, None] * g[:, None, :] if values.requires_grad else None
        return gw, gv

    return nx.custom_op(out, (weights, values), backward, "bmv")
