"""Coupling the generator's event attention to the extractor's sentence attention.

The per-step event attention beta [T_y, E] is average-pooled down to the
number of selection steps, renormalised, and copied out to sentence columns.
At every selection step the top-K sentences by beta_hat define the set the
two branches should agree on:

    L_inc = -(1/T_sel) sum_t log( (1/K) sum_{s in top-K(beta_hat_t)} beta_hat_t[s] * beta_tiled_t[s] )
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .batch import pool_matrix
from .layers import const

EPS = 1e-10


@dataclass
class UnifiedAttention:
    gen_event_attn: np.ndarray  # [T_y, E]
    compressed: np.ndarray      # [T_sel, E]
    tiled: np.ndarray           # [T_sel, S]
    ext_attn: np.ndarray        # [T_sel, S]
    loss: float


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else const(x)


def compress(gen_event_attn, n_select_steps: int) -> Tensor:
    """[T_y, E] -> [n_select_steps, E] by contiguous window averaging, rows renormalised."""
    a = _as_tensor(gen_event_attn)
    if a.data.size == 0:
        raise ValueError("empty attention map")
    P = pool_matrix(a.shape[0], n_select_steps)
    pooled = const(P) @ a
    return pooled / pooled.sum(axis=-1, keepdims=True)


def tile_matrix(sentence_counts) -> np.ndarray:
    """[E, S] 0/1 matrix sending event i to its sentence_counts[i] sentence columns."""
    counts = [int(c) for c in sentence_counts]
    if any(c < 0 for c in counts):
        raise ValueError("negative sentence count")
    M = np.zeros((len(counts), sum(counts)))
    s = 0
    for e, c in enumerate(counts):
        M[e, s:s + c] = 1.0
        s += c
    return M


def tile(compressed, sentence_counts, n_sentences: int | None = None) -> Tensor:
    c = _as_tensor(compressed)
    M = tile_matrix(sentence_counts)
    if M.shape[0] != c.shape[-1]:
        raise ValueError(f"{M.shape[0]} sentence counts for {c.shape[-1]} events")
    if n_sentences is not None and M.shape[1] != n_sentences:
        raise ValueError(f"sentence counts sum to {M.shape[1]}, expected {n_sentences}")
    return c @ const(M)


def topk_mask(weights: np.ndarray, K: int, valid: np.ndarray | None = None) -> np.ndarray:
    """0/1 mask of the K largest entries along the last axis; ties go to the lower index."""
    w = np.where(valid > 0, weights, -np.inf) if valid is not None else weights
    order = np.argsort(-w, axis=-1, kind="stable")
    mask = np.zeros_like(weights, dtype=float)
    np.put_along_axis(mask, order[..., :K], 1.0, axis=-1)
    if valid is not None:
        mask *= valid > 0
    return mask


def loss_inc(tiled, ext_attn, K: int = 3) -> Tensor:
    """Single example: both maps [T_sel, S]."""
    t, x = _as_tensor(tiled), _as_tensor(ext_attn)
    if t.shape != x.shape:
        raise ValueError(f"map shapes differ: {t.shape} vs {x.shape}")
    if K < 1:
        raise ValueError("K must be >= 1")
    S = t.shape[-1]
    if K > S:
        warnings.warn(f"K={K} exceeds {S} sentences; using K={S}", stacklevel=2)
        K = S
    mask = topk_mask(x.data, K)
    agree = (x * t * mask).sum(axis=-1) * (1.0 / K)
    return -nx.log(nx.clamp_min(agree, EPS)).mean()


def batch_loss_inc(beta_steps: list[Tensor], beta_hat_steps: list[Tensor], batch, K: int = 3) -> Tensor:
    """Per-example L_inc [B] from teacher-forced maps of a padded batch.

    Selection steps are the steps where an oracle sentence is chosen (the
    trailing STOP step is excluded). Examples without any selected sentence
    contribute 0.
    """
    B = batch.size
    T_dec = len(beta_steps)
    beta = nx.stack(beta_steps, axis=1)                                  # [B,T,E]
    n_sel = batch.n_select
    X = max(int(n_sel.max()), 1)
    beta_hat = nx.stack(beta_hat_steps[:X], axis=1)                      # [B,X,S]
    S = beta_hat.shape[-1]
    pool = np.zeros((B, X, T_dec))
    step_mask = np.zeros((B, X))
    dec_len = batch.dec_mask.sum(1).astype(int)
    for b in range(B):
        k = int(n_sel[b])
        if k == 0:
            continue
        T_b = min(int(dec_len[b]), T_dec)
        k_eff = min(k, T_b)
        pool[b, :k_eff, :T_b] = pool_matrix(T_b, k_eff)
        step_mask[b, :k_eff] = 1.0
    pooled = const(pool) @ beta                                          # [B,X,E]
    norm = np.where(step_mask[..., None] > 0, 0.0, 1.0)                  # keep padded rows finite
    compressed = pooled / (pooled.sum(axis=-1, keepdims=True) + norm)
    tiled = compressed @ const(batch.tile)                               # [B,X,S]
    n_sents = batch.sent_mask.sum(1).astype(int)
    if (n_sents < K).any():
        warnings.warn(f"K={K} exceeds the sentence count of some examples; clamped per example", stacklevel=2)
    k_eff = np.minimum(K, n_sents).astype(float)                         # [B]
    mask = np.zeros((B, X, S))
    for b in range(B):
        kb = int(k_eff[b])
        mask[b] = topk_mask(beta_hat.data[b], kb, batch.sent_mask[b][None, :].repeat(X, 0))
    agree = (beta_hat * tiled * mask).sum(axis=-1) * (1.0 / k_eff).reshape(B, 1)
    nll = -nx.log(nx.clamp_min(agree, EPS)) * step_mask
    return nll.sum(axis=-1) * (1.0 / np.maximum(step_mask.sum(1), 1.0))


def unified_attention(beta: np.ndarray, beta_hat: np.ndarray, sentence_counts, K: int = 3) -> UnifiedAttention:
    """numpy view of the full pipeline for one example (for reports and plots)."""
    with nx.no_grad():
        comp = compress(beta, beta_hat.shape[0])
        tiled = tile(comp, sentence_counts, beta_hat.shape[1])
        loss = loss_inc(tiled, beta_hat, K)
    return UnifiedAttention(np.asarray(beta), comp.data, tiled.data, np.asarray(beta_hat), float(loss.data))
