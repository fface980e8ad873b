"""Relation edges between events and relation-aware self-attention (one layer, one head)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .config import ModelConfig
from .layers import uniform


@dataclass
class GlobalEvents:
    b: Tensor        # [B,E,H]
    alpha: Tensor    # [B,E,E] attention of event i over events j
    edges: Tensor    # [B,E,E,H] r^{i,j}


def add_params(ps, rng, cfg: ModelConfig) -> None:
    H, r = cfg.hidden_dim, cfg.init_range
    ps.add("graph.mlp.W1", uniform(rng, (2 * H, H), r))
    ps.add("graph.mlp.b1", uniform(rng, (H,), r))
    ps.add("graph.mlp.W2", uniform(rng, (H, H), r))
    ps.add("graph.mlp.b2", uniform(rng, (H,), r))
    for n in ("WQ", "WK", "WV"):
        ps.add(f"graph.{n}", uniform(rng, (H, H), r))


def compute_edges(ps, a: Tensor) -> Tensor:
    """r^{i,j} = W2 tanh(W1 [a^i; a^j] + b1) + b2 for every ordered pair."""
    B, E, H = a.shape
    W1 = ps["graph.mlp.W1"]
    left = (a @ W1[:H]).reshape(B, E, 1, H)
    right = (a @ W1[H:]).reshape(B, 1, E, H)
    hidden = nx.tanh(left + right + ps["graph.mlp.b1"])
    return hidden @ ps["graph.mlp.W2"] + ps["graph.mlp.b2"]


def relation_attention(ps, a: Tensor, edges: Tensor, event_mask: np.ndarray, residual: bool = False) -> GlobalEvents:
    B, E, H = a.shape
    q = (a @ ps["graph.WQ"]).reshape(B, E, 1, H)
    k = (a @ ps["graph.WK"]).reshape(B, 1, E, H)
    v = (a @ ps["graph.WV"]).reshape(B, 1, E, H)
    scores = (q * (k + edges)).sum(axis=-1) * (1.0 / math.sqrt(H))    # [B,E,E]
    alpha = nx.softmax(scores, axis=-1, mask=event_mask.reshape(B, 1, E))
    b = (alpha.reshape(B, E, E, 1) * (v + edges)).sum(axis=2)
    if residual:
        b = b + a
    return GlobalEvents(b=b, alpha=alpha, edges=edges)


def encode_globals(ps, a: Tensor, event_mask: np.ndarray, cfg: ModelConfig) -> GlobalEvents | None:
    if not cfg.use_graph:
        return None
    return relation_attention(ps, a, compute_edges(ps, a), event_mask, cfg.re_residual)
