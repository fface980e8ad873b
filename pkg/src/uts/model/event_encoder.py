"""Word embedding + time position encoding, Bi-LSTM word states and SRU selective reading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .batch import Batch
from .config import ModelConfig
from .layers import add_lstm, add_sru, bilstm, sru_sequence, uniform


@dataclass
class EventEncoding:
    word_states: Tensor   # [B,E,W,H]  h^i_t = fwd + bwd
    local_events: Tensor  # [B,E,H]    a^i
    time_pos: Tensor      # [E,P]      p^i, indexed by event position
    last_states: Tensor   # [B,E,H]    h^i_{T_w}


def add_params(ps, rng, cfg: ModelConfig) -> None:
    r = cfg.init_range
    ps.add("embedding", uniform(rng, (cfg.vocab_size, cfg.embed_dim), r))
    ps.add("encoder.time_pos", uniform(rng, (cfg.max_events, cfg.key_dim), r))
    n_in = cfg.embed_dim + cfg.key_dim
    add_lstm(ps, rng, "encoder.lstm.fwd", n_in, cfg.hidden_dim, r)
    add_lstm(ps, rng, "encoder.lstm.bwd", n_in, cfg.hidden_dim, r)
    add_sru(ps, rng, "encoder.sru", cfg.hidden_dim, cfg.hidden_dim, cfg.hidden_dim, r)


def embed_and_encode(ps, batch: Batch, cfg: ModelConfig) -> EventEncoding:
    B, E, W = batch.word_ids.shape
    if E > ps["encoder.time_pos"].shape[0]:
        raise IndexError(f"{E} events but only {ps['encoder.time_pos'].shape[0]} time position vectors")
    H, P = cfg.hidden_dim, cfg.key_dim
    emb = ps["embedding"][batch.word_ids]                      # [B,E,W,D]
    p = ps["encoder.time_pos"][:E]                              # [E,P]
    # every word of event i sees the same p^i
    p_tiled = nx.reshape(p, (1, E, 1, P)) * np.ones((B, E, W, 1))
    x = nx.concat([emb, p_tiled], axis=-1).reshape(B * E, W, cfg.embed_dim + P)
    mask = batch.word_mask.reshape(B * E, W)
    states, last = bilstm(ps, "encoder.lstm", x, mask)
    a = selective_read(ps, states, last, mask)
    return EventEncoding(
        word_states=states.reshape(B, E, W, H),
        local_events=a.reshape(B, E, H),
        time_pos=p,
        last_states=last.reshape(B, E, H),
    )


def selective_read(ps, word_states: Tensor, last_state: Tensor, mask: np.ndarray, name: str = "encoder.sru") -> Tensor:
    """SRU over one event's word states, conditioned on its last Bi-LSTM state; returns the final state."""
    if (mask.sum(1) == 0).all():
        raise ValueError("selective_read needs at least one word")
    final, _ = sru_sequence(ps, name, word_states, last_state, mask)
    return final
