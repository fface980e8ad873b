"""Time-event key-value memory: keys p^i, local values a^i, global values b^i."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .config import ModelConfig
from .layers import bmv, uniform


@dataclass(frozen=True)
class TimeEventMemory:
    keys: Tensor           # [E,P]
    local_values: Tensor   # [B,E,H]
    global_values: Tensor  # [B,E,G]
    event_mask: np.ndarray

    def checksum(self) -> float:
        return float(self.keys.data.sum() + self.local_values.data.sum() + self.global_values.data.sum())

    def select(self, index: np.ndarray) -> "TimeEventMemory":
        """Rows ``index`` of the batch (used to fan one example out to beam hypotheses)."""
        return TimeEventMemory(self.keys, self.local_values[index], self.global_values[index], self.event_mask[index])


@dataclass
class MemoryReadout:
    pi: Tensor       # [B,E]
    m1_raw: Tensor   # [B,H]
    m1: Tensor       # [B,H]
    m2_raw: Tensor   # [B,G]
    m2: Tensor       # [B,H]  m2_raw projected to the state size
    g1: Tensor
    g2: Tensor


def add_params(ps, rng, cfg: ModelConfig) -> None:
    H, P, G, r = cfg.hidden_dim, cfg.key_dim, cfg.global_dim, cfg.init_range
    ps.add("memory.W_up", uniform(rng, (H, G), r))
    ps.add("memory.We", uniform(rng, (H, P), r))
    ps.add("memory.W_down", uniform(rng, (G, H), r))
    ps.add("memory.Wo", uniform(rng, (3 * H, H), r))
    ps.add("memory.Wn", uniform(rng, (3 * H, H), r))


def build_memory(ps, time_pos: Tensor, local_events: Tensor, global_events: Tensor, event_mask: np.ndarray) -> TimeEventMemory:
    if not (time_pos.shape[0] == local_events.shape[1] == global_events.shape[1] == event_mask.shape[1]):
        raise ValueError("memory row counts differ")
    return TimeEventMemory(
        keys=time_pos,
        local_values=local_events,
        global_values=global_events @ ps["memory.W_up"],
        event_mask=event_mask,
    )


def read(ps, memory: TimeEventMemory, h: Tensor, c: Tensor) -> MemoryReadout:
    """Time-attention over keys from the current state, then the two fusion gates."""
    We = ps["memory.We"]
    if We.shape != (h.shape[-1], memory.keys.shape[-1]):
        raise ValueError(f"W_e shape {We.shape} does not match state {h.shape[-1]} x key {memory.keys.shape[-1]}")
    scores = (h @ We) @ nx.transpose(memory.keys)          # [B,E]
    pi = nx.softmax(scores, axis=-1, mask=memory.event_mask)
    m1_raw = bmv(pi, memory.local_values)
    m2_raw = bmv(pi, memory.global_values)
    m2 = m2_raw @ ps["memory.W_down"]
    g1 = nx.sigmoid(nx.concat([h, c, m1_raw], axis=-1) @ ps["memory.Wo"])
    g2 = nx.sigmoid(nx.concat([h, c, m2], axis=-1) @ ps["memory.Wn"])
    return MemoryReadout(pi=pi, m1_raw=m1_raw, m1=g1 * m1_raw, m2_raw=m2_raw, m2=m2, g1=g1, g2=g2)


def fuse_state(h: Tensor, readout: MemoryReadout) -> Tensor:
    """h' <- g2*h' + (1-g2)*m2."""
    return readout.g2 * h + (1.0 - readout.g2) * readout.m2
