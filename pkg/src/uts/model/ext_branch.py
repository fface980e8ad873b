"""Sentence encoder with iterative polishing, and the recurrent sentence extractor.

Extractor step t (state h_t, start h_0 = final document vector):

* sentence attention beta_hat_t from h_t, context c_t = sum beta_hat a_hat
* h_{t+1} = LSTM(h_t, [c_t; a_hat of the previous pick]) (a learned start vector at t = 0)
* choice logits over sentences plus one STOP slot, scored from h_{t+1}
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor
from .batch import Batch
from .config import ModelConfig
from .layers import add_gru, add_lstm, add_sru, additive_scores, bilstm, bmv, const, gru_step, lstm_step, sru_sequence, uniform

LOG_FLOOR = 1e-10


@dataclass
class SentenceEncoding:
    sent_states: Tensor  # [B,S,H] polished sentence vectors after the last iteration
    doc_state: Tensor    # [B,H]   document vector after the last iteration
    sent_vecs: Tensor    # [B,S,H] Bi-LSTM sentence vectors before polishing
    sent_mask: np.ndarray
    iterations: int


@dataclass
class ExtractDecision:
    selected: list[int]          # selection order
    step_attention: np.ndarray   # [steps, S]

    @property
    def sorted_selection(self) -> list[int]:
        return sorted(self.selected)


def add_params(ps, rng, cfg: ModelConfig) -> None:
    H, D, r = cfg.hidden_dim, cfg.embed_dim, cfg.init_range
    add_lstm(ps, rng, "sent.lstm.fwd", D, H, r)
    add_lstm(ps, rng, "sent.lstm.bwd", D, H, r)
    ps.add("sent.doc.W", uniform(rng, (H, H), r))
    ps.add("sent.doc.b", uniform(rng, (H,), r))
    add_sru(ps, rng, "sent.sru", H, H, H, r)
    add_gru(ps, rng, "sent.gru_iter", H, H, r)
    add_lstm(ps, rng, "ext.lstm", 2 * H, H, r)
    ps.add("ext.start", uniform(rng, (H,), r))
    ps.add("ext.attn.Wq", uniform(rng, (H, H), r))
    ps.add("ext.attn.Wk", uniform(rng, (H, H), r))
    ps.add("ext.attn.v", uniform(rng, (H, 1), r))
    ps.add("ext.score.Wh", uniform(rng, (H, H), r))
    ps.add("ext.score.Ws", uniform(rng, (H, H), r))
    ps.add("ext.score.b", uniform(rng, (H,), r))
    ps.add("ext.score.v", uniform(rng, (H, 1), r))
    ps.add("ext.stop", uniform(rng, (H,), r))


def encode_sentences(ps, batch: Batch, cfg: ModelConfig, iterations: int | None = None) -> SentenceEncoding:
    I = cfg.polish_iters if iterations is None else iterations
    if I < 1:
        raise ValueError("need at least one polishing iteration")
    B, S, L = batch.sent_ids.shape
    if not batch.sent_mask.any(axis=1).all():
        raise ValueError("every example needs at least one document sentence")
    H = cfg.hidden_dim
    emb = ps["embedding"][batch.sent_ids].reshape(B * S, L, cfg.embed_dim)
    _, last = bilstm(ps, "sent.lstm", emb, batch.sent_word_mask.reshape(B * S, L))
    vecs = last.reshape(B, S, H)
    sm = batch.sent_mask
    mean = (vecs * sm.reshape(B, S, 1)).sum(axis=1) * (1.0 / sm.sum(1, keepdims=True))
    doc = nx.tanh(mean @ ps["sent.doc.W"] + ps["sent.doc.b"])
    x = vecs
    for _ in range(I):
        final, outs = sru_sequence(ps, "sent.sru", x, doc, sm)
        x = nx.stack(outs, axis=1)
        doc = gru_step(ps, "sent.gru_iter", final, doc)
    return SentenceEncoding(sent_states=x, doc_state=doc, sent_vecs=vecs, sent_mask=sm, iterations=I)


class _Extractor:
    """Shared per-step machinery for teacher-forced and free-running extraction."""

    def __init__(self, ps, enc: SentenceEncoding):
        self.ps = ps
        self.A = enc.sent_states
        B, S, H = self.A.shape
        self.B, self.S, self.H = B, S, H
        self.att_keys = self.A @ ps["ext.attn.Wk"]
        stop = ps["ext.stop"].reshape(1, 1, H) * np.ones((B, 1, 1))
        self.choice_keys = nx.concat([self.A, stop], axis=1) @ ps["ext.score.Ws"]   # [B,S+1,H]
        self.sent_mask = enc.sent_mask
        self.choice_mask = np.concatenate([enc.sent_mask, np.ones((B, 1))], axis=1)
        self.h = enc.doc_state
        self.c = const(np.zeros((B, H)))

    def attend(self) -> tuple[Tensor, Tensor]:
        beta_hat = nx.softmax(additive_scores(self.h @ self.ps["ext.attn.Wq"], self.att_keys, self.ps["ext.attn.v"]),
                              mask=self.sent_mask)
        return beta_hat, bmv(beta_hat, self.A)

    def step(self, prev: Tensor, extra_mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
        """Advance one step; returns (beta_hat [B,S], choice probabilities [B,S+1])."""
        beta_hat, ctx = self.attend()
        self.h, self.c = lstm_step(self.ps, "ext.lstm", nx.concat([ctx, prev], axis=-1), self.h, self.c)
        q = self.h @ self.ps["ext.score.Wh"] + self.ps["ext.score.b"]
        logits = additive_scores(q, self.choice_keys, self.ps["ext.score.v"])
        mask = self.choice_mask if extra_mask is None else self.choice_mask * extra_mask
        return beta_hat, nx.softmax(logits, mask=mask)

    def start(self) -> Tensor:
        return self.ps["ext.start"].reshape(1, self.H) * np.ones((self.B, 1))

    def pick(self, idx: np.ndarray) -> Tensor:
        return self.A[np.arange(self.B), np.clip(idx, 0, self.S - 1)]


@dataclass
class ExtTeacherForced:
    loss: Tensor               # [B]
    beta_hat_steps: list[Tensor]  # X x [B,S]


def teacher_forced(ps, enc: SentenceEncoding, batch: Batch) -> ExtTeacherForced:
    """-sum_t log P(target_t), targets = ascending oracle indices then STOP.

    No repeat masking here, so uniform logits give (T+1) log(S+1).
    """
    if batch.ext_target is None:
        raise ValueError("extractive loss needs oracle labels")
    ex = _Extractor(ps, enc)
    B, X = batch.ext_target.shape
    rows = np.arange(B)
    nll, betas = [], []
    for t in range(X):
        prev = ex.start() if t == 0 else ex.pick(batch.ext_prev[:, t])
        beta_hat, probs = ex.step(prev)
        p = probs[rows, batch.ext_target[:, t]]
        nll.append(-nx.log(nx.clamp_min(p, LOG_FLOOR)))
        betas.append(beta_hat)
    loss = (nx.stack(nll, axis=1) * batch.ext_mask).sum(axis=1)
    return ExtTeacherForced(loss, betas)


def extract(ps, enc: SentenceEncoding, max_selected: int = 4) -> list[ExtractDecision]:
    """Free-running selection: argmax each step with already-picked sentences masked; STOP ends a row."""
    with nx.no_grad():
        ex = _Extractor(ps, enc)
        B, S = ex.B, ex.S
        chosen = np.zeros((B, S + 1))
        done = np.zeros(B, dtype=bool)
        selected: list[list[int]] = [[] for _ in range(B)]
        attn: list[list[np.ndarray]] = [[] for _ in range(B)]
        prev = ex.start()
        last = np.zeros(B, dtype=np.int64)
        for t in range(max_selected):
            if t:
                prev = ex.pick(last)
            beta_hat, probs = ex.step(prev, extra_mask=1.0 - chosen)
            pick = np.argmax(probs.data, axis=-1)
            for b in np.flatnonzero(~done):
                attn[b].append(beta_hat.data[b, : int(enc.sent_mask[b].sum())].copy())
                if pick[b] == S:
                    done[b] = True
                else:
                    selected[b].append(int(pick[b]))
                    chosen[b, pick[b]] = 1.0
            last = pick
            if done.all():
                break
    return [ExtractDecision(selected[b], np.array(attn[b])) for b in range(B)]
