"""Summary generator: word/event attention, memory-guided state fusion, copy mixture, beam search.

Step schedule (t = 1..T):

1. word attention alpha and event attention beta from the previous state h'_{t-1}
2. gamma = alpha * beta[event], context c_t = sum gamma h, event context e_t = sum beta a
3. h'_t = LSTM(h'_{t-1}, [c_t; emb(y_{t-1})])
4. memory read with h'_t, then state fusion with the global readout
5. P_v = softmax(W_v [m1; h'_t; c_t; e_t] + b_v), mixed with the copy distribution
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import numerics as nx
from ..corpus.vocab import BOS_ID, EOS_ID, UNK_ID
from ..numerics import Tensor
from . import memory as mem
from .config import ModelConfig
from .layers import add_lstm, additive_scores, bmv, const, lstm_step, uniform

LOG_FLOOR = 1e-10


@dataclass
class DecoderState:
    h_prime: Tensor  # [B,H]
    cell: Tensor     # [B,H]
    prev_token: np.ndarray  # [B] in-vocab ids
    step: int = 0

    def select(self, index) -> "DecoderState":
        return DecoderState(self.h_prime[index], self.cell[index], self.prev_token[index], self.step)


@dataclass
class DecoderContext:
    """Per-batch encoder outputs the decoder attends over; read-only during decoding."""
    word_states: Tensor   # [B,N,H], N = E*W
    word_keys: Tensor     # [B,N,A]
    word_mask: np.ndarray
    events: Tensor        # [B,E,H]
    event_keys: Tensor    # [B,E,A]
    event_mask: np.ndarray
    memory: mem.TimeEventMemory
    copy_onehot: np.ndarray  # [B,N,Vx]
    words_per_event: int

    def select(self, index) -> "DecoderContext":
        return DecoderContext(
            self.word_states[index], self.word_keys[index], self.word_mask[index], self.events[index],
            self.event_keys[index], self.event_mask[index], self.memory.select(index),
            self.copy_onehot[index], self.words_per_event,
        )


@dataclass
class StepOutput:
    alpha: Tensor       # [B,N] jointly normalised over all words of all events
    beta: Tensor        # [B,E]
    gamma: Tensor       # [B,N]
    pi: Tensor          # [B,E]
    p_gen: Tensor | None
    vocab_dist: Tensor  # [B,V]
    final_dist: Tensor  # [B,Vx]
    readout: mem.MemoryReadout


@dataclass
class DecoderTrace:
    """Per-step attention record for one example (numpy, steps along axis 0)."""
    alpha: list[np.ndarray] = field(default_factory=list)   # [E,W]
    beta: list[np.ndarray] = field(default_factory=list)    # [E]
    gamma: list[np.ndarray] = field(default_factory=list)   # [E,W]
    pi: list[np.ndarray] = field(default_factory=list)      # [E]
    p_gen: list[float] = field(default_factory=list)
    vocab_dist: list[np.ndarray] = field(default_factory=list)
    final_dist: list[np.ndarray] = field(default_factory=list)

    def append(self, out: StepOutput, row: int, E: int, W: int) -> None:
        self.alpha.append(out.alpha.data[row].reshape(-1, W)[:E].copy())
        self.beta.append(out.beta.data[row, :E].copy())
        self.gamma.append(out.gamma.data[row].reshape(-1, W)[:E].copy())
        self.pi.append(out.pi.data[row, :E].copy())
        self.p_gen.append(float(out.p_gen.data[row, 0]) if out.p_gen is not None else 1.0)
        self.vocab_dist.append(out.vocab_dist.data[row].copy())
        self.final_dist.append(out.final_dist.data[row].copy())

    def matrix(self, name: str) -> np.ndarray:
        return np.stack(getattr(self, name))


def add_params(ps, rng, cfg: ModelConfig) -> None:
    H, D, V, r = cfg.hidden_dim, cfg.embed_dim, cfg.vocab_size, cfg.init_range
    add_lstm(ps, rng, "decoder.init_lstm", cfg.max_events * H, H, r)
    ps.add("decoder.h_c", uniform(rng, (H,), r))
    add_lstm(ps, rng, "decoder.lstm", H + D, H, r)
    ps.add("attn_word.Wb", uniform(rng, (H, H), r))
    ps.add("attn_word.Wh", uniform(rng, (H, H), r))
    ps.add("attn_word.Wa", uniform(rng, (H, 1), r))
    ps.add("attn_event.Wd", uniform(rng, (H, H), r))
    ps.add("attn_event.We", uniform(rng, (H, H), r))
    ps.add("attn_event.Wc", uniform(rng, (H, 1), r))
    ps.add("output.Wv", uniform(rng, (4 * H, V), r))
    ps.add("output.bv", uniform(rng, (V,), r))
    if cfg.use_copy:
        ps.add("pointer.wc", uniform(rng, (H, 1), r))
        ps.add("pointer.wh", uniform(rng, (H, 1), r))
        ps.add("pointer.wx", uniform(rng, (D, 1), r))
        ps.add("pointer.b", uniform(rng, (1,), r))


def make_context(ps, word_states: Tensor, word_mask: np.ndarray, events: Tensor, event_mask: np.ndarray,
                 memory: mem.TimeEventMemory, copy_onehot: np.ndarray) -> DecoderContext:
    B, E, W, H = word_states.shape
    flat = word_states.reshape(B, E * W, H)
    return DecoderContext(
        word_states=flat,
        word_keys=flat @ ps["attn_word.Wh"],
        word_mask=word_mask.reshape(B, E * W),
        events=events,
        event_keys=events @ ps["attn_event.We"],
        event_mask=event_mask,
        memory=memory,
        copy_onehot=copy_onehot,
        words_per_event=W,
    )


def init_state(ps, events: Tensor, event_mask: np.ndarray, cfg: ModelConfig) -> DecoderState:
    """h'_0 from one LSTM step over the padded concatenation [a^1; ...; a^max_events], prior state h_c."""
    B, E, H = events.shape
    flat = (events * event_mask.reshape(B, E, 1)).reshape(B, E * H)
    if E < cfg.max_events:
        flat = nx.concat([flat, const(np.zeros((B, (cfg.max_events - E) * H)))], axis=-1)
    h_c = ps["decoder.h_c"].reshape(1, H)
    h0, c0 = lstm_step(ps, "decoder.init_lstm", flat, h_c, const(np.zeros((B, H))))
    return DecoderState(h0, c0, np.full(B, BOS_ID, dtype=np.int64), 0)


def copy_mixture(vocab_dist: Tensor, gamma_hat: Tensor, copy_onehot: np.ndarray, p_gen: Tensor) -> Tensor:
    """final(w) = p_gen P_v(w) + (1 - p_gen) * sum of gamma_hat over source positions holding w."""
    B, V = vocab_dist.shape
    Vx = copy_onehot.shape[-1]
    gen = vocab_dist if Vx == V else nx.concat([vocab_dist, const(np.zeros((B, Vx - V)))], axis=-1)
    copy = bmv(gamma_hat, const(copy_onehot))
    return p_gen * gen + (1.0 - p_gen) * copy


def decode_step(ps, ctx: DecoderContext, state: DecoderState, cfg: ModelConfig) -> tuple[DecoderState, StepOutput]:
    B = state.h_prime.shape[0]
    E = ctx.events.shape[1]
    W = ctx.words_per_event
    if (state.prev_token >= cfg.vocab_size).any() or (state.prev_token < 0).any():
        raise ValueError("previous token id outside the vocabulary")
    h_prev = state.h_prime
    x_emb = ps["embedding"][state.prev_token]

    alpha = nx.softmax(additive_scores(h_prev @ ps["attn_word.Wb"], ctx.word_keys, ps["attn_word.Wa"]),
                       mask=ctx.word_mask)
    beta = nx.softmax(additive_scores(h_prev @ ps["attn_event.Wd"], ctx.event_keys, ps["attn_event.Wc"]),
                      mask=ctx.event_mask)
    gamma = (alpha.reshape(B, E, W) * beta.reshape(B, E, 1)).reshape(B, E * W)
    c = bmv(gamma, ctx.word_states)
    e = bmv(beta, ctx.events)

    h, cell = lstm_step(ps, "decoder.lstm", nx.concat([c, x_emb], axis=-1), h_prev, state.cell)
    readout = mem.read(ps, ctx.memory, h, c)
    h = mem.fuse_state(h, readout)

    logits = nx.concat([readout.m1, h, c, e], axis=-1) @ ps["output.Wv"] + ps["output.bv"]
    vocab_dist = nx.softmax(logits)
    if cfg.use_copy:
        p_gen = nx.sigmoid(c @ ps["pointer.wc"] + h @ ps["pointer.wh"] + x_emb @ ps["pointer.wx"] + ps["pointer.b"])
        gamma_hat = gamma / gamma.sum(axis=-1, keepdims=True)
        final = copy_mixture(vocab_dist, gamma_hat, ctx.copy_onehot, p_gen)
    else:
        p_gen = None
        Vx = ctx.copy_onehot.shape[-1]
        final = vocab_dist if Vx == cfg.vocab_size else nx.concat(
            [vocab_dist, const(np.zeros((B, Vx - cfg.vocab_size)))], axis=-1)
    new_state = DecoderState(h, cell, state.prev_token, state.step + 1)
    return new_state, StepOutput(alpha, beta, gamma, readout.pi, p_gen, vocab_dist, final, readout)


def to_input_ids(ext_ids: np.ndarray, vocab_size: int) -> np.ndarray:
    return np.where(ext_ids < vocab_size, ext_ids, UNK_ID)


@dataclass
class TeacherForced:
    loss: Tensor               # [B] summed token NLL per example
    n_tokens: np.ndarray       # [B]
    beta_steps: list[Tensor]   # T x [B,E]
    alpha_steps: list[np.ndarray]
    pi_steps: list[np.ndarray]


def teacher_forced(ps, ctx: DecoderContext, state: DecoderState, dec_in: np.ndarray, dec_target: np.ndarray,
                   dec_mask: np.ndarray, cfg: ModelConfig) -> TeacherForced:
    """Teacher-forced pass; per-example loss -sum_t log max(final(y_t), 1e-10)."""
    B, T = dec_in.shape
    rows = np.arange(B)
    target = dec_target if cfg.use_copy else to_input_ids(dec_target, cfg.vocab_size)
    nll, betas, alphas, pis = [], [], [], []
    for t in range(T):
        if not dec_mask[:, t].any():
            break
        state.prev_token = dec_in[:, t]
        state, out = decode_step(ps, ctx, state, cfg)
        p = out.final_dist[rows, target[:, t]]
        nll.append(-nx.log(nx.clamp_min(p, LOG_FLOOR)))
        betas.append(out.beta)
        alphas.append(out.alpha.data)
        pis.append(out.pi.data)
    losses = (nx.stack(nll, axis=1) * dec_mask[:, :len(nll)]).sum(axis=1)
    return TeacherForced(losses, dec_mask.sum(1), betas, alphas, pis)


# ---------------------------------------------------------------------------
# inference


def greedy_decode(ps, ctx: DecoderContext, state: DecoderState, cfg: ModelConfig, max_len: int = 70) -> list[list[int]]:
    """Batched argmax decoding (lowest id on ties); sequences exclude the EOS token."""
    B = state.h_prime.shape[0]
    out: list[list[int]] = [[] for _ in range(B)]
    done = np.zeros(B, dtype=bool)
    with nx.no_grad():
        for _ in range(max_len):
            state, step = decode_step(ps, ctx, state, cfg)
            tok = np.argmax(step.final_dist.data, axis=-1)
            for b in np.flatnonzero(~done):
                if tok[b] == EOS_ID:
                    done[b] = True
                else:
                    out[b].append(int(tok[b]))
            if done.all():
                break
            state.prev_token = to_input_ids(tok, cfg.vocab_size)
    return out


@dataclass(order=True)
class _Hyp:
    neg_score: float
    tokens: tuple[int, ...]
    index: int = field(compare=False)


def beam_decode(ps, ctx: DecoderContext, state: DecoderState, cfg: ModelConfig, beam_size: int = 4,
                max_len: int = 70) -> tuple[list[int], float]:
    """Length-wise beam search over the final mixture for a single example (batch row 0).

    Keeps ``beam_size`` unfinished hypotheses; hypotheses ending in EOS (or
    reaching ``max_len`` tokens) are set aside. Stops once the best finished
    score is at least the best live score, since scores only decrease.
    Returns (tokens without EOS, total log-probability); ties prefer the
    lexicographically smaller id sequence.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    finished: list[_Hyp] = []
    live = [_Hyp(0.0, (), 0)]
    st = state.select(np.zeros(1, dtype=np.int64))
    with nx.no_grad():
        for step in range(max_len):
            index = np.array([h.index for h in live], dtype=np.int64)
            cur = st.select(index)
            cur.prev_token = np.array([to_input_ids(np.array(h.tokens[-1:] or (BOS_ID,)), cfg.vocab_size)[0]
                                       for h in live], dtype=np.int64)
            nxt, out = decode_step(ps, ctx.select(np.zeros(len(live), dtype=np.int64)), cur, cfg)
            logp = np.log(np.maximum(out.final_dist.data, LOG_FLOOR))
            cands = []
            for k, hyp in enumerate(live):
                order = np.argsort(-logp[k], kind="stable")[:beam_size]
                for tok in order:
                    cands.append(_Hyp(hyp.neg_score - float(logp[k, tok]), hyp.tokens + (int(tok),), k))
            cands.sort()
            new_live = []
            for c in cands:
                if c.tokens[-1] == EOS_ID or step + 1 == max_len:
                    finished.append(c)
                elif len(new_live) < beam_size:
                    new_live.append(c)
            st, live = nxt, new_live
            if not live:
                break
            if finished and min(finished).neg_score <= live[0].neg_score:
                break
    best = min(finished)
    ended = bool(best.tokens) and best.tokens[-1] == EOS_ID
    toks = list(best.tokens[:-1]) if ended else list(best.tokens)
    return toks, -best.neg_score


def sequence_log_prob(ps, ctx: DecoderContext, state: DecoderState, tokens: list[int], cfg: ModelConfig,
                      trace: DecoderTrace | None = None) -> float:
    """Log-probability of ``tokens`` for batch row 0 (tokens include EOS if it ended there)."""
    st = state.select(np.zeros(1, dtype=np.int64))
    c1 = ctx.select(np.zeros(1, dtype=np.int64))
    E = ctx.events.shape[1]
    total = 0.0
    prev = BOS_ID
    with nx.no_grad():
        for tok in tokens:
            st.prev_token = np.array([prev if prev < cfg.vocab_size else UNK_ID])
            st, out = decode_step(ps, c1, st, cfg)
            if trace is not None:
                trace.append(out, 0, E, ctx.words_per_event)
            total += math.log(max(float(out.final_dist.data[0, tok]), LOG_FLOOR))
            prev = tok
    return total
