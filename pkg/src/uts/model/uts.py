"""The full two-branch model: parameter init, joint loss and inference entry points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numerics as nx
from ..corpus.types import TimelineExample
from ..corpus.vocab import EOS_ID, Vocab
from ..numerics import ParamStore, Tensor
from . import abs_decoder as dec
from . import event_encoder, ext_branch, graph_encoder
from . import memory as mem
from . import unifier
from .batch import Batch, make_batch
from .config import ModelConfig


EXTRACTIVE_PREFIXES = ("sent.", "ext.")


EVENT_ENCODER_PREFIXES = ("embedding", "encoder.", "graph.", "memory.W_up")


def is_extractive_param(name: str) -> bool:
    return name.startswith(EXTRACTIVE_PREFIXES)


def is_event_encoder_param(name: str) -> bool:
    """Parameters read by ``UTS.encode_events`` (the rest of the abstractive side only reads its outputs)."""
    return name.startswith(EVENT_ENCODER_PREFIXES)


def init_params(cfg: ModelConfig, seed: int = 0, dtype=None) -> ParamStore:
    """Uniform(-init_range, init_range) everywhere, LSTM forget biases at 1."""
    rng = np.random.default_rng(seed)
    ps = ParamStore(dtype)
    event_encoder.add_params(ps, rng, cfg)
    if cfg.use_graph:
        graph_encoder.add_params(ps, rng, cfg)
    mem.add_params(ps, rng, cfg)
    dec.add_params(ps, rng, cfg)
    ext_branch.add_params(ps, rng, cfg)
    return ps


@dataclass
class Encoded:
    events: event_encoder.EventEncoding
    globals: graph_encoder.GlobalEvents | None
    memory: mem.TimeEventMemory
    context: dec.DecoderContext
    state: dec.DecoderState


@dataclass
class JointLoss:
    total: Tensor          # scalar, batch mean of l_abs + l_ext + lambda * l_inc
    l_abs: Tensor          # [B] summed token NLL
    l_ext: Tensor          # [B]
    l_inc: Tensor          # [B]
    n_tokens: np.ndarray   # [B]
    lambda_inc: float

    def breakdown(self) -> dict[str, float]:
        return {
            "l_abs": float(self.l_abs.data.mean()),
            "l_abs_per_token": float((self.l_abs.data / self.n_tokens).mean()),
            "l_ext": float(self.l_ext.data.mean()),
            "l_inc": float(self.l_inc.data.mean()),
            "total": float(self.total.data),
        }


@dataclass
class ExampleTrace:
    """Attention record of one example decoded along ``tokens``."""
    tokens: list[int]
    words: list[str]
    decoder: dec.DecoderTrace
    event_alpha: np.ndarray | None  # [E,E] graph attention, None without the graph encoder
    n_events: int
    event_lengths: list[int]


class UTS:
    def __init__(self, cfg: ModelConfig, params: ParamStore, vocab: Vocab):
        if cfg.vocab_size != len(vocab):
            raise ValueError(f"config vocab_size {cfg.vocab_size} != vocab {len(vocab)}")
        self.cfg = cfg
        self.params = params
        self.vocab = vocab

    @classmethod
    def create(cls, cfg: ModelConfig, vocab: Vocab, seed: int = 0, dtype=None) -> "UTS":
        return cls(cfg, init_params(cfg, seed, dtype), vocab)

    @property
    def dtype(self):
        return self.params.dtype

    def batch(self, examples: list[TimelineExample], with_targets: bool = True) -> Batch:
        return make_batch(examples, self.vocab, self.dtype, with_targets)

    def encode_events(self, batch: Batch) -> tuple[event_encoder.EventEncoding, graph_encoder.GlobalEvents | None,
                                                     mem.TimeEventMemory]:
        ps, cfg = self.params, self.cfg
        ev = event_encoder.embed_and_encode(ps, batch, cfg)
        gl = graph_encoder.encode_globals(ps, ev.local_events, batch.event_mask, cfg)
        b = gl.b if gl is not None else ev.local_events
        return ev, gl, mem.build_memory(ps, ev.time_pos, ev.local_events, b, batch.event_mask)

    def encode(self, batch: Batch, events=None) -> Encoded:
        ev, gl, memory = events if events is not None else self.encode_events(batch)
        ps = self.params
        # event attention and the event context read local a^i; b only enters through memory
        ctx = dec.make_context(ps, ev.word_states, batch.word_mask, ev.local_events, batch.event_mask, memory,
                               batch.copy_onehot)
        state = dec.init_state(ps, ev.local_events, batch.event_mask, self.cfg)
        return Encoded(ev, gl, memory, ctx, state)

    def abstractive_pass(self, batch: Batch, events=None) -> dec.TeacherForced:
        enc = self.encode(batch, events)
        return dec.teacher_forced(self.params, enc.context, enc.state, batch.dec_in, batch.dec_target,
                                  batch.dec_mask, self.cfg)

    def extractive_pass(self, batch: Batch) -> ext_branch.ExtTeacherForced:
        sents = ext_branch.encode_sentences(self.params, batch, self.cfg)
        return ext_branch.teacher_forced(self.params, sents, batch)

    @staticmethod
    def combine(batch: Batch, tf: dec.TeacherForced, ext: ext_branch.ExtTeacherForced, lambda_inc: float = 1.0,
                K: int = 3) -> JointLoss:
        inc = unifier.batch_loss_inc(tf.beta_steps, ext.beta_hat_steps, batch, K)
        per_example = tf.loss + ext.loss
        if lambda_inc:
            per_example = per_example + lambda_inc * inc
        return JointLoss(per_example.mean(), tf.loss, ext.loss, inc, tf.n_tokens, lambda_inc)

    def joint_loss(self, batch: Batch, lambda_inc: float = 1.0, K: int = 3) -> JointLoss:
        """L_abs + L_ext + lambda * L_inc from one teacher-forced pass of each branch, averaged over the batch."""
        if batch.ext_target is None:
            raise ValueError("joint loss needs oracle labels")
        return self.combine(batch, self.abstractive_pass(batch), self.extractive_pass(batch), lambda_inc, K)

    # -- inference -------------------------------------------------------

    def greedy(self, batch: Batch, max_len: int = 70) -> list[list[int]]:
        with nx.no_grad():
            enc = self.encode(batch)
            return dec.greedy_decode(self.params, enc.context, enc.state, self.cfg, max_len)

    def beam(self, batch: Batch, beam_size: int = 4, max_len: int = 70) -> list[tuple[list[int], float]]:
        out = []
        with nx.no_grad():
            enc = self.encode(batch)
            for b in range(batch.size):
                idx = np.array([b])
                out.append(dec.beam_decode(self.params, enc.context.select(idx), enc.state.select(idx), self.cfg,
                                           beam_size, max_len))
        return out

    def tokens_to_words(self, batch: Batch, b: int, tokens: list[int]) -> list[str]:
        return [batch.word_text(b, t, self.vocab) for t in tokens]

    def summarize_abs(self, examples: list[TimelineExample], beam_size: int = 4, max_len: int = 70) -> list[list[str]]:
        batch = self.batch(examples, with_targets=False)
        if beam_size <= 1:
            seqs = self.greedy(batch, max_len)
        else:
            seqs = [t for t, _ in self.beam(batch, beam_size, max_len)]
        return [self.tokens_to_words(batch, b, s) for b, s in enumerate(seqs)]

    def extract(self, examples: list[TimelineExample], max_selected: int = 4) -> list[ext_branch.ExtractDecision]:
        batch = self.batch(examples, with_targets=False)
        with nx.no_grad():
            sents = ext_branch.encode_sentences(self.params, batch, self.cfg)
        return ext_branch.extract(self.params, sents, max_selected)

    def trace(self, example: TimelineExample, tokens: list[int] | None = None, max_len: int = 70) -> ExampleTrace:
        """Decode one example (greedy unless ``tokens`` given, ids in the extended space) and record attention."""
        batch = self.batch([example], with_targets=False)
        with nx.no_grad():
            enc = self.encode(batch)
            if tokens is None:
                tokens = dec.greedy_decode(self.params, enc.context, enc.state, self.cfg, max_len)[0]
                if len(tokens) < max_len:
                    tokens = tokens + [EOS_ID]
            tr = dec.DecoderTrace()
            dec.sequence_log_prob(self.params, enc.context, enc.state, tokens, self.cfg, tr)
        n_ev = int(batch.n_events[0])
        alpha = enc.globals.alpha.data[0, :n_ev, :n_ev] if enc.globals is not None else None
        words = [batch.word_text(0, t, self.vocab) if t != EOS_ID else "</s>" for t in tokens]
        return ExampleTrace(list(tokens), words, tr, alpha, n_ev, [int(x) for x in batch.event_len[0, :n_ev]])
