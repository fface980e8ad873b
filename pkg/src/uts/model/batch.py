"""Padding a list of examples into dense arrays plus masks.

Everything here is constant data (numpy); the model wraps it in tensors.
Layout conventions, with B examples, E events, W words per event, S
sentences, L words per sentence, T summary steps, X extractor steps:

* words are addressed either as ``[B, E, W]`` or flattened ``[B, E*W]``
* extractor choice ``S`` (the column after the last sentence) is STOP
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..corpus.types import TimelineExample
from ..corpus.vocab import BOS_ID, EOS_ID, UNK_ID, Vocab


@dataclass
class Batch:
    examples: list[TimelineExample]
    vocab_size: int
    word_ids: np.ndarray        # [B,E,W] in-vocab ids (UNK for OOV)
    word_mask: np.ndarray       # [B,E,W]
    event_mask: np.ndarray      # [B,E]
    event_len: np.ndarray       # [B,E] int
    src_ext: np.ndarray         # [B,E*W] extended-vocab ids
    oov_words: list[list[str]]
    dec_in: np.ndarray          # [B,T]
    dec_target: np.ndarray      # [B,T] extended ids
    dec_mask: np.ndarray        # [B,T]
    sent_ids: np.ndarray        # [B,S,L]
    sent_word_mask: np.ndarray  # [B,S,L]
    sent_mask: np.ndarray       # [B,S]
    sent_len: np.ndarray        # [B,S] int
    tile: np.ndarray            # [B,E,S] 0/1, event -> its sentences
    ext_target: np.ndarray | None = None  # [B,X] sentence index, S = STOP
    ext_prev: np.ndarray | None = None    # [B,X] previous selection, -1 = start
    ext_mask: np.ndarray | None = None    # [B,X]
    n_select: np.ndarray | None = None    # [B]
    _copy_onehot: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.examples)

    @property
    def n_events(self) -> np.ndarray:
        return self.event_mask.sum(1).astype(int)

    @property
    def n_sents(self) -> np.ndarray:
        return self.sent_mask.sum(1).astype(int)

    @property
    def ext_vocab_size(self) -> int:
        return self.vocab_size + max((len(o) for o in self.oov_words), default=0)

    @property
    def copy_onehot(self) -> np.ndarray:
        """[B, E*W, V_ext] indicator of which extended id each source position holds."""
        if self._copy_onehot is None:
            B, N = self.src_ext.shape
            oh = np.zeros((B, N, self.ext_vocab_size), dtype=self.word_mask.dtype)
            bi, ni = np.nonzero(self.word_mask.reshape(B, N))
            oh[bi, ni, self.src_ext[bi, ni]] = 1.0
            self._copy_onehot = oh
        return self._copy_onehot

    def word_text(self, b: int, ext_id: int, vocab: Vocab) -> str:
        if ext_id < self.vocab_size:
            return vocab.itos[ext_id]
        return self.oov_words[b][ext_id - self.vocab_size]


def _extended(words: list[str], vocab: Vocab) -> tuple[list[int], list[str]]:
    oov: list[str] = []
    ids = []
    for w in words:
        if w in vocab.stoi:
            ids.append(vocab.stoi[w])
        else:
            if w not in oov:
                oov.append(w)
            ids.append(len(vocab) + oov.index(w))
    return ids, oov


def make_batch(examples: list[TimelineExample], vocab: Vocab, dtype=np.float64, with_targets: bool = True) -> Batch:
    B = len(examples)
    E = max(len(ex.events) for ex in examples)
    W = max(len(ev.words) for ex in examples for ev in ex.events)
    S = max(max(len(ex.doc_sentences), 1) for ex in examples)
    L = max((len(s) for ex in examples for s in ex.doc_sentences), default=1)

    word_ids = np.zeros((B, E, W), dtype=np.int64)
    word_mask = np.zeros((B, E, W), dtype=dtype)
    event_len = np.zeros((B, E), dtype=np.int64)
    src_ext = np.zeros((B, E * W), dtype=np.int64)
    oov_words = []
    sent_ids = np.zeros((B, S, L), dtype=np.int64)
    sent_word_mask = np.zeros((B, S, L), dtype=dtype)
    sent_len = np.zeros((B, S), dtype=np.int64)
    tile = np.zeros((B, E, S), dtype=dtype)

    for b, ex in enumerate(examples):
        flat_words = []
        for e, ev in enumerate(ex.events):
            n = len(ev.words)
            word_ids[b, e, :n] = vocab.encode(ev.words)
            word_mask[b, e, :n] = 1.0
            event_len[b, e] = n
            flat_words.append((e, ev.words))
        all_words = [w for _, ws in flat_words for w in ws]
        ext_ids, oov = _extended(all_words, vocab)
        oov_words.append(oov)
        k = 0
        for e, ws in flat_words:
            src_ext[b, e * W:e * W + len(ws)] = ext_ids[k:k + len(ws)]
            k += len(ws)
        s = 0
        for e, ev in enumerate(ex.events):
            for sw in ev.sentence_words:
                sent_ids[b, s, :len(sw)] = vocab.encode(sw)
                sent_word_mask[b, s, :len(sw)] = 1.0
                sent_len[b, s] = len(sw)
                tile[b, e, s] = 1.0
                s += 1

    event_mask = (event_len > 0).astype(dtype)
    sent_mask = (sent_len > 0).astype(dtype)

    # teacher-forced decoder rows: BOS y1 .. yT  ->  y1 .. yT EOS
    T = max(len(ex.summary_words) for ex in examples) + 1
    dec_in = np.zeros((B, T), dtype=np.int64)
    dec_target = np.zeros((B, T), dtype=np.int64)
    dec_mask = np.zeros((B, T), dtype=dtype)
    for b, ex in enumerate(examples):
        words = ex.summary_words
        oov = oov_words[b]
        tgt = []
        for w in words:
            if w in vocab.stoi:
                tgt.append(vocab.stoi[w])
            elif w in oov:
                tgt.append(len(vocab) + oov.index(w))
            else:
                tgt.append(UNK_ID)
        tgt.append(EOS_ID)
        inp = [BOS_ID] + [t if t < len(vocab) else UNK_ID for t in tgt[:-1]]
        dec_in[b, :len(inp)] = inp
        dec_target[b, :len(tgt)] = tgt
        dec_mask[b, :len(tgt)] = 1.0

    batch = Batch(
        examples=list(examples), vocab_size=len(vocab), word_ids=word_ids, word_mask=word_mask,
        event_mask=event_mask, event_len=event_len, src_ext=src_ext, oov_words=oov_words,
        dec_in=dec_in, dec_target=dec_target, dec_mask=dec_mask, sent_ids=sent_ids,
        sent_word_mask=sent_word_mask, sent_mask=sent_mask, sent_len=sent_len, tile=tile,
    )
    if with_targets and all(ex.oracle_labels is not None for ex in examples):
        _add_ext_targets(batch, dtype)
    return batch


def _add_ext_targets(batch: Batch, dtype) -> None:
    """Ascending oracle indices followed by one STOP target."""
    S = batch.sent_mask.shape[1]
    labels = [sorted(ex.oracle_labels) for ex in batch.examples]
    X = max(len(l) for l in labels) + 1
    B = batch.size
    target = np.zeros((B, X), dtype=np.int64)
    prev = np.full((B, X), -1, dtype=np.int64)
    mask = np.zeros((B, X), dtype=dtype)
    for b, l in enumerate(labels):
        seq = l + [S]
        target[b, :len(seq)] = seq
        prev[b, 1:len(seq)] = l
        mask[b, :len(seq)] = 1.0
    batch.ext_target, batch.ext_prev, batch.ext_mask = target, prev, mask
    batch.n_select = np.array([len(l) for l in labels], dtype=np.int64)


def pool_matrix(n_steps: int, n_out: int) -> np.ndarray:
    """[n_out, n_steps] row-averaging matrix over contiguous non-overlapping step windows.

    Window = ceil(n_steps / n_out) with equal stride; the last window averages
    over however many steps remain. If that rule leaves fewer than ``n_out``
    windows, steps are instead split into ``n_out`` near-equal contiguous runs
    with ceil boundaries.
    """
    if n_out < 1 or n_steps < n_out:
        raise ValueError(f"need 1 <= n_out <= n_steps, got n_out={n_out}, n_steps={n_steps}")
    w = math.ceil(n_steps / n_out)
    starts = list(range(0, n_steps, w))
    if len(starts) != n_out:
        starts = [math.ceil(k * n_steps / n_out) for k in range(n_out)]
    bounds = starts + [n_steps]
    P = np.zeros((n_out, n_steps))
    for k in range(n_out):
        lo, hi = bounds[k], bounds[k + 1]
        P[k, lo:hi] = 1.0 / (hi - lo)
    return P
