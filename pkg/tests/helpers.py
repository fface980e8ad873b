"""Small model/batch builders shared by the model tests."""

import numpy as np

from uts.corpus import TruncationPolicy, Vocab, generate_synthetic, parse_record
from uts.model import UTS, ModelConfig


def example(events, summary="a b", rid="t", oracle=None):
    """events: list of token lists (one sentence each) or list of list-of-sentences."""
    evs = []
    for i, ev in enumerate(events):
        sents = ev if ev and isinstance(ev[0], list) else [ev]
        evs.append({"time": str(1990 + i), "text": " ".join(w for s in sents for w in s), "tokens": sents})
    rec = {"id": rid, "events": evs, "summary": [summary]}
    if oracle is not None:
        rec["oracle"] = oracle
    return parse_record(rec, TruncationPolicy())


def tiny_model(words, seed=0, init_range=0.3, **overrides):
    vocab = Vocab(list(words))
    kw = dict(vocab_size=len(vocab), embed_dim=4, hidden_dim=6, key_dim=3, global_dim=5, local_dim=6,
              max_events=4, init_range=init_range)
    kw.update(overrides)
    return UTS.create(ModelConfig(**kw), vocab, seed=seed)


def synthetic(n, seed=0):
    return [parse_record(r, TruncationPolicy()) for r in generate_synthetic(seed, n)]


def synthetic_model(examples, seed=0, init_range=0.1, **overrides):
    from uts.train import build_vocab_from_examples

    vocab = build_vocab_from_examples(examples, 50_000)
    kw = dict(vocab_size=len(vocab), embed_dim=8, hidden_dim=8, key_dim=4, global_dim=10, local_dim=8,
              max_events=8, init_range=init_range)
    kw.update(overrides)
    return UTS.create(ModelConfig(**kw), vocab, seed=seed)


def zero_params(model):
    for _, t in model.params.items():
        t.data[...] = 0.0
    return model


def rows_sum_to_one(x, axis=-1, tol=1e-6):
    return np.all(np.abs(np.asarray(x).sum(axis=axis) - 1.0) < tol)
