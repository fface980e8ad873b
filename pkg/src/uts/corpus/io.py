"""JSON Lines corpus reading/writing and the truncation policy.

One record per line::

    {"id": str, "events": [{"time": str, "text": str}], "summary": [str], "oracle": [int]}

``oracle`` is optional. An event may also carry ``"tokens"``: a list of
pre-split token lists (one per sentence), which bypasses the built-in
tokenizer for languages it does not handle.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterable, Iterator

from .text import split_sentences, tokenize
from .types import Event, TimelineExample, TruncationPolicy
from .vocab import Vocab

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def event_budgets(n_events: int, budget: int) -> list[int]:
    """floor(budget / n) tokens per event, remainder to the earliest events."""
    base, rem = divmod(budget, n_events)
    return [base + (1 if i < rem else 0) for i in range(n_events)]


def _make_event(raw: dict) -> Event:
    time = str(raw.get("time", ""))
    text = raw.get("text")
    if not isinstance(text, str):
        raise ValueError("event missing 'text'")
    pre = None
    if "tokens" in raw:
        pre = [[str(w) for w in s] for s in raw["tokens"]]
        sent_words = [list(s) for s in pre]
        sentences = [" ".join(s) for s in sent_words]
    else:
        sentences = split_sentences(text)
        sent_words = [tokenize(s) for s in sentences]
    sent_words = [s for s in sent_words if s]
    words = [w for s in sent_words for w in s]
    return Event(timestamp=time, text=text, sentences=sentences, words=words, sentence_words=sent_words, pretokenized=pre)


def truncate(example: TimelineExample, policy: TruncationPolicy) -> TimelineExample:
    """Apply the truncation policy in place; idempotent."""
    events = example.events[: policy.max_events]
    total = sum(len(ev.words) for ev in events)
    if total > policy.max_article_tokens:
        for ev, cap in zip(events, event_budgets(len(events), policy.max_article_tokens)):
            ev.words = ev.words[:cap]
    remaining = policy.max_sentences
    for ev in events:
        sents = [s[: policy.max_sentence_tokens] for s in ev.sentence_words]
        ev.sentence_words = sents[: max(remaining, 0)]
        remaining -= len(ev.sentence_words)
    example.events = events
    example.summary_words = example.summary_words[: policy.max_summary_tokens]
    if example.oracle_labels is not None:
        n = len(example.doc_sentences)
        example.oracle_labels = [i for i in example.oracle_labels if i < n]
    return example


def parse_record(obj: dict, policy: TruncationPolicy, vocab: Vocab | None = None) -> TimelineExample:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for key in ("id", "events", "summary"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    summary = obj["summary"]
    if isinstance(summary, str):
        summary = [summary]
    summary_words = [w for s in summary for w in tokenize(s)]
    if not summary_words:
        raise ValueError("empty summary")
    events = [_make_event(e) for e in obj["events"]]
    if not events:
        raise ValueError("no events")
    oracle = obj.get("oracle")
    ex = TimelineExample(
        id=str(obj["id"]),
        events=events,
        summary=list(summary),
        summary_words=summary_words,
        oracle_labels=[int(i) for i in oracle] if oracle is not None else None,
    )
    truncate(ex, policy)
    ex.check()
    if vocab is not None:
        encode(ex, vocab)
    return ex


def encode(example: TimelineExample, vocab: Vocab) -> TimelineExample:
    for ev in example.events:
        ev.tokens = vocab.encode(ev.words)
    return example


def load_corpus(
    path,
    vocab: Vocab | None = None,
    policy: TruncationPolicy | None = None,
    strict: bool = True,
) -> Iterator[TimelineExample]:
    """Stream examples from a JSON Lines file.

    Malformed records raise :class:`CorpusError` (with the line number) when
    ``strict``; otherwise they are logged and skipped.
    """
    policy = policy or TruncationPolicy()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield parse_record(json.loads(line), policy, vocab)
            except (ValueError, TypeError, KeyError) as exc:
                if strict:
                    raise CorpusError(str(exc), lineno) from exc
                log.warning("skipping malformed record at line %d: %s", lineno, exc)


def read_corpus(path, vocab=None, policy=None, strict=True) -> list[TimelineExample]:
    return list(load_corpus(path, vocab, policy, strict))


def _event_record(ev: Event) -> dict:
    rec = {"time": ev.timestamp, "text": ev.text}
    if ev.pretokenized is not None:
        rec["tokens"] = ev.pretokenized
    return rec


def to_record(example: TimelineExample) -> dict:
    rec = {
        "id": example.id,
        "events": [_event_record(ev) for ev in example.events],
        "summary": list(example.summary),
    }
    if example.oracle_labels is not None:
        rec["oracle"] = list(example.oracle_labels)
    return rec


def write_records(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def write_corpus(examples: Iterable[TimelineExample], path) -> None:
    write_records((to_record(ex) for ex in examples), path)


_NO_TRUNCATION = TruncationPolicy(10**9, 10**9, 10**9, 10**9, 10**9, 10**9)


def iter_tokens(path) -> Iterator[str]:
    """Every event and summary token in file order, before truncation."""
    for ex in load_corpus(path, policy=_NO_TRUNCATION):
        for ev in ex.events:
            yield from ev.words
        yield from ex.summary_words


def build_vocab(corpus_path, cap: int = 50_000) -> Vocab:
    if not Path(corpus_path).exists():
        raise FileNotFoundError(corpus_path)
    return Vocab.from_counts(iter_tokens(corpus_path), cap)
