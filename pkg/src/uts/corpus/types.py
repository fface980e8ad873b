from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class TruncationPolicy:
    max_article_tokens: int = 400
    max_summary_tokens: int = 70
    max_events: int = 8
    max_sentences: int = 24
    max_sentence_tokens: int = 20
    max_selected: int = 4

    def __post_init__(self):
        for name, value in vars(self).items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass
class Event:
    timestamp: str
    text: str
    sentences: list[str]
    # abstractive view: the event's (budget-truncated) word sequence
    words: list[str]
    tokens: list[int] = field(default_factory=list)
    # extractive view: per-sentence token lists, each clipped to max_sentence_tokens
    sentence_words: list[list[str]] = field(default_factory=list)
    pretokenized: list[list[str]] | None = None


@dataclass
class TimelineExample:
    id: str
    events: list[Event]
    summary: list[str]
    summary_words: list[str] = field(default_factory=list)
    oracle_labels: list[int] | None = None

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"example {self.id!r} has no events")

    @property
    def doc_sentences(self) -> list[list[str]]:
        """Flattened document sentence list that oracle labels index into."""
        return [s for ev in self.events for s in ev.sentence_words]

    @property
    def sentence_counts(self) -> list[int]:
        return [len(ev.sentence_words) for ev in self.events]

    def label_vector(self) -> list[int]:
        """0/1 form of the oracle index list."""
        n = len(self.doc_sentences)
        labels = [0] * n
        for i in self.oracle_labels or []:
            labels[i] = 1
        return labels

    def check(self) -> None:
        for ev in self.events:
            if not ev.words:
                raise ValueError(f"example {self.id!r}: event {ev.timestamp!r} has no tokens")
        if self.oracle_labels is not None:
            n = len(self.doc_sentences)
            labels = self.oracle_labels
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise ValueError(f"example {self.id!r}: oracle labels not strictly increasing")
            if labels and (labels[0] < 0 or labels[-1] >= n):
                raise ValueError(f"example {self.id!r}: oracle label out of range (n={n})")
