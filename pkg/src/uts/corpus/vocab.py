from __future__ import annotations

from typing import Iterable, Sequence

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
RESERVED = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)


class Vocab:
    """Token <-> id map with the four reserved ids first."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:4]) != RESERVED:
            tokens = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.itos: list[str] = tokens
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(tokens)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    @classmethod
    def from_counts(cls, tokens: Iterable[str], cap: int) -> "Vocab":
        """Keep the ``cap`` most frequent tokens; ties go to the earlier-seen token."""
        if cap <= 0:
            raise ValueError(f"vocab cap must be positive, got {cap}")
        counts: dict[str, int] = {}
        for t in tokens:
            if t in RESERVED:
                continue
            counts[t] = counts.get(t, 0) + 1
        if not counts:
            raise ValueError("cannot build a vocabulary from an empty corpus")
        # dict preserves first-occurrence order and sorted() is stable
        ranked = sorted(counts, key=lambda t: -counts[t])
        return cls(list(RESERVED) + ranked[:cap])
