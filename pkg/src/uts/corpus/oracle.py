from __future__ import annotations

from itertools import combinations
from typing import Sequence

from ..eval.rouge import rouge_n
from .types import TimelineExample


def subset_score(sentences: Sequence[Sequence[str]], indices: Sequence[int], summary: Sequence[str]) -> float:
    """ROUGE-2 F1 of the selected sentences, concatenated in index order, against the summary."""
    cand = [w for i in sorted(indices) for w in sentences[i]]
    if len(summary) < 2:
        return 0.0
    return rouge_n(cand, summary, 2).f1


def greedy_oracle(sentences: Sequence[Sequence[str]], summary: Sequence[str], max_selected: int = 4) -> list[int]:
    """Greedy forward selection maximising ROUGE-2 F1; ties go to the lowest index."""
    selected: list[int] = []
    best = 0.0
    while len(selected) < max_selected:
        pick, pick_score = None, best
        for i in range(len(sentences)):
            if i in selected:
                continue
            score = subset_score(sentences, selected + [i], summary)
            if score > pick_score:
                pick, pick_score = i, score
        if pick is None:
            break
        selected.append(pick)
        best = pick_score
    return sorted(selected)


def exhaustive_oracle(sentences: Sequence[Sequence[str]], summary: Sequence[str], max_selected: int = 4) -> tuple[list[int], float]:
    """Best subset of size <= max_selected by enumeration (small inputs only)."""
    best, best_score = [], 0.0
    for k in range(1, min(max_selected, len(sentences)) + 1):
        for combo in combinations(range(len(sentences)), k):
            score = subset_score(sentences, combo, summary)
            if score > best_score:
                best, best_score = list(combo), score
    return best, best_score


def make_oracle_labels(example: TimelineExample, max_selected: int = 4) -> list[int]:
    sentences = example.doc_sentences
    if not sentences:
        raise ValueError(f"example {example.id!r} has no document sentences")
    return greedy_oracle(sentences, example.summary_words, max_selected)
