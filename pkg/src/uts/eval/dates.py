from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

# most specific first; matched spans are blanked so a full date does not also count its year
DEFAULT_PATTERNS = (
    r"\b\d{4}-\d{2}-\d{2}\b",
    r"\b\d{4}-\d{2}\b",
    r"\b\d{4}\b",
)


@dataclass(frozen=True)
class DateScore:
    precision: float
    recall: float
    f1: float
    both_empty: bool = False


def extract_dates(text: str, patterns: Iterable[str] = DEFAULT_PATTERNS) -> set[str]:
    found = set()
    for pat in patterns:
        rx = re.compile(pat)
        for m in rx.finditer(text):
            found.add(m.group(0))
        text = rx.sub(lambda m: " " * len(m.group(0)), text)
    return found


def date_f1(candidate: str, reference: str, patterns: Iterable[str] = DEFAULT_PATTERNS) -> DateScore:
    """Set precision/recall/F1 over extracted dates. Both sides empty scores 1.0 and is flagged."""
    patterns = tuple(patterns)
    cand = extract_dates(candidate, patterns)
    ref = extract_dates(reference, patterns)
    if not cand and not ref:
        return DateScore(1.0, 1.0, 1.0, both_empty=True)
    hit = len(cand & ref)
    p = hit / len(cand) if cand else 0.0
    r = hit / len(ref) if ref else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return DateScore(p, r, f)
