"""Seeded synthetic timeline corpus.

Each record is a short biography: 3-8 events with strictly increasing years,
each a lead sentence ``In YEAR, NAME VERB OBJECT.`` plus distractor clauses.
Events whose verb is "salient" make it into the reference summary, reworded
as ``NAME VERB OBJECT in YEAR.`` and kept in time order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .io import parse_record, write_records
from .oracle import make_oracle_labels
from .types import TruncationPolicy

NAMES = (
    "Jackson", "Madonna", "Prince", "Whitney", "Bowie", "Cher", "Elton", "Dylan",
    "Aretha", "Marley", "Presley", "Lennon", "Joplin", "Hendrix", "Sinatra", "Holiday",
)

SALIENT = {
    "released": ("the album thriller", "a debut record", "the single bad", "a live album"),
    "won": ("a grammy award", "the golden globe", "an oscar", "the national prize"),
    "founded": ("a record label", "a charity", "the studio", "a film company"),
    "married": ("a fellow singer", "an actress", "a producer", "a childhood friend"),
    "recorded": ("a duet", "the soundtrack", "a gospel album", "the christmas song"),
}

ROUTINE = {
    "visited": ("the capital", "a hospital", "the old school", "a museum"),
    "toured": ("europe", "the coast", "japan", "small towns"),
    "attended": ("a gala", "the festival", "a workshop", "a dinner"),
    "met": ("the mayor", "a journalist", "old friends", "the band"),
}

DISTRACTORS = (
    "Critics praised the work.",
    "Fans gathered outside.",
    "The press followed closely.",
    "It rained that week.",
    "Tickets sold quickly.",
    "The weather was mild.",
    "Many people attended.",
    "Nobody expected it.",
)


@dataclass
class GrammarConfig:
    min_events: int = 3
    max_events: int = 8
    max_summary_events: int = 4
    max_distractors: int = 2
    start_year: tuple[int, int] = (1950, 1990)
    year_step: tuple[int, int] = (1, 6)
    names: tuple[str, ...] = NAMES
    salient: dict = field(default_factory=lambda: dict(SALIENT))
    routine: dict = field(default_factory=lambda: dict(ROUTINE))
    distractors: tuple[str, ...] = DISTRACTORS

    def validate(self) -> None:
        if not 1 <= self.min_events <= self.max_events:
            raise ValueError("need 1 <= min_events <= max_events")
        if self.max_summary_events < 1:
            raise ValueError("max_summary_events must be >= 1")
        if self.max_distractors < 0:
            raise ValueError("max_distractors must be >= 0")
        if not self.names or not self.salient or not self.routine:
            raise ValueError("names, salient and routine vocabularies must be non-empty")
        if self.year_step[0] < 1:
            raise ValueError("year_step must be >= 1 for strictly increasing timestamps")


def _pick(rng: np.random.Generator, seq):
    return seq[int(rng.integers(len(seq)))]


def generate_record(rng: np.random.Generator, idx: int, cfg: GrammarConfig) -> dict:
    n_events = int(rng.integers(cfg.min_events, cfg.max_events + 1))
    k = int(rng.integers(1, min(cfg.max_summary_events, n_events) + 1))
    salient_pos = set(int(i) for i in rng.choice(n_events, size=k, replace=False))
    name = _pick(rng, cfg.names)
    year = int(rng.integers(cfg.start_year[0], cfg.start_year[1] + 1))
    salient_verbs = sorted(cfg.salient)
    routine_verbs = sorted(cfg.routine)

    events, summary = [], []
    for i in range(n_events):
        if i:
            year += int(rng.integers(cfg.year_step[0], cfg.year_step[1] + 1))
        if i in salient_pos:
            verb = _pick(rng, salient_verbs)
            obj = _pick(rng, cfg.salient[verb])
            summary.append(f"{name} {verb} {obj} in {year}.")
        else:
            verb = _pick(rng, routine_verbs)
            obj = _pick(rng, cfg.routine[verb])
        n_extra = int(rng.integers(0, cfg.max_distractors + 1))
        extra = [_pick(rng, cfg.distractors) for _ in range(n_extra)]
        text = " ".join([f"In {year}, {name} {verb} {obj}."] + extra)
        events.append({"time": str(year), "text": text})
    return {"id": f"synth-{idx:05d}", "events": events, "summary": summary}


def generate_synthetic(
    seed: int,
    n_examples: int,
    grammar_config: GrammarConfig | None = None,
    out_path=None,
    max_selected: int = 4,
    policy: TruncationPolicy | None = None,
) -> list[dict]:
    """Deterministic records (with oracle labels); optionally written as JSON Lines."""
    if n_examples < 1:
        raise ValueError("n_examples must be >= 1")
    cfg = grammar_config or GrammarConfig()
    cfg.validate()
    policy = policy or TruncationPolicy()
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_examples):
        rec = generate_record(rng, i, cfg)
        rec["oracle"] = make_oracle_labels(parse_record(rec, policy), max_selected)
        records.append(rec)
    if out_path is not None:
        write_records(records, out_path)
    return records
