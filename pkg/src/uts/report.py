"""Checkpoint-averaged evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus.types import TimelineExample
from .eval import date_f1, rouge
from .train import load_model

METRICS = ("r1", "r2", "rl", "datef1")


def parse_metrics(spec: str) -> list[str]:
    names = [m.strip().lower() for m in spec.split(",") if m.strip()]
    bad = [m for m in names if m not in METRICS]
    if bad or not names:
        raise ValueError(f"unknown metrics {bad or spec!r}; choose from {','.join(METRICS)}")
    return names


@dataclass
class ExampleScore:
    id: str
    summary: list[str]
    scores: dict[str, float]
    dates_both_empty: bool


def score_example(candidate: list[str], example: TimelineExample, metrics: list[str]) -> ExampleScore:
    out = {}
    rs = rouge(candidate, example.summary_words) if {"r1", "r2", "rl"} & set(metrics) else None
    if "r1" in metrics:
        out["r1"] = rs.r1.f1
    if "r2" in metrics:
        out["r2"] = rs.r2.f1
    if "rl" in metrics:
        out["rl"] = rs.rl.f1
    both_empty = False
    if "datef1" in metrics:
        ds = date_f1(" ".join(candidate), " ".join(example.summary))
        out["datef1"] = ds.f1
        both_empty = ds.both_empty
    return ExampleScore(example.id, candidate, out, both_empty)


def score_model(model, examples: list[TimelineExample], metrics: list[str], beam: int = 4,
                max_len: int = 70, batch_size: int = 16) -> list[ExampleScore]:
    scores = []
    for i in range(0, len(examples), batch_size):
        chunk = examples[i:i + batch_size]
        for cand, ex in zip(model.summarize_abs(chunk, beam_size=beam, max_len=max_len), chunk):
            scores.append(score_example(cand, ex, metrics))
    return scores


def eval_report(ckpts: list[str], examples: list[TimelineExample], metrics: list[str], beam: int = 4,
                max_len: int = 70) -> dict:
    """Scores every example under every checkpoint.

    ``checkpoints[k].mean`` averages over examples for one checkpoint,
    ``examples[j].mean`` averages over checkpoints for one example, and
    ``mean`` is the grand mean (identical either way round).
    """
    if not ckpts:
        raise ValueError("need at least one checkpoint")
    if not examples:
        raise ValueError("empty evaluation corpus")
    per_ckpt = []
    for path in ckpts:
        model, meta = load_model(path)
        rows = score_model(model, examples, metrics, beam, max_len)
        per_ckpt.append((path, meta, rows))
    ck_entries = []
    for path, meta, rows in per_ckpt:
        ck_entries.append({
            "path": str(path),
            "epoch": int(meta.get("epoch", 0)),
            "mean": {m: float(np.mean([r.scores[m] for r in rows])) for m in metrics},
        })
    ex_entries = []
    for j, ex in enumerate(examples):
        per = [rows[j] for _, _, rows in per_ckpt]
        ex_entries.append({
            "id": ex.id,
            "mean": {m: float(np.mean([r.scores[m] for r in per])) for m in metrics},
            "per_checkpoint": [{"summary": " ".join(r.summary), "scores": r.scores} for r in per],
            "dates_both_empty": bool(per[0].dates_both_empty),
        })
    grand = {m: float(np.mean([c["mean"][m] for c in ck_entries])) for m in metrics}
    return {
        "metrics": list(metrics),
        "n_examples": len(examples),
        "n_checkpoints": len(ckpts),
        "mean": grand,
        "checkpoints": ck_entries,
        "examples": ex_entries,
    }
