"""Attention diagnostics: time-attention maps, two-level attention dumps, word/event consistency."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_FLOOR = 1e-10


def consistency_measure(alpha: np.ndarray, beta: np.ndarray, k: int = 3) -> np.ndarray:
    """Per-step -log(mean over the top-k words by alpha of alpha[w] * beta[event of w]).

    alpha [T, E, W] (word attention, zero on padding), beta [T, E]. Ties in
    alpha go to the earlier (event, position).
    """
    T, E, W = alpha.shape
    flat = alpha.reshape(T, E * W)
    k = min(k, E * W)
    top = np.argsort(-flat, axis=1, kind="stable")[:, :k]
    prod = np.take_along_axis(flat, top, axis=1) * np.take_along_axis(beta, top // W, axis=1)
    return -np.log(np.maximum(prod.mean(axis=1), LOG_FLOOR))


def consistency_from_teacher_forcing(tf, batch, k: int = 3) -> np.ndarray:
    """Mean consistency over each example's real decode steps; returns [B]."""
    B, E, W = batch.word_ids.shape
    alpha = np.stack(tf.alpha_steps, axis=1).reshape(B, -1, E, W)
    beta = np.stack([b.data for b in tf.beta_steps], axis=1)
    steps = batch.dec_mask.sum(1).astype(int)
    out = np.zeros(B)
    for b in range(B):
        T = min(int(steps[b]), alpha.shape[1])
        out[b] = consistency_measure(alpha[b, :T], beta[b, :T], k).mean()
    return out


def center_of_mass(weights: np.ndarray) -> np.ndarray:
    """sum_i i * w_i along the last axis (event positions counted from 0)."""
    w = np.asarray(weights, dtype=float)
    return w @ np.arange(w.shape[-1], dtype=float)


@dataclass
class TimeAttention:
    example_id: str
    tokens: list[str]
    pi: np.ndarray        # [steps, E]

    @property
    def com(self) -> np.ndarray:
        return center_of_mass(self.pi)


def time_attention(model, examples, max_len: int = 70) -> list[TimeAttention]:
    out = []
    for ex in examples:
        tr = model.trace(ex, max_len=max_len)
        out.append(TimeAttention(ex.id, tr.words, tr.decoder.matrix("pi")))
    return out


def first_last_com(maps: list[TimeAttention]) -> tuple[float, float]:
    """Average centre of mass of pi at the first and at the last decode step."""
    first = [float(m.com[0]) for m in maps if len(m.pi)]
    last = [float(m.com[-1]) for m in maps if len(m.pi)]
    if not first:
        raise ValueError("no decode steps to summarise")
    return float(np.mean(first)), float(np.mean(last))


def write_time_attention_csv(maps: list[TimeAttention], path) -> None:
    width = max((m.pi.shape[1] for m in maps), default=0)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "step", "token"] + [f"pi_{i}" for i in range(width)] + ["center_of_mass"])
        for m in maps:
            for t, row in enumerate(m.pi):
                cells = [f"{v:.8f}" for v in row] + [""] * (width - len(row))
                w.writerow([m.example_id, t, m.tokens[t] if t < len(m.tokens) else ""] + cells + [f"{m.com[t]:.6f}"])


def write_com_summary_csv(maps: list[TimeAttention], path) -> tuple[float, float]:
    first, last = first_last_com(maps)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "n_steps", "com_first", "com_last"])
        for m in maps:
            if len(m.pi):
                w.writerow([m.example_id, len(m.pi), f"{m.com[0]:.6f}", f"{m.com[-1]:.6f}"])
        w.writerow(["MEAN", "", f"{first:.6f}", f"{last:.6f}"])
    return first, last


def two_level(model, example, max_len: int = 70) -> dict:
    """alpha / beta / gamma per decode step for one example, trimmed to real words."""
    tr = model.trace(example, max_len=max_len)
    lens = tr.event_lengths
    words = [ev.words for ev in example.events]
    return {
        "id": example.id,
        "tokens": tr.words,
        "alpha": tr.decoder.matrix("alpha"),
        "beta": tr.decoder.matrix("beta"),
        "gamma": tr.decoder.matrix("gamma"),
        "event_lengths": lens,
        "words": words,
        "consistency": consistency_measure(tr.decoder.matrix("alpha"), tr.decoder.matrix("beta")),
    }


def write_two_level_csv(dump: dict, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ("alpha", "gamma"):
        p = out / f"{name}.csv"
        with open(p, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "token", "event", "position", "word", name])
            for t, mat in enumerate(dump[name]):
                for e, n in enumerate(dump["event_lengths"]):
                    for j in range(n):
                        w.writerow([t, dump["tokens"][t], e, j, dump["words"][e][j], f"{mat[e, j]:.8f}"])
        paths.append(p)
    p = out / "beta.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "token"] + [f"beta_{e}" for e in range(len(dump["event_lengths"]))] + ["consistency"])
        for t, row in enumerate(dump["beta"]):
            w.writerow([t, dump["tokens"][t]] + [f"{v:.8f}" for v in row] + [f"{dump['consistency'][t]:.6f}"])
    paths.append(p)
    return paths


def is_ascending(seq) -> bool:
    return all(b > a for a, b in zip(seq, seq[1:]))


def mean_or_nan(values) -> float:
    values = list(values)
    return float(np.mean(values)) if values else math.nan
