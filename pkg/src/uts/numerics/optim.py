from __future__ import annotations

import numpy as np

from .params import ParamStore

ADAGRAD_EPS = 1e-8


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_by_global_norm(grads: dict[str, np.ndarray], clip_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Rescale so the joint L2 norm is at most ``clip_norm``. Returns (grads, pre-clip norm)."""
    norm = global_norm(grads)
    if norm <= clip_norm:
        return grads, norm
    scale = clip_norm / norm
    return {n: g * scale for n, g in grads.items()}, norm


def adagrad_step(params: ParamStore, lr: float = 0.15, clip_norm: float = 2.0) -> float:
    """One clipped Adagrad update in place; returns the pre-clip gradient norm.

    acc += g**2;  p -= lr * g / (sqrt(acc) + eps)
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if clip_norm <= 0:
        raise ValueError(f"clip_norm must be positive, got {clip_norm}")
    grads, norm = clip_by_global_norm(params.grads(), clip_norm)
    for name, t in params.items():
        g = grads[name]
        if not g.any():
            continue
        acc = params.adagrad_accumulators[name]
        acc += g * g
        t.data -= lr * g / (np.sqrt(acc) + ADAGRAD_EPS)
    return norm
