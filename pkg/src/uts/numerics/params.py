from __future__ import annotations

from typing import Iterator

import numpy as np

from .autodiff import Tensor, default_dtype


class ParamStore:
    """Named trainable tensors plus their Adagrad accumulators.

    Names are hierarchical dotted strings, e.g. ``"encoder.lstm_fwd.W"``.
    """

    def __init__(self, dtype=None):
        self.dtype = np.dtype(dtype or default_dtype()).type
        self.entries: dict[str, Tensor] = {}
        self.adagrad_accumulators: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.entries:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=self.dtype), requires_grad=True, name=name)
        self.entries[name] = t
        self.adagrad_accumulators[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self) -> Iterator[str]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return self.entries.items()

    def names(self) -> list[str]:
        return list(self.entries)

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.entries.values())

    def zero_grad(self) -> None:
        for t in self.entries.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {n: (t.grad if t.grad is not None else np.zeros_like(t.data)) for n, t in self.entries.items()}

    def snapshot(self) -> dict[str, np.ndarray]:
        """Read-only copy of the current values, safe to share across workers."""
        out = {}
        for n, t in self.entries.items():
            a = t.data.copy()
            a.flags.writeable = False
            out[n] = a
        return out

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for n, v in values.items():
            if n not in self.entries:
                raise KeyError(f"unknown parameter {n!r}")
            if self.entries[n].shape != v.shape:
                raise ValueError(f"shape mismatch for {n}: {self.entries[n].shape} vs {v.shape}")
            self.entries[n].data = np.array(v, dtype=self.dtype)

    def fill_accumulators(self, value: float) -> None:
        """Reset every Adagrad accumulator to ``value`` (>= 0)."""
        if value < 0:
            raise ValueError("accumulator start value must be >= 0")
        for acc in self.adagrad_accumulators.values():
            acc.fill(value)

    def check_invariants(self) -> None:
        if set(self.adagrad_accumulators) != set(self.entries):
            raise ValueError("accumulator names differ from parameter names")
        for n, acc in self.adagrad_accumulators.items():
            if (acc < 0).any():
                raise ValueError(f"negative Adagrad accumulator for {n}")
