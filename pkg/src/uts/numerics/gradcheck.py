from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .params import ParamStore


class NonDeterministicClosure(RuntimeError):
    pass


@dataclass
class Mismatch:
    name: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradcheckReport:
    tolerance: float
    max_rel_error: dict[str, float] = field(default_factory=dict)
    failures: list[Mismatch] = field(default_factory=list)
    n_coordinates: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    def summary_lines(self) -> list[str]:
        lines = [
            f"{name:40s} max_rel_err={err:.3e} {'FAIL' if err >= self.tolerance else 'ok'}"
            for name, err in self.max_rel_error.items()
        ]
        lines.append(
            f"coordinates={self.n_coordinates} failures={len(self.failures)} "
            f"worst={self.worst:.3e} tol={self.tolerance:g} -> {'PASS' if self.passed else 'FAIL'}"
        )
        return lines


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float) -> np.ndarray:
    """|a - n| / max(|a|, |n|, floor).

    The floor keeps coordinates whose true gradient is ~0 from turning
    finite-difference round-off (~1e-10 at 64-bit) into a large ratio.
    """
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def gradcheck(
    closure: Callable[[], ad.Tensor],
    params: ParamStore,
    tolerance: float = 1e-4,
    step: float = 1e-5,
    floor: float = 1e-6,
    names: list[str] | None = None,
) -> GradcheckReport:
    """Compare tape gradients of ``closure()`` with central differences on every coordinate."""
    if params.dtype is not np.float64:
        raise ValueError("gradcheck requires 64-bit parameters")
    names = names or params.names()

    with ad.no_grad():
        f0 = float(closure().data)
        f1 = float(closure().data)
    if f0 != f1:
        raise NonDeterministicClosure(f"closure returned {f0!r} then {f1!r}")

    params.zero_grad()
    ad.get_tape().clear()
    loss = closure()
    if loss.requires_grad:
        ad.backward(loss)
    else:
        ad.get_tape().clear()
    grads = params.grads()

    report = GradcheckReport(tolerance=tolerance)
    # per-op finite checks dominate the cost of the many tiny forward passes;
    # a non-finite loss still surfaces through the numeric gradient below
    with ad.no_grad(), ad.finite_checks(False):
        for name in names:
            t = params[name]
            flat = t.data.reshape(-1)
            numeric = np.empty_like(flat)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                fp = float(closure().data)
                flat[k] = orig - step
                fm = float(closure().data)
                flat[k] = orig
                numeric[k] = (fp - fm) / (2.0 * step)
            if not np.isfinite(numeric).all():
                raise ad.NumericalError(f"non-finite loss while perturbing {name}")
            analytic = grads[name].reshape(-1)
            rel = relative_error(analytic, numeric, floor)
            report.n_coordinates += flat.size
            report.max_rel_error[name] = float(rel.max()) if rel.size else 0.0
            for k in np.flatnonzero(rel >= tolerance):
                report.failures.append(
                    Mismatch(name, np.unravel_index(k, t.shape), float(analytic[k]), float(numeric[k]), float(rel[k]))
                )
    return report
