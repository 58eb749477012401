"""Discrete norms, contraction-rate estimation, and temporal orders.

Norm conventions follow the maximum principle analysis: per time level
the space error is measured in the max norm over nodes, and over a run
the space-time error is the max of the per-level values.  Interface
traces over a window are measured the same way (max over levels >= 1).

Contraction of a Schwarz decay curve is estimated from two-iteration
ratios e_{k+2} / e_k, the exponent structure of the two-subdomain
convergence bound (the error provably contracts by
kappa = alpha (1-beta) / (beta (1-alpha)) every two iterations).  The
first two entries (warm-up, still dominated by the arbitrary guess) and
the last entry (polluted by the stopping tolerance or the floor of the
budget) are discarded, and the geometric mean of the remaining ratios
is returned.  Applied to an exact geometric curve r^k this yields r^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = ["ErrorReport", "linf_norms", "estimate_contraction", "observed_order"]


@dataclass(frozen=True)
class ErrorReport:
    """Max-norm errors of a trajectory against a reference.

    linf_space[m] is the max-norm error at level m; linf_spacetime the
    max over levels.  reference_scale is the space-time max magnitude of
    the reference, so relative_spacetime is directly comparable across
    problems.
    """

    linf_space: np.ndarray
    linf_spacetime: float
    reference_scale: float

    @property
    def relative_spacetime(self) -> float:
        if self.reference_scale <= 0.0:
            raise ValueError("reference is identically zero; relative error undefined")
        return self.linf_spacetime / self.reference_scale


def linf_norms(history: np.ndarray, reference: np.ndarray) -> ErrorReport:
    """Per-level and space-time max-norm errors of history vs reference.

    Both arrays carry time on axis 0 and any node layout on the rest.
    """
    history = np.asarray(history, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if history.shape != reference.shape:
        raise ValueError(f"shape mismatch: {history.shape} vs {reference.shape}")
    if np.isnan(history).any() or np.isnan(reference).any():
        raise ValueError("NaN in input")
    diff = np.abs(history - reference).reshape(history.shape[0], -1)
    per_level = diff.max(axis=1) if diff.shape[1] else np.zeros(diff.shape[0])
    return ErrorReport(
        linf_space=per_level,
        linf_spacetime=float(per_level.max()),
        reference_scale=float(np.abs(reference).max()),
    )


def estimate_contraction(curve: Sequence[float], skip_head: int = 2, skip_tail: int = 1) -> float:
    """Two-iteration contraction factor of a decay curve.

    Geometric mean of e_{k+2} / e_k with the first skip_head entries and
    the last skip_tail entries of the curve excluded.  Needs at least
    skip_head + skip_tail + 3 strictly positive entries.
    """
    c = np.asarray(curve, dtype=float)
    if c.ndim != 1:
        raise ValueError("decay curve must be one-dimensional")
    if c.size < skip_head + skip_tail + 3:
        raise ValueError(f"need at least {skip_head + skip_tail + 3} entries, got {c.size}")
    if np.any(c <= 0.0) or np.isnan(c).any():
        raise ValueError("decay curve entries must be positive")
    last = c.size - skip_tail  # exclusive
    ratios = c[skip_head + 2 : last] / c[skip_head : last - 2]
    if ratios.size == 0:
        raise ValueError("no usable two-iteration ratios after trimming")
    return float(np.exp(np.mean(np.log(ratios))))


def observed_order(errors: Sequence[float], dts: Sequence[float]) -> np.ndarray:
    """Temporal orders log2(e_{i-1} / e_i) across a step-halving sweep."""
    e = np.asarray(errors, dtype=float)
    d = np.asarray(dts, dtype=float)
    if e.shape != d.shape or e.ndim != 1 or e.size < 2:
        raise ValueError("need matching 1d errors and dts with at least two entries")
    if np.any(e <= 0.0):
        raise ValueError("errors must be positive")
    if np.any(d <= 0.0) or np.any(np.abs(d[:-1] / d[1:] - 2.0) > 1e-9):
        raise ValueError("dts must halve at each level")
    return np.log2(e[:-1] / e[1:])
