"""Evaluation quantities and verification oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .consensus import ProblemInstance
from .graph import Graph


def true_max(inst: ProblemInstance | np.ndarray) -> float:
    a = inst.initial if isinstance(inst, ProblemInstance) else np.asarray(inst, dtype=float)
    if a.size == 0:
        raise ValueError("cannot take the maximum of an empty instance")
    return float(np.max(a))


def network_mse(x: np.ndarray, a_star: float) -> float:
    """Mean over realizations and agents of ``(x - a_star)**2``.

    ``x`` has shape (R, J) for R realizations at one iteration, or (J,).
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("network_mse needs at least one realization and one agent")
    if x.ndim == 1:
        x = x[None, :]
    return float(np.mean(per_realization_error(x, a_star)))


def per_realization_error(x: np.ndarray, a_star: float) -> np.ndarray:
    """``(1/J) sum_i (x_i - a_star)**2`` over the trailing agent axis.

    Accumulates agent by agent so the result for one row never depends on
    how many rows are computed together.
    """
    x = np.asarray(x, dtype=float)
    J = x.shape[-1]
    acc = np.zeros(x.shape[:-1])
    for i in range(J):
        acc += (x[..., i] - a_star) ** 2
    return acc / J


def aggregate(errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Combine per-realization error rows (R, K+1) into an MSE curve.

    NaN marks a flagged (diverged) point; it is left out of the mean and
    counted instead.  Rows are added strictly in realization order.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 2 or errors.shape[0] == 0:
        raise ValueError("expected a non-empty (realizations, iterations) array")
    total = np.zeros(errors.shape[1])
    count = np.zeros(errors.shape[1], dtype=np.int64)
    for row in errors:
        ok = ~np.isnan(row)
        total[ok] += row[ok]
        count += ok
    with np.errstate(invalid="ignore", divide="ignore"):
        mse = np.where(count > 0, total / np.maximum(count, 1), np.inf)
    return mse, errors.shape[0] - count


@dataclass
class MseCurve:
    values: np.ndarray
    diverged_count: np.ndarray
    realizations: int = 1
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.diverged_count = np.asarray(self.diverged_count, dtype=np.int64)
        if self.values.shape != self.diverged_count.shape:
            raise ValueError("MSE values and divergence counts differ in length")

    def __len__(self) -> int:
        return self.values.size

    @property
    def iterations(self) -> int:
        return self.values.size - 1

    @property
    def diverged(self) -> bool:
        return bool(self.diverged_count.any())

    @classmethod
    def from_errors(cls, errors: np.ndarray, **meta: Any) -> "MseCurve":
        mse, flagged = aggregate(errors)
        return cls(mse, flagged, int(np.asarray(errors).shape[0]), dict(meta))


@dataclass(frozen=True)
class SteadyState:
    value: float
    window: int
    # flagged (realization, iteration) points left out of the average
    excluded: int

    @property
    def diverged(self) -> bool:
        return self.excluded > 0


def default_window(curve: MseCurve) -> int:
    return max(1, curve.iterations // 10)


def steady_state_mse(curve: MseCurve, window: int | None = None) -> SteadyState:
    """Average of the last ``window`` MSE values (default: final 10% of K).

    Iterations where every realization had diverged carry no finite MSE and
    are skipped; if none remain the value is ``inf``.
    """
    if window is None:
        window = default_window(curve)
    if window < 1:
        raise ValueError(f"steady-state window must be >= 1, got {window}")
    if window > len(curve):
        raise ValueError(f"window {window} longer than the curve ({len(curve)})")
    tail = curve.values[-window:]
    excluded = int(curve.diverged_count[-window:].sum())
    finite = tail[np.isfinite(tail)]
    value = float(finite.mean()) if finite.size else math.inf
    return SteadyState(value, window, excluded)


@dataclass(frozen=True)
class ObjectiveReport:
    """Value of the reformulated problem at a candidate point, plus its constraint residuals."""

    objective: float  # inf when some y_i < a_i
    consensus_residual: float
    coupling_residual: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.objective)


def evaluate_objective(
    x: np.ndarray, y: np.ndarray, inst: ProblemInstance, g: Graph | None = None
) -> ObjectiveReport:
    """Objective ``mean(x)`` subject to ``y_i >= a_i``, with residuals of the equality constraints.

    The consensus residual is ``max |x_i - x_j|`` over graph edges (over all
    pairs when no graph is given).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = inst.initial
    if x.shape != a.shape or y.shape != a.shape:
        raise ValueError(f"expected x and y of shape {a.shape}, got {x.shape} and {y.shape}")
    feasible = bool(np.all(y >= a))
    objective = float(np.mean(x)) if feasible else math.inf
    if g is None:
        consensus = float(np.ptp(x)) if x.size else 0.0
    elif g.num_edges:
        i, j = np.array(g.edges).T
        consensus = float(np.max(np.abs(x[i] - x[j])))
    else:
        consensus = 0.0
    coupling = float(np.max(np.abs(x - y)))
    return ObjectiveReport(objective, consensus, coupling)
