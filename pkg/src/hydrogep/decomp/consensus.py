"""Progressive-hedging bookkeeping shared by the accelerated multi-master method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConsensusState:
    weights: np.ndarray  # (S, n1) one multiplier vector per master
    xbar: np.ndarray  # (n1,) consensus point, nan before the first update
    rho: np.ndarray  # (n1,) per-component step / penalty weight
    iteration: int = 0

    @classmethod
    def initial(cls, n_masters: int, rho) -> "ConsensusState":
        rho = np.asarray(rho, dtype=float)
        return cls(np.zeros((n_masters, rho.size)), np.full(rho.size, np.nan), rho, 0)

    @property
    def started(self) -> bool:
        return self.iteration > 0

    def weighted_sum(self, prob) -> np.ndarray:
        """sum_s p_s w_s, zero up to rounding."""
        return np.asarray(prob, float) @ self.weights


def consensus_point(points, prob) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    prob = np.asarray(prob, dtype=float)
    xbar = np.zeros(points.shape[1])
    for p, x in zip(prob, points):  # fixed summation order
        xbar += p * x
    return xbar


def ph_update(state: ConsensusState, points, prob) -> ConsensusState:
    """``w_s <- w_s + rho * (x_s - xbar)`` with ``xbar = sum_s p_s x_s``.

    Starting from zero weights this keeps ``sum_s p_s w_s = 0``.
    """
    points = np.asarray(points, dtype=float)
    prob = np.asarray(prob, dtype=float)
    if points.shape != state.weights.shape:
        raise ValueError(f"trial points have shape {points.shape}, weights {state.weights.shape}")
    if abs(prob.sum() - 1.0) > 1e-12 * prob.size:
        raise ValueError("master probabilities must sum to one")
    xbar = consensus_point(points, prob)
    w = state.weights + state.rho[None, :] * (points - xbar[None, :])
    return ConsensusState(w, xbar, state.rho, state.iteration + 1)
