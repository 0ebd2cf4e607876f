"""Optimal per-letter state estimation and minimal distortion profiles.

The estimator picks, for each reachable (input, output) pair, the state
reconstruction that minimizes the posterior-expected distortion.  The
profiles d*(x) and d*(P) it induces define which inputs and input
distributions stay within a sensing budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import StateDMC, averaged_channel
from .errors import (
    IdsenseError,
    IndexOutOfRange,
    LengthMismatch,
    NotADistribution,
    ZeroProbabilityObservation,
)

# Absolute slack for budget comparisons: analytically tight budgets
# (D exactly equal to some d*(x)) count as feasible.
FEASIBILITY_TOL = 1e-12
SIMPLEX_TOL = 1e-9


class NegativeDistortion(IdsenseError):
    pass


@dataclass(frozen=True, eq=False)
class DistortionMatrix:
    """Nonnegative distortion table d[s][s_hat]."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2:
            raise NotADistribution("distortion matrix must be 2-D")
        if not np.isfinite(d).all() or (d < 0).any():
            raise NegativeDistortion("distortion entries must be finite and >= 0")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


def hamming_distortion(state_size: int) -> DistortionMatrix:
    return DistortionMatrix(d=1.0 - np.eye(state_size))


@dataclass(frozen=True, eq=False)
class EstimatorTable:
    """Deterministic per-letter rule h[x][y] -> state index."""

    h: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.int64)
        h.setflags(write=False)
        object.__setattr__(self, "h", h)


@dataclass(frozen=True, eq=False)
class DistortionProfile:
    """Minimal expected distortion per input symbol."""

    per_input: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.per_input, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "per_input", v)


def _check_distribution(p, size: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (size,):
        raise NotADistribution(f"distribution has shape {p.shape}, expected ({size},)")
    if (p < -SIMPLEX_TOL).any() or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise NotADistribution("vector is not on the probability simplex")
    return p


def posterior_state(ch: StateDMC, x: int, y: int) -> np.ndarray:
    """P(s | x, y) by Bayes over the state prior."""
    if not 0 <= x < ch.input_size or not 0 <= y < ch.output_size:
        raise IndexOutOfRange(f"symbol pair ({x}, {y}) out of range")
    joint = ch.state_prior * ch.kernel[x, :, y]
    total = joint.sum()
    if total <= 0.0:
        raise ZeroProbabilityObservation(x, y)
    return joint / total


def posterior_cost(ch: StateDMC, dist: DistortionMatrix) -> np.ndarray:
    """cost[x, y, s_hat] = sum_s P_S(s) W(y|x,s) d(s, s_hat) (unnormalized posterior cost)."""
    return np.einsum("s,xsy,st->xyt", ch.state_prior, ch.kernel, dist.d)


def optimal_estimator(ch: StateDMC, dist: DistortionMatrix) -> EstimatorTable:
    """Minimum-posterior-cost rule; ties broken by lowest state index.

    Pairs (x, y) with P(y|x) = 0 are never reachable; their entry is fixed
    to state 0 and contributes nothing to any expectation.
    """
    cost = posterior_cost(ch, dist)
    h = np.argmin(cost, axis=2)
    reachable = averaged_channel(ch).rows > 0
    h = np.where(reachable, h, 0)
    return EstimatorTable(h=h)


def min_distortion_input(ch: StateDMC, dist: DistortionMatrix, x: int) -> float:
    """d*(x): expected distortion of the optimal rule given input x."""
    if not 0 <= x < ch.input_size:
        raise IndexOutOfRange(f"input symbol {x} out of range")
    h = optimal_estimator(ch, dist).h
    cost = posterior_cost(ch, dist)
    return float(cost[x, np.arange(ch.output_size), h[x]].sum())


def distortion_profile(ch: StateDMC, dist: DistortionMatrix) -> DistortionProfile:
    h = optimal_estimator(ch, dist).h
    cost = posterior_cost(ch, dist)
    per_input = np.take_along_axis(cost, h[:, :, None], axis=2)[:, :, 0].sum(axis=1)
    return DistortionProfile(per_input=per_input)


def min_distortion_dist(ch: StateDMC, dist: DistortionMatrix, p) -> float:
    """d*(P) = sum_x P(x) d*(x)."""
    p = _check_distribution(p, ch.input_size)
    return float(p @ distortion_profile(ch, dist).per_input)


def feasible_inputs(ch: StateDMC, dist: DistortionMatrix, budget: float) -> set[int]:
    """The input set {x : d*(x) <= D}; may be empty."""
    profile = distortion_profile(ch, dist).per_input
    return {int(x) for x in np.flatnonzero(profile <= budget + FEASIBILITY_TOL)}


def feasible_distribution(ch: StateDMC, dist: DistortionMatrix, budget: float, p) -> bool:
    """Whether P belongs to the budgeted distribution set."""
    return min_distortion_dist(ch, dist, p) <= budget + FEASIBILITY_TOL


def estimate_sequence(table: EstimatorTable, x_seq, y_seq) -> np.ndarray:
    """Apply the per-letter rule; strictly causal in (x_t, y_t)."""
    x_seq = np.asarray(x_seq, dtype=np.int64)
    y_seq = np.asarray(y_seq, dtype=np.int64)
    if x_seq.shape != y_seq.shape:
        raise LengthMismatch("input and output sequences differ in length")
    if x_seq.size == 0:
        return np.zeros(0, dtype=np.int64)
    return table.h[x_seq, y_seq]
