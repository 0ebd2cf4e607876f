"""State-dependent discrete memoryless channels with i.i.d. states.

The physical channel is a kernel W(y|x,s) together with a state prior P_S.
Averaging the kernel over the state gives the effective DMC that governs
every capacity formula in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    LengthMismatch,
    NegativeProbability,
    NotADistribution,
    RowNotNormalized,
)

# Normalization is checked exactly at validation; derived quantities get a
# little accumulation slack.
ROW_TOL = 1e-12
DERIVED_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StateDMC:
    """A state-dependent DMC: kernel[x][s][y] plus a state prior.

    Immutable after construction; safe to share across concurrent tasks.
    """

    input_size: int
    output_size: int
    state_size: int
    kernel: np.ndarray       # shape (X, S, Y)
    state_prior: np.ndarray  # shape (S,)

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        prior = np.asarray(self.state_prior, dtype=float)
        if min(self.input_size, self.output_size, self.state_size) < 1:
            raise DimensionMismatch("all alphabet sizes must be >= 1")
        if kernel.shape != (self.input_size, self.state_size, self.output_size):
            raise DimensionMismatch(
                f"kernel shape {kernel.shape} does not match sizes "
                f"({self.input_size}, {self.state_size}, {self.output_size})"
            )
        if prior.shape != (self.state_size,):
            raise DimensionMismatch(
                f"state prior shape {prior.shape} does not match state size {self.state_size}"
            )
        if (kernel < 0).any() or (prior < 0).any():
            raise NegativeProbability("negative probability entry")
        if (kernel > 1).any() or (prior > 1).any():
            raise NegativeProbability("probability entry exceeds 1")
        sums = kernel.sum(axis=2)
        for x in range(self.input_size):
            for s in range(self.state_size):
                if abs(sums[x, s] - 1.0) > ROW_TOL:
                    raise RowNotNormalized(x, s, float(sums[x, s]))
        if abs(prior.sum() - 1.0) > ROW_TOL:
            raise NotADistribution(f"state prior sums to {prior.sum()!r}")
        kernel.setflags(write=False)
        prior.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "state_prior", prior)


@dataclass(frozen=True, eq=False)
class AveragedDMC:
    """The averaged channel: rows[x] = E_S[W(.|x,S)]."""

    rows: np.ndarray  # shape (X, Y)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise DimensionMismatch("rows must be a 2-D table")
        if (np.abs(rows.sum(axis=1) - 1.0) > DERIVED_TOL).any():
            raise NotADistribution("averaged row does not sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class SequenceTriple:
    """One closed-loop realization (x^n, s^n, y^n)."""

    x_seq: tuple[int, ...]
    s_seq: tuple[int, ...]
    y_seq: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.x_seq) == len(self.s_seq) == len(self.y_seq)):
            raise LengthMismatch("sequence lengths differ")


def validate_channel(raw_kernel, raw_prior) -> StateDMC:
    """Build a StateDMC from nested numeric arrays, rejecting malformed input.

    Normalization is checked, never silently repaired.
    """
    try:
        kernel = np.asarray(raw_kernel, dtype=float)
    except (ValueError, TypeError) as exc:
        raise DimensionMismatch(f"kernel is not rectangular: {exc}") from None
    try:
        prior = np.asarray(raw_prior, dtype=float)
    except (ValueError, TypeError) as exc:
        raise DimensionMismatch(f"state prior is malformed: {exc}") from None
    if kernel.ndim != 3:
        raise DimensionMismatch(f"kernel must be indexed [x][s][y], got {kernel.ndim} axes")
    if prior.ndim != 1:
        raise DimensionMismatch("state prior must be a vector")
    x, s, y = kernel.shape
    return StateDMC(input_size=x, output_size=y, state_size=s,
                    kernel=kernel, state_prior=prior)


def averaged_row(ch: StateDMC, x: int) -> np.ndarray:
    """Return sum_s P_S(s) * W(.|x,s)."""
    if not 0 <= x < ch.input_size:
        raise IndexOutOfRange(f"input symbol {x} out of range")
    return ch.state_prior @ ch.kernel[x]


def averaged_channel(ch: StateDMC) -> AveragedDMC:
    rows = np.einsum("s,xsy->xy", ch.state_prior, ch.kernel)
    return AveragedDMC(rows=rows)


def sample_state_sequence(ch: StateDMC, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. states from the prior; deterministic given the rng state."""
    cum = np.cumsum(ch.state_prior)
    cum[-1] = 1.0
    return np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)


def transmit(ch: StateDMC, x: int, s: int, rng: np.random.Generator) -> int:
    """Draw one output symbol from kernel[x][s][.]."""
    if not 0 <= x < ch.input_size:
        raise IndexOutOfRange(f"input symbol {x} out of range")
    if not 0 <= s < ch.state_size:
        raise IndexOutOfRange(f"state symbol {s} out of range")
    cum = np.cumsum(ch.kernel[x, s])
    cum[-1] = 1.0
    return int(np.searchsorted(cum, rng.random(), side="right"))


def sequence_log2_likelihood(ch: StateDMC, x_seq, y_seq) -> float:
    """log2 of E_{S^n}[W^n(y^n|x^n,S^n)].

    Equals the sum of per-letter averaged log-probabilities because states
    are i.i.d. and the channel is memoryless.  -inf for impossible sequences.
    """
    x_seq = np.asarray(x_seq, dtype=np.int64)
    y_seq = np.asarray(y_seq, dtype=np.int64)
    if x_seq.shape != y_seq.shape:
        raise LengthMismatch("input and output sequences differ in length")
    rows = averaged_channel(ch).rows
    probs = rows[x_seq, y_seq]
    if (probs == 0).any():
        return float("-inf")
    return float(np.sum(np.log2(probs)))


def sequence_likelihood(ch: StateDMC, x_seq, y_seq) -> float:
    """Linear-scale accessor for short sequences; underflows to 0 for long ones."""
    return float(2.0 ** sequence_log2_likelihood(ch, x_seq, y_seq))


# --- serialization -----------------------------------------------------------

def channel_to_dict(ch: StateDMC) -> dict:
    return {
        "input_size": ch.input_size,
        "output_size": ch.output_size,
        "state_size": ch.state_size,
        "state_prior": ch.state_prior.tolist(),
        "kernel": ch.kernel.tolist(),
    }


def channel_from_dict(spec: dict) -> StateDMC:
    for key in ("input_size", "output_size", "state_size", "state_prior", "kernel"):
        if key not in spec:
            raise DimensionMismatch(f"channel spec is missing key {key!r}")
    ch = validate_channel(spec["kernel"], spec["state_prior"])
    declared = (spec["input_size"], spec["state_size"], spec["output_size"])
    if ch.kernel.shape != declared:
        raise DimensionMismatch(
            f"declared sizes {declared} do not match kernel shape {ch.kernel.shape}"
        )
    return ch


def load_channel(path) -> tuple[StateDMC, "np.ndarray | None"]:
    """Read a channel spec file; returns (channel, inline distortion or None)."""
    with open(path) as fh:
        spec = json.load(fh)
    ch = channel_from_dict(spec)
    dist = None
    if "distortion" in spec:
        dist = np.asarray(spec["distortion"], dtype=float)
    return ch, dist
