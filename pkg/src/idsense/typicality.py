"""Conditional types and the typical output set used for common randomness.

A pilot output block is typical when its conditional type sits within a
max-norm ball around the averaged channel rows; the exact enumeration here
is the desk-scale oracle for the size and mass bounds used as diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .channel import AveragedDMC, StateDMC, averaged_channel
from .errors import LengthMismatch, MissingRow, TooLargeToEnumerate
from .estimation import _check_distribution

ENUMERATION_GUARD = 2 ** 20


@dataclass(frozen=True, eq=False)
class ConditionalType:
    """Joint occurrence counts of (x, y) and the normalized rows V(y|x).

    Rows for inputs that never occur are flagged absent rather than zeroed.
    """

    counts: np.ndarray   # shape (X, Y), integer
    V: np.ndarray        # shape (X, Y); rows of absent inputs are zero
    present: np.ndarray  # shape (X,), bool

    def __post_init__(self):
        for name in ("counts", "V", "present"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def joint_type(x_seq, y_seq, input_size: int | None = None,
               output_size: int | None = None) -> ConditionalType:
    """Exact conditional type of (x^n, y^n)."""
    x_seq = np.asarray(x_seq, dtype=np.int64)
    y_seq = np.asarray(y_seq, dtype=np.int64)
    if x_seq.shape != y_seq.shape:
        raise LengthMismatch("input and output sequences differ in length")
    if x_seq.size == 0:
        raise LengthMismatch("sequences must have length >= 1")
    nx = input_size if input_size is not None else int(x_seq.max()) + 1
    ny = output_size if output_size is not None else int(y_seq.max()) + 1
    counts = np.zeros((nx, ny), dtype=np.int64)
    np.add.at(counts, (x_seq, y_seq), 1)
    row_tot = counts.sum(axis=1)
    present = row_tot > 0
    V = np.zeros((nx, ny), dtype=float)
    V[present] = counts[present] / row_tot[present, None]
    return ConditionalType(counts=counts, V=V, present=present)


def max_norm_distance(ctype: ConditionalType, avg: AveragedDMC, support) -> float:
    """max over support inputs and outputs of |V(y|x) - W(y|x)|."""
    support = sorted(set(int(x) for x in support))
    if not support:
        raise MissingRow("support must be nonempty")
    for x in support:
        if x >= ctype.present.size or not ctype.present[x]:
            raise MissingRow(f"conditional type has no row for input {x}")
    idx = np.array(support)
    return float(np.abs(ctype.V[idx] - avg.rows[idx]).max())


def typical_membership(ch: StateDMC, x_seq, y_seq, eps: float) -> bool:
    """Whether y^n has a conditional type within eps of the averaged rows.

    The distance is measured only on inputs actually occurring in x^n.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    avg = averaged_channel(ch)
    ctype = joint_type(x_seq, y_seq, input_size=ch.input_size,
                       output_size=ch.output_size)
    support = np.flatnonzero(ctype.present)
    return max_norm_distance(ctype, avg, support) <= eps


def marginal_typical_membership(row: np.ndarray, y_seq, eps: float) -> bool:
    """Whether the empirical output frequency is within eps (max-norm) of `row`.

    Used for the randomized pilot, where only the output block is common to
    encoder and decoder; `row` is then the P*-mixture output distribution.
    """
    y_seq = np.asarray(y_seq, dtype=np.int64)
    if y_seq.size == 0:
        raise LengthMismatch("sequence must have length >= 1")
    freq = np.bincount(y_seq, minlength=row.size) / y_seq.size
    return float(np.abs(freq - row).max()) <= eps


def type_radius(n: int, eps: float, input_size: int, output_size: int) -> float:
    """The explicit c(eps) used in the desk-scale size sandwich."""
    return eps * input_size * output_size * np.log2(n + 1) / n + eps * np.log2(output_size)


def typical_size_bounds(ch: StateDMC, pilot, n: int, eps: float) -> tuple[float, float]:
    """(log2 lower, log2 upper) bounds n*(H -+ c(eps)) on the typical set size.

    H is the averaged-row entropy for a symbol pilot, or the mixture output
    entropy for a distribution pilot.
    """
    from .capacity import entropy  # local import: capacity pulls estimation

    if n < 1:
        raise ValueError("n must be >= 1")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    rows = averaged_channel(ch).rows
    if np.isscalar(pilot) or isinstance(pilot, (int, np.integer)):
        h = entropy(rows[int(pilot)])
    else:
        p = getattr(pilot, "p", pilot)
        p = _check_distribution(p, ch.input_size)
        h = entropy(p @ rows)
    c = type_radius(n, eps, ch.input_size, ch.output_size)
    return n * (h - c), n * (h + c)


def enumerate_typical_set(ch: StateDMC, x_seq, eps: float) -> list[tuple[int, ...]]:
    """Exhaustive, lexicographically sorted typical set for a fixed pilot x^n."""
    x_seq = tuple(int(x) for x in x_seq)
    n = len(x_seq)
    if ch.output_size ** n > ENUMERATION_GUARD:
        raise TooLargeToEnumerate(
            f"|Y|^n = {ch.output_size}^{n} exceeds the enumeration guard"
        )
    members = []
    for y_seq in product(range(ch.output_size), repeat=n):
        if typical_membership(ch, x_seq, y_seq, eps):
            members.append(y_seq)
    return members
