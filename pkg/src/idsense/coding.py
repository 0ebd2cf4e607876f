"""Concatenated feedback ID codes with distortion-feasible inputs.

The scheme sends a pilot block (a constant symbol, or fresh draws from the
optimizing distribution), turns the fed-back pilot output into shared
randomness through a keyed pseudorandom coloring, and transmits the color
with a short inner code over the feasible input alphabet.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .channel import AveragedDMC, StateDMC, averaged_channel
from .capacity import InputDistribution, blahut_arimoto, entropy
from .errors import (
    DegenerateCode,
    InfeasibleDistortion,
    LengthMismatch,
    OutOfTime,
    TooManyMessages,
    ZeroCapacityChannel,
)
from .estimation import FEASIBILITY_TOL, DistortionMatrix, distortion_profile

EXACT_ERROR_GUARD = 4096      # enumerate Y^k exactly up to this many tails
MC_ERROR_TRIALS = 2000
SUPPORT_TOL = 1e-9


# --- keyed pseudorandom coloring --------------------------------------------

def _prf_u64(master_seed: int, identity: int, payload: bytes, counter: int) -> int:
    key = (master_seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    h = hashlib.blake2b(digest_size=8, key=key)
    ident = identity.to_bytes(max(1, (identity.bit_length() + 7) // 8), "big")
    h.update(len(ident).to_bytes(4, "big"))
    h.update(ident)
    h.update(counter.to_bytes(4, "big"))
    h.update(payload)
    return int.from_bytes(h.digest(), "big")


def coloring_value(master_seed: int, color_count: int, identity: int, y_pilot) -> int:
    """Pseudorandom color of (identity, pilot block) in {1..M}.

    Rejection sampling removes the modulo bias; sender and receiver share
    only the master seed.
    """
    payload = bytes(int(y) for y in y_pilot)
    bound = (2 ** 64 // color_count) * color_count
    counter = 0
    value = _prf_u64(master_seed, identity, payload, counter)
    while value >= bound:
        counter += 1
        value = _prf_u64(master_seed, identity, payload, counter)
    return value % color_count + 1


# --- inner transmission code -------------------------------------------------

@dataclass(frozen=True, eq=False)
class TransmissionCode:
    """An (k, M) code over the averaged channel with ML decoding.

    `log_table[j, t, y]` caches log2 W_avg(y | u_j[t]) so scalar and
    vectorized decoders share bit-identical likelihoods.
    """

    k: int
    M: int
    codewords: tuple[tuple[int, ...], ...]
    rows: np.ndarray            # averaged channel rows used for decoding
    log_table: np.ndarray       # shape (M, k, Y)
    max_error: float
    error_method: str           # "exact" or "monte-carlo"

    def decode(self, y_tail) -> int:
        """ML message index in {1..M}; ties go to the lowest index."""
        y_tail = np.asarray(y_tail, dtype=np.int64)
        if y_tail.shape != (self.k,):
            raise LengthMismatch(f"tail must have length {self.k}")
        loglik = self.log_table[:, np.arange(self.k), y_tail].sum(axis=1)
        return int(np.argmax(loglik)) + 1


def _log_table(rows: np.ndarray, codewords) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logrows = np.log2(rows)
    return np.stack([logrows[np.asarray(cw)] for cw in codewords])


def _exact_error_profile(rows: np.ndarray, codewords) -> np.ndarray:
    """Per-message ML error by full enumeration of output tails."""
    k = len(codewords[0])
    ny = rows.shape[1]
    tails = np.array(list(product(range(ny), repeat=k)), dtype=np.int64)
    table = _log_table(rows, codewords)
    loglik = np.zeros((len(codewords), tails.shape[0]))
    for t in range(k):
        loglik += table[:, t, tails[:, t]]
    decoded = np.argmax(loglik, axis=0)
    lik = np.exp2(loglik)
    errors = np.empty(len(codewords))
    for j in range(len(codewords)):
        errors[j] = 1.0 - lik[j, decoded == j].sum()
    return errors


def _mc_error_profile(rows: np.ndarray, codewords, rng: np.random.Generator,
                      trials: int = MC_ERROR_TRIALS) -> np.ndarray:
    k = len(codewords[0])
    cum = np.cumsum(rows, axis=1)
    cum[:, -1] = 1.0
    table = _log_table(rows, codewords)
    errors = np.empty(len(codewords))
    for j, cw in enumerate(codewords):
        u = rng.random((trials, k))
        y = (u[:, :, None] >= cum[np.asarray(cw)][None, :, :]).sum(axis=2)
        loglik = np.zeros((len(codewords), trials))
        for t in range(k):
            loglik += table[:, t, y[:, t]]
        errors[j] = float(np.mean(np.argmax(loglik, axis=0) != j))
    return errors


def _improve_codebook(rows: np.ndarray, codewords: list, candidates: list):
    """Greedy swap descent on the maximal exact error, for tiny codeword spaces."""
    current = float(_exact_error_profile(rows, codewords).max())
    for _ in range(100):
        best_swap, best_err = None, current
        for j in range(len(codewords)):
            for cand in candidates:
                if cand in codewords:
                    continue
                trial = list(codewords)
                trial[j] = cand
                err = float(_exact_error_profile(rows, trial).max())
                if err < best_err - 1e-15:
                    best_swap, best_err = (j, cand), err
        if best_swap is None:
            break
        codewords[best_swap[0]] = best_swap[1]
        current = best_err
    return current, tuple(codewords)


def build_transmission_code(avg: AveragedDMC, k: int, M: int, feasible,
                            rng: np.random.Generator,
                            restarts: int = 32) -> TransmissionCode:
    """Random codebook over the feasible inputs with ML decoding.

    Codewords are drawn i.i.d. from the capacity-achieving distribution of
    the restricted averaged channel; duplicate codewords are resampled while
    distinct ones remain available, and the best of several codebooks
    (smallest measured maximal error) is kept.
    """
    if M < 2:
        raise DegenerateCode("an inner code needs at least 2 messages")
    support = sorted(set(int(x) for x in feasible))
    if not support:
        raise InfeasibleDistortion(float("nan"))
    sub_rows = avg.rows[support]
    cap, p_opt, _ = blahut_arimoto(sub_rows, tol=1e-9)
    if len(support) > 1 and cap <= 1e-9:
        raise ZeroCapacityChannel("restricted averaged channel has zero capacity")
    if len(support) == 1:
        raise ZeroCapacityChannel("a single feasible input cannot carry messages")
    p_opt = np.where(p_opt < SUPPORT_TOL, 0.0, p_opt)
    p_opt /= p_opt.sum()
    active = [support[i] for i in np.flatnonzero(p_opt)]
    weights = p_opt[p_opt > 0]
    distinct_available = len(active) ** k
    exact = avg.rows.shape[1] ** k <= EXACT_ERROR_GUARD

    best = None
    for _ in range(restarts):
        codewords: list[tuple[int, ...]] = []
        seen = set()
        for _j in range(M):
            for _try in range(200):
                cw = tuple(int(active[i]) for i in
                           rng.choice(len(active), size=k, p=weights))
                if cw not in seen or len(seen) >= distinct_available:
                    break
            codewords.append(cw)
            seen.add(cw)
        if exact:
            errors = _exact_error_profile(avg.rows, codewords)
            method = "exact"
        else:
            errors = _mc_error_profile(avg.rows, codewords, rng)
            method = "monte-carlo"
        worst = float(errors.max())
        if best is None or worst < best[0]:
            best = (worst, tuple(codewords), method)
        if worst == 0.0:
            break

    worst, codewords, method = best
    if exact and distinct_available <= 256 and worst > 0.0:
        worst, codewords = _improve_codebook(avg.rows, list(codewords),
                                             [tuple(c) for c in
                                              product(active, repeat=k)])
    if worst >= 0.5:
        raise TooManyMessages(
            f"M={M} messages exceed what blocklength k={k} supports "
            f"(measured maximal error {worst:.3f})"
        )
    return TransmissionCode(k=k, M=M, codewords=codewords, rows=avg.rows,
                            log_table=_log_table(avg.rows, codewords),
                            max_error=worst, error_method=method)


# --- the concatenated ID feedback code ---------------------------------------

ABORT_COLOR = 1  # fallback inner message when the pilot block is atypical


@dataclass(frozen=True, eq=False)
class IDFeedbackCode:
    """Pilot policy + coloring functions + inner transmission code."""

    mode: str                               # "det" or "rand"
    n: int
    m: int
    eps: float
    pilot: "int | InputDistribution"
    pilot_row: np.ndarray                   # output law of one pilot symbol
    identity_count: int
    color_count: int
    inner: TransmissionCode
    master_seed: int
    budget: float
    feasible: tuple[int, ...]

    def coloring(self, identity: int, y_pilot) -> int:
        if not 1 <= identity <= self.identity_count:
            raise DegenerateCode(f"identity {identity} out of range")
        return coloring_value(self.master_seed, self.color_count, identity, y_pilot)

    def pilot_typical(self, y_pilot) -> bool:
        """Max-norm test of the empirical pilot output type against its law.

        Depends on the output block only, so encoder and decoder always
        agree; for a constant deterministic pilot this coincides with
        conditional-type typicality.
        """
        y_pilot = np.asarray(y_pilot, dtype=np.int64)
        freq = np.bincount(y_pilot, minlength=self.pilot_row.size) / self.n
        return float(np.abs(freq - self.pilot_row).max()) <= self.eps

    def to_dict(self) -> dict:
        pilot = (int(self.pilot) if self.mode == "det"
                 else self.pilot.p.tolist())
        return {
            "mode": self.mode, "n": self.n, "m": self.m, "eps": self.eps,
            "pilot": pilot, "identities": self.identity_count,
            "colors": self.color_count, "seed": self.master_seed,
            "budget": self.budget,
            "codewords": [list(cw) for cw in self.inner.codewords],
            "inner_max_error": self.inner.max_error,
            "inner_error_method": self.inner.error_method,
        }


@dataclass(frozen=True)
class EncoderState:
    """Single-owner state of one encoding pass."""

    identity: int
    pilot_len: int
    total_len: int
    t: int = 1                              # next time index, 1-based
    y_pilot: tuple[int, ...] = ()
    committed: int | None = None            # inner message, set at t = n+1
    aborted: bool = False


def initial_state(code: IDFeedbackCode, identity: int) -> EncoderState:
    if not 1 <= identity <= code.identity_count:
        raise DegenerateCode(f"identity {identity} out of range")
    return EncoderState(identity=identity, pilot_len=code.n, total_len=code.m)


def encode_step(code: IDFeedbackCode, state: EncoderState,
                rng: np.random.Generator) -> tuple[int, EncoderState]:
    """Emit the next input symbol and advance the encoder clock."""
    t = state.t
    if t > state.total_len:
        raise OutOfTime(f"encoder already emitted all {state.total_len} symbols")
    if t <= state.pilot_len:
        if code.mode == "det":
            x = int(code.pilot)
        else:
            p = code.pilot.p
            cum = np.cumsum(p)
            cum[-1] = 1.0
            x = int(np.searchsorted(cum, rng.random(), side="right"))
        return x, replace(state, t=t + 1)
    if state.committed is None:
        if len(state.y_pilot) != state.pilot_len:
            raise LengthMismatch("pilot feedback incomplete at commit time")
        if code.pilot_typical(state.y_pilot):
            j = code.coloring(state.identity, state.y_pilot)
            aborted = False
        else:
            j = ABORT_COLOR
            aborted = True
        state = replace(state, committed=j, aborted=aborted)
    x = code.inner.codewords[state.committed - 1][t - state.pilot_len - 1]
    return int(x), replace(state, t=t + 1)


def feedback_update(state: EncoderState, y_t: int) -> EncoderState:
    """Record one fed-back output; only the pilot block is retained."""
    if len(state.y_pilot) < state.pilot_len:
        return replace(state, y_pilot=state.y_pilot + (int(y_t),))
    return state


def verify(code: IDFeedbackCode, claimed_identity: int, y_full) -> bool:
    """Receiver test: pilot typical and inner decode equal to the claimed color."""
    y_full = [int(y) for y in y_full]
    if len(y_full) != code.m:
        raise LengthMismatch(f"output must have length {code.m}")
    y_pilot = y_full[:code.n]
    if not code.pilot_typical(y_pilot):
        return False
    expected = code.coloring(claimed_identity, y_pilot)
    return code.inner.decode(y_full[code.n:]) == expected


# --- construction ------------------------------------------------------------

def select_det_pilot(ch: StateDMC, dist: DistortionMatrix, budget: float) -> int:
    """The budget-feasible input with the largest averaged-row entropy."""
    profile = distortion_profile(ch, dist).per_input
    feasible = np.flatnonzero(profile <= budget + FEASIBILITY_TOL)
    if feasible.size == 0:
        raise InfeasibleDistortion(budget, min_feasible=float(profile.min()))
    rows = averaged_channel(ch).rows
    entropies = [entropy(rows[x]) for x in feasible]
    return int(feasible[int(np.argmax(entropies))])


def build_id_code(ch: StateDMC, dist: DistortionMatrix, budget: float, n: int,
                  identities: int, colors: int, eps: float, mode: str,
                  master_seed: int) -> IDFeedbackCode:
    """Assemble the concatenated feedback ID code for one budget."""
    from .capacity import rand_capacity_distortion  # avoid import cycle at module load

    if mode not in ("det", "rand"):
        raise ValueError(f"unknown mode {mode!r}")
    if identities < 2:
        raise DegenerateCode("need at least 2 identities")
    if n < 1:
        raise DegenerateCode("pilot length must be >= 1")
    avg = averaged_channel(ch)
    k = math.ceil(math.sqrt(n))
    profile = distortion_profile(ch, dist).per_input
    feasible = np.flatnonzero(profile <= budget + FEASIBILITY_TOL)
    if feasible.size == 0:
        raise InfeasibleDistortion(budget, min_feasible=float(profile.min()))

    if mode == "det":
        pilot: int | InputDistribution = select_det_pilot(ch, dist, budget)
        pilot_row = avg.rows[pilot].copy()
        inner_support = [int(x) for x in feasible]
    else:
        res = rand_capacity_distortion(ch, dist, budget)
        pilot = res.maximizer
        pilot_row = pilot.p @ avg.rows
        inner_support = [int(x) for x in np.flatnonzero(pilot.p > SUPPORT_TOL)]

    rng = np.random.default_rng([master_seed & 0xFFFFFFFFFFFFFFFF, 0xC0DEB00C])
    inner = build_transmission_code(avg, k, colors, inner_support, rng)
    return IDFeedbackCode(mode=mode, n=n, m=n + k, eps=eps, pilot=pilot,
                          pilot_row=pilot_row, identity_count=identities,
                          color_count=colors, inner=inner,
                          master_seed=master_seed, budget=budget,
                          feasible=tuple(int(x) for x in feasible))
