"""Monte Carlo harness and exact brute-force oracles.

Every stochastic estimate produced here is anchored by an exact companion:
error rates by exhaustive output enumeration, estimator distortion by
exhaustive table search, and randomized capacities by a simplex grid.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .channel import StateDMC, averaged_channel, sample_state_sequence, transmit
from .coding import ABORT_COLOR, IDFeedbackCode, encode_step, feedback_update, \
    initial_state, verify
from .errors import AlphabetTooLarge, TooLargeToEnumerate
from .estimation import (
    FEASIBILITY_TOL,
    DistortionMatrix,
    EstimatorTable,
    estimate_sequence,
    optimal_estimator,
    posterior_cost,
)

ENUMERATION_GUARD = 2 ** 20


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    """One closed-loop trial: what was sent, tested, sensed, and decided."""

    sent_identity: int
    tested_identity: int
    accepted: bool
    pilot_typical: bool
    distortions: tuple[float, ...]          # d(s_t, s_hat_t) for t = 1..m
    x_seq: tuple[int, ...]
    s_seq: tuple[int, ...]
    y_seq: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SimReport:
    """Aggregated error and distortion estimates with standard errors."""

    identities: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    trials_per_pair: int
    seed: int
    lambda1_per_identity: dict
    lambda2_per_pair: dict
    lambda1_hat: float
    lambda1_stderr: float
    lambda2_hat: float
    lambda2_stderr: float
    d_t_hat: np.ndarray
    d_t_stderr: np.ndarray
    d_bar_hat: float = field(default=0.0)

    def __post_init__(self):
        object.__setattr__(self, "d_bar_hat", float(np.mean(self.d_t_hat)))

    def to_dict(self) -> dict:
        return {
            "identities": [int(i) for i in self.identities],
            "pairs": [[int(a), int(b)] for a, b in self.pairs],
            "trials_per_pair": self.trials_per_pair,
            "seed": self.seed,
            "lambda1_per_identity": {str(k): v for k, v in
                                     sorted(self.lambda1_per_identity.items())},
            "lambda2_per_pair": {f"{a}->{b}": v for (a, b), v in
                                 sorted(self.lambda2_per_pair.items())},
            "lambda1_hat": self.lambda1_hat,
            "lambda1_stderr": self.lambda1_stderr,
            "lambda2_hat": self.lambda2_hat,
            "lambda2_stderr": self.lambda2_stderr,
            "d_t_hat": self.d_t_hat.tolist(),
            "d_t_stderr": self.d_t_stderr.tolist(),
            "d_bar_hat": self.d_bar_hat,
        }


def _rate_stderr(p: float, trials: int) -> float:
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / trials))


# --- single-trial reference path ---------------------------------------------

def run_trial(code: IDFeedbackCode, ch: StateDMC, dist: DistortionMatrix,
              identity: int, tested_identity: int,
              rng: np.random.Generator) -> TrialOutcome:
    """Simulate the full m-step closed loop for one (sent, tested) pair."""
    table = optimal_estimator(ch, dist)
    states = sample_state_sequence(ch, code.m, rng)
    state = initial_state(code, identity)
    xs, ys = [], []
    for t in range(code.m):
        x, state = encode_step(code, state, rng)
        y = transmit(ch, x, int(states[t]), rng)
        state = feedback_update(state, y)
        xs.append(x)
        ys.append(y)
    s_hat = estimate_sequence(table, xs, ys)
    dvals = tuple(float(dist.d[int(states[t]), int(s_hat[t])])
                  for t in range(code.m))
    accepted = verify(code, tested_identity, ys)
    return TrialOutcome(sent_identity=identity, tested_identity=tested_identity,
                        accepted=accepted, pilot_typical=not state.aborted,
                        distortions=dvals, x_seq=tuple(xs),
                        s_seq=tuple(int(s) for s in states), y_seq=tuple(ys))


# --- vectorized pair simulation ----------------------------------------------

def _pair_seed(seed: int, i: int, i_prime: int) -> int:
    h = hashlib.blake2b(digest_size=8)
    for v in (seed, i, i_prime):
        b = int(v).to_bytes(max(1, (int(v).bit_length() + 7) // 8), "big", signed=False)
        h.update(len(b).to_bytes(4, "big"))
        h.update(b)
    return int.from_bytes(h.digest(), "big")


def _sample_rows(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Categorical draws: cum_rows (..., Y) cumulative, u (...) uniforms."""
    return (u[..., None] >= cum_rows).sum(axis=-1)


def _colors_for(code: IDFeedbackCode, identity: int,
                pilots: np.ndarray) -> np.ndarray:
    """Coloring values per trial, computed once per distinct pilot block."""
    uniq, inverse = np.unique(pilots, axis=0, return_inverse=True)
    values = np.array([code.coloring(identity, row) for row in uniq],
                      dtype=np.int64)
    return values[inverse]


def _simulate_pair(code: IDFeedbackCode, ch: StateDMC, table: EstimatorTable,
                   dist: DistortionMatrix, identity: int, tested_identity: int,
                   trials: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """All trials of one ordered pair at once.

    Returns (accept flags, per-trial per-symbol distortions).
    """
    rng = np.random.default_rng(seed)
    n, m, k = code.n, code.m, code.inner.k
    cum_prior = np.cumsum(ch.state_prior)
    cum_prior[-1] = 1.0
    states = _sample_rows(cum_prior, rng.random((trials, m)))

    cum_kernel = np.cumsum(ch.kernel, axis=2)
    cum_kernel[:, :, -1] = 1.0
    if code.mode == "det":
        x_pilot = np.full((trials, n), int(code.pilot), dtype=np.int64)
    else:
        cum_p = np.cumsum(code.pilot.p)
        cum_p[-1] = 1.0
        x_pilot = _sample_rows(cum_p, rng.random((trials, n)))
    y_pilot = _sample_rows(cum_kernel[x_pilot, states[:, :n]],
                           rng.random((trials, n)))

    freq = np.stack([(y_pilot == y).sum(axis=1) for y in range(ch.output_size)],
                    axis=1) / n
    typical = np.abs(freq - code.pilot_row).max(axis=1) <= code.eps

    sent_colors = np.where(typical, _colors_for(code, identity, y_pilot),
                           ABORT_COLOR)
    if tested_identity == identity:
        tested_colors = _colors_for(code, identity, y_pilot)
    else:
        tested_colors = _colors_for(code, tested_identity, y_pilot)

    codewords = np.array(code.inner.codewords, dtype=np.int64)
    x_tail = codewords[sent_colors - 1]
    y_tail = _sample_rows(cum_kernel[x_tail, states[:, n:]],
                          rng.random((trials, k)))
    loglik = np.zeros((code.color_count, trials))
    for t in range(k):
        loglik += code.inner.log_table[:, t, y_tail[:, t]]
    decoded = np.argmax(loglik, axis=0) + 1

    accept = typical & (decoded == tested_colors)
    x_full = np.concatenate([x_pilot, x_tail], axis=1)
    y_full = np.concatenate([y_pilot, y_tail], axis=1)
    s_hat = table.h[x_full, y_full]
    dvals = dist.d[states, s_hat]
    return accept, dvals


def _choose_identities(code: IDFeedbackCode, identity_sample: str, seed: int,
                       max_identities: int = 8, max_pairs: int = 16):
    n_ids = code.identity_count
    if identity_sample == "all" or (identity_sample == "auto" and n_ids <= max_identities):
        if n_ids > 512:
            raise TooLargeToEnumerate(f"cannot test all {n_ids} identities")
        identities = list(range(1, n_ids + 1))
    elif identity_sample in ("auto", "random"):
        picker = random.Random(seed)
        chosen = set()
        while len(chosen) < max_identities:
            chosen.add(picker.randrange(1, n_ids + 1))
        identities = sorted(chosen)
    else:
        raise ValueError(f"unknown identity_sample {identity_sample!r}")
    ordered = [(a, b) for a in identities for b in identities if a != b]
    if len(ordered) > max_pairs:
        picker = random.Random(seed + 1)
        ordered = picker.sample(ordered, max_pairs)
        ordered.sort()
    return identities, ordered


def monte_carlo(code: IDFeedbackCode, ch: StateDMC, dist: DistortionMatrix,
                trials_per_pair: int, identity_sample: str = "auto",
                seed: int = 0) -> SimReport:
    """Estimate lambda1, lambda2 and per-symbol distortion by simulation.

    lambda1 is reported as the max over tested identities of the rejection
    rate of the identity's own test; lambda2 as the max over tested ordered
    pairs of the false-accept rate.  Deterministic given the seed.
    """
    if trials_per_pair < 1:
        raise ValueError("trials_per_pair must be >= 1")
    table = optimal_estimator(ch, dist)
    identities, pairs = _choose_identities(code, identity_sample, seed)

    dist_sum = np.zeros(code.m)
    dist_sqsum = np.zeros(code.m)
    total_trials = 0

    lambda1 = {}
    for i in identities:
        accept, dvals = _simulate_pair(code, ch, table, dist, i, i,
                                       trials_per_pair, _pair_seed(seed, i, i))
        lambda1[i] = float(1.0 - accept.mean())
        dist_sum += dvals.sum(axis=0)
        dist_sqsum += (dvals ** 2).sum(axis=0)
        total_trials += trials_per_pair

    lambda2 = {}
    for (a, b) in pairs:
        accept, dvals = _simulate_pair(code, ch, table, dist, a, b,
                                       trials_per_pair, _pair_seed(seed, a, b))
        lambda2[(a, b)] = float(accept.mean())
        dist_sum += dvals.sum(axis=0)
        dist_sqsum += (dvals ** 2).sum(axis=0)
        total_trials += trials_per_pair

    l1_hat = max(lambda1.values())
    l2_hat = max(lambda2.values()) if lambda2 else 0.0
    d_t_hat = dist_sum / total_trials
    var = np.maximum(dist_sqsum / total_trials - d_t_hat ** 2, 0.0)
    d_t_stderr = np.sqrt(var / total_trials)
    return SimReport(identities=tuple(identities), pairs=tuple(pairs),
                     trials_per_pair=trials_per_pair, seed=seed,
                     lambda1_per_identity=lambda1, lambda2_per_pair=lambda2,
                     lambda1_hat=l1_hat,
                     lambda1_stderr=_rate_stderr(l1_hat, trials_per_pair),
                     lambda2_hat=l2_hat,
                     lambda2_stderr=_rate_stderr(l2_hat, trials_per_pair),
                     d_t_hat=d_t_hat, d_t_stderr=d_t_stderr)


# --- exact oracles -----------------------------------------------------------

def _inner_confusion(code: IDFeedbackCode) -> np.ndarray:
    """A[j, j'] = P(ML decode = j' | codeword u_j sent), exactly."""
    k = code.inner.k
    ny = code.inner.rows.shape[1]
    tails = np.array(list(product(range(ny), repeat=k)), dtype=np.int64)
    loglik = np.zeros((code.color_count, tails.shape[0]))
    for t in range(k):
        loglik += code.inner.log_table[:, t, tails[:, t]]
    decoded = np.argmax(loglik, axis=0)
    lik = np.exp2(loglik)
    confusion = np.zeros((code.color_count, code.color_count))
    for jp in range(code.color_count):
        confusion[:, jp] = lik[:, decoded == jp].sum(axis=1)
    return confusion


def exact_error_probabilities(code: IDFeedbackCode, ch: StateDMC,
                              pairs) -> dict:
    """Exact lambda1 per identity and lambda2 per ordered pair.

    Sums the defining expectations over every pilot output block and uses
    the exact inner-code confusion matrix for the tail.  In randomized mode
    the marginalization over pilot inputs collapses into the mixture output
    law because the verdict depends on the output block only.
    """
    if ch.output_size ** code.m > ENUMERATION_GUARD:
        raise TooLargeToEnumerate(
            f"|Y|^m = {ch.output_size}^{code.m} exceeds the enumeration guard"
        )
    confusion = _inner_confusion(code)
    row = code.pilot_row
    identities = sorted({i for i, _ in pairs} | {i for _, i in pairs})

    lambda1 = {i: 0.0 for i in identities}
    lambda2 = {(a, b): 0.0 for a, b in pairs if a != b}
    atypical_mass = 0.0
    for pilot in product(range(ch.output_size), repeat=code.n):
        prob = float(np.prod(row[list(pilot)]))
        if prob == 0.0:
            continue
        if not code.pilot_typical(pilot):
            atypical_mass += prob
            continue
        colors = {i: code.coloring(i, pilot) for i in identities}
        for i in identities:
            j = colors[i]
            lambda1[i] += prob * (1.0 - confusion[j - 1, j - 1])
        for (a, b) in lambda2:
            lambda2[(a, b)] += prob * confusion[colors[a] - 1, colors[b] - 1]
    for i in identities:
        lambda1[i] += atypical_mass
    return {"lambda1": lambda1, "lambda2": lambda2,
            "atypical_mass": atypical_mass}


def brute_force_estimator_distortion(ch: StateDMC, dist: DistortionMatrix):
    """Exhaustive search over all |S|^(|X||Y|) estimator tables.

    Returns (per-input expected distortion of the best table, best table).
    The best table is the minimizer of the uniform-over-inputs average.
    """
    nx, ny, ns = ch.input_size, ch.output_size, ch.state_size
    n_tables = ns ** (nx * ny)
    if n_tables > ENUMERATION_GUARD:
        raise TooLargeToEnumerate(f"{n_tables} estimator tables exceed the guard")
    cost = posterior_cost(ch, dist)  # (X, Y, S)
    best_total = None
    best_table = None
    best_per_input = None
    for flat in product(range(ns), repeat=nx * ny):
        table = np.asarray(flat, dtype=np.int64).reshape(nx, ny)
        per_input = np.take_along_axis(cost, table[:, :, None], axis=2)[:, :, 0].sum(axis=1)
        total = per_input.mean()
        if best_total is None or total < best_total:
            best_total = total
            best_table = table
            best_per_input = per_input
    return best_per_input, EstimatorTable(h=best_table)


def _simplex_grid(dims: int, resolution: int):
    """All compositions of `resolution` into `dims` parts, as distributions."""
    if dims == 1:
        yield np.array([1.0])
        return
    if dims == 2:
        for i in range(resolution + 1):
            yield np.array([i, resolution - i]) / resolution
        return
    for i in range(resolution + 1):
        for j in range(resolution - i + 1):
            yield np.array([i, j, resolution - i - j]) / resolution


def grid_capacity_oracle(ch: StateDMC, dist: DistortionMatrix | None = None,
                         budget: float | None = None,
                         resolution: int = 200) -> float:
    """Exhaustive grid maximum of the (constrained) output-mixture entropy."""
    if ch.input_size > 3:
        raise AlphabetTooLarge("grid oracle supports |X| <= 3")
    if resolution > 400:
        raise AlphabetTooLarge("grid resolution capped at 400")
    rows = averaged_channel(ch).rows
    profile = None
    if budget is not None:
        if dist is None:
            raise ValueError("budget given without a distortion matrix")
        from .estimation import distortion_profile
        profile = distortion_profile(ch, dist).per_input
    grid = np.array(list(_simplex_grid(ch.input_size, resolution)))
    if profile is not None:
        grid = grid[grid @ profile <= budget + FEASIBILITY_TOL]
        if grid.size == 0:
            from .errors import InfeasibleDistortion
            raise InfeasibleDistortion(budget, min_feasible=float(profile.min()))
    mix = grid @ rows
    with np.errstate(divide="ignore", invalid="ignore"):
        logmix = np.where(mix > 0, np.log2(np.maximum(mix, 1e-300)), 0.0)
    values = -(mix * logmix).sum(axis=1)
    return float(values.max())
