import dataclasses

import numpy as np
import pytest

from idsense.channel import StateDMC
from idsense.coding import IDFeedbackCode, build_id_code, coloring_value
from idsense.errors import AlphabetTooLarge, TooLargeToEnumerate
from idsense.estimation import distortion_profile, hamming_distortion
from idsense.capacity import det_feedback_capacity, rand_capacity_distortion
from idsense.sim import (
    brute_force_estimator_distortion,
    exact_error_probabilities,
    grid_capacity_oracle,
    monte_carlo,
    run_trial,
)
from tests.conftest import random_channel


def pilot_plus_noiseless():
    """|X|=3, |S|=1: input 0 is a fair coin, inputs 1 and 2 are noiseless."""
    kernel = np.array([[[0.5, 0.5]], [[1.0, 0.0]], [[0.0, 1.0]]])
    return StateDMC(3, 2, 1, kernel, np.array([1.0]))


def noiseless_code(identities=2, n=9, colors=4, seed=0):
    ch = pilot_plus_noiseless()
    dist = hamming_distortion(1)
    code = build_id_code(ch, dist, 0.0, n=n, identities=identities,
                         colors=colors, eps=0.5, mode="det", master_seed=seed)
    return ch, dist, code


class TestRunTrial:
    def test_determinism(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=4, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)
        a = run_trial(code, flip, ham2, 2, 2, np.random.default_rng(5))
        b = run_trial(code, flip, ham2, 2, 2, np.random.default_rng(5))
        assert a.y_seq == b.y_seq and a.accepted == b.accepted
        assert a.distortions == b.distortions

    def test_noiseless_self_test_accepts(self):
        ch, dist, code = noiseless_code()
        assert code.inner.max_error == 0.0
        for t in range(20):
            outcome = run_trial(code, ch, dist, 1, 1, np.random.default_rng(t))
            assert outcome.accepted and outcome.pilot_typical
            assert all(d == 0.0 for d in outcome.distortions)

    def test_cross_test_matches_coloring_collision(self):
        ch, dist, code = noiseless_code()
        rng = np.random.default_rng(3)
        for _ in range(20):
            outcome = run_trial(code, ch, dist, 1, 2, rng)
            pilot = outcome.y_seq[:code.n]
            expected = code.coloring(1, pilot) == code.coloring(2, pilot)
            assert outcome.accepted == expected


class TestMonteCarlo:
    def test_noiseless_collision_rate(self):
        ch, dist, code = noiseless_code()
        report = monte_carlo(code, ch, dist, 10**4, seed=7)
        assert report.lambda1_hat == 0.0
        # collision probability concentrates at 1/M over 512 pilot blocks
        band = 3 * np.sqrt(0.25 * 0.75 / 512) + 3 * np.sqrt(0.25 * 0.75 / 10**4)
        assert abs(report.lambda2_hat - 0.25) <= band

    def test_sensor_pilot_distortion(self, sensor, ham2):
        code = build_id_code(sensor, ham2, 0.5, n=8, identities=4, colors=2,
                             eps=0.25, mode="det", master_seed=2)
        assert int(code.pilot) == 0
        report = monte_carlo(code, sensor, ham2, 4000, seed=1)
        for t in range(code.n):
            band = 3 * report.d_t_stderr[t] + 1e-9
            assert abs(report.d_t_hat[t] - 0.1) <= band

    def test_stderr_scaling(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=4, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)
        small = monte_carlo(code, flip, ham2, 2000, seed=3)
        large = monte_carlo(code, flip, ham2, 8000, seed=3)
        ratio = large.d_t_stderr.mean() / small.d_t_stderr.mean()
        assert 0.4 <= ratio <= 0.6

    def test_determinism(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=4, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)
        a = monte_carlo(code, flip, ham2, 500, seed=11).to_dict()
        b = monte_carlo(code, flip, ham2, 500, seed=11).to_dict()
        assert a == b

    def test_average_below_max(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=4, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)
        report = monte_carlo(code, flip, ham2, 1000, seed=4)
        assert report.d_bar_hat <= report.d_t_hat.max() + 1e-12
        assert report.d_bar_hat == pytest.approx(report.d_t_hat.mean(), abs=1e-12)

    def test_big_identity_space_subsampled(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=4, identities=2 ** 40,
                             colors=4, eps=0.3, mode="det", master_seed=1)
        report = monte_carlo(code, flip, ham2, 200, seed=5)
        assert len(report.identities) == 8
        assert len(report.pairs) == 16
        assert all(1 <= i <= 2 ** 40 for i in report.identities)


class TestExactOracle:
    def test_noiseless_lambda1_zero(self):
        ch, _, code = noiseless_code()
        result = exact_error_probabilities(code, ch, [(1, 2), (2, 1)])
        assert all(v == 0.0 for v in result["lambda1"].values())
        assert result["atypical_mass"] == 0.0

    def test_monte_carlo_within_three_sigma(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=4, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)
        trials = 2 * 10**4
        report = monte_carlo(code, flip, ham2, trials, seed=9)
        exact = exact_error_probabilities(code, flip, report.pairs)
        for i in report.identities:
            p = exact["lambda1"][i]
            band = 3 * np.sqrt(max(p * (1 - p), 1e-12) / trials)
            assert abs(report.lambda1_per_identity[i] - p) <= band
        for pair in report.pairs:
            p = exact["lambda2"][pair]
            band = 3 * np.sqrt(max(p * (1 - p), 1e-12) / trials)
            assert abs(report.lambda2_per_pair[pair] - p) <= band

    def test_identical_colorings_degenerate_pair(self, flip, ham2):
        base = build_id_code(flip, ham2, 0.45, n=4, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)

        class CollidingCode(IDFeedbackCode):
            # both identities use identity 1's coloring on every pilot block
            def coloring(self, identity, y_pilot):
                return coloring_value(self.master_seed, self.color_count, 1, y_pilot)

        fields = {f.name: getattr(base, f.name)
                  for f in dataclasses.fields(base)}
        code = CollidingCode(**fields)
        result = exact_error_probabilities(code, flip, [(1, 2)])
        assert result["lambda2"][(1, 2)] == pytest.approx(
            1.0 - result["lambda1"][1], abs=1e-12)

    def test_guard(self, flip, ham2):
        code = build_id_code(flip, ham2, 0.45, n=25, identities=4, colors=4,
                             eps=0.3, mode="det", master_seed=1)
        with pytest.raises(TooLargeToEnumerate):
            exact_error_probabilities(code, flip, [(1, 2)])


class TestBruteForceEstimator:
    def test_matches_fixtures(self, flip, sensor, ham2):
        for ch in (flip, sensor):
            per_input, table = brute_force_estimator_distortion(ch, ham2)
            expected = distortion_profile(ch, ham2).per_input
            assert np.abs(per_input - expected).max() <= 1e-12

    def test_single_state(self):
        ch = StateDMC(1, 2, 1, np.array([[[0.3, 0.7]]]), np.array([1.0]))
        per_input, _ = brute_force_estimator_distortion(ch, hamming_distortion(1))
        assert np.array_equal(per_input, [0.0])

    def test_random_channels(self):
        dist = hamming_distortion(2)
        for seed in range(10):
            ch = random_channel(np.random.default_rng(seed), 2, 3, 2)
            per_input, _ = brute_force_estimator_distortion(ch, dist)
            expected = distortion_profile(ch, dist).per_input
            assert np.abs(per_input - expected).max() <= 1e-12


class TestGridOracle:
    def test_flip_unconstrained(self, flip):
        assert grid_capacity_oracle(flip) == pytest.approx(1.0, abs=1e-9)

    def test_resolution_one_equals_det(self, flip, sensor):
        for ch in (flip, sensor):
            det = det_feedback_capacity(ch).value
            assert grid_capacity_oracle(ch, resolution=1) == pytest.approx(det, abs=1e-12)

    def test_alphabet_guard(self):
        ch = random_channel(np.random.default_rng(0), 4, 2, 2)
        with pytest.raises(AlphabetTooLarge):
            grid_capacity_oracle(ch)

    def test_constrained_matches_solver(self, sensor, ham2):
        grid = grid_capacity_oracle(sensor, ham2, budget=0.3, resolution=400)
        solver = rand_capacity_distortion(sensor, ham2, 0.3).value
        assert abs(grid - solver) <= 1e-4
