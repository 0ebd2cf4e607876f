import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idsense.channel import (
    StateDMC,
    averaged_channel,
    averaged_row,
    channel_from_dict,
    channel_to_dict,
    load_channel,
    sample_state_sequence,
    sequence_likelihood,
    sequence_log2_likelihood,
    transmit,
    validate_channel,
)
from idsense.errors import (
    IndexOutOfRange,
    LengthMismatch,
    RowNotNormalized,
)
from tests.conftest import random_channel


def identity_channel():
    kernel = np.eye(2)[:, None, :]
    return StateDMC(input_size=2, output_size=2, state_size=1,
                    kernel=kernel, state_prior=np.array([1.0]))


class TestValidation:
    def test_identity_kernel_valid(self):
        ch = identity_channel()
        assert ch.input_size == 2 and ch.state_size == 1

    def test_unnormalized_row_rejected(self):
        kernel = np.eye(2)[:, None, :].copy()
        kernel[1, 0] = [0.5, 0.49]
        with pytest.raises(RowNotNormalized):
            validate_channel(kernel, [1.0])

    def test_flip_bsc_valid(self, flip):
        assert flip.kernel.shape == (2, 2, 2)
        assert np.allclose(flip.kernel.sum(axis=2), 1.0, atol=1e-12)

    def test_negative_entry_rejected(self):
        kernel = np.array([[[1.2, -0.2]]])
        with pytest.raises(Exception):
            validate_channel(kernel, [1.0])


class TestAveraging:
    def test_single_state_equals_kernel_slice(self):
        ch = identity_channel()
        assert np.array_equal(averaged_channel(ch).rows, ch.kernel[:, 0, :])

    def test_flip_bsc_rows(self, flip):
        assert np.allclose(averaged_row(flip, 0), [0.9, 0.1], atol=1e-12)
        assert np.allclose(averaged_row(flip, 1), [0.1, 0.9], atol=1e-12)

    def test_sensor_rows(self, sensor):
        rows = averaged_channel(sensor).rows
        assert np.allclose(rows, [[0.5, 0.5], [0.0, 1.0]], atol=1e-12)

    def test_out_of_range(self, flip):
        with pytest.raises(IndexOutOfRange):
            averaged_row(flip, 2)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), nx=st.integers(1, 4),
           ny=st.integers(1, 4), ns=st.integers(1, 3))
    def test_rows_normalized(self, seed, nx, ny, ns):
        ch = random_channel(np.random.default_rng(seed), nx, ny, ns)
        rows = averaged_channel(ch).rows
        assert np.allclose(rows.sum(axis=1), 1.0, atol=1e-12)


class TestSampling:
    def test_degenerate_prior(self):
        kernel = np.tile(np.array([[0.5, 0.5]]), (1, 2, 1)).reshape(1, 2, 2)
        ch = StateDMC(1, 2, 2, kernel, np.array([1.0, 0.0]))
        seq = sample_state_sequence(ch, 50, np.random.default_rng(0))
        assert (seq == 0).all()

    def test_state_frequency(self, flip):
        seq = sample_state_sequence(flip, 10**5, np.random.default_rng(1))
        freq = seq.mean()
        assert abs(freq - 0.5) <= 3 * np.sqrt(0.25 / 10**5)

    def test_seed_determinism(self, flip):
        a = sample_state_sequence(flip, 100, np.random.default_rng(7))
        b = sample_state_sequence(flip, 100, np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_transmit_deterministic_row(self, sensor):
        rng = np.random.default_rng(0)
        assert all(transmit(sensor, 1, s, rng) == 1 for s in (0, 1) for _ in range(20))

    def test_transmit_flip_fraction(self, flip):
        rng = np.random.default_rng(2)
        flips = sum(transmit(flip, 0, 0, rng) for _ in range(10**5))
        assert abs(flips / 10**5 - 0.05) <= 3 * np.sqrt(0.05 * 0.95 / 10**5)

    def test_transmit_seed_determinism(self, flip):
        a = transmit(flip, 0, 1, np.random.default_rng(3))
        b = transmit(flip, 0, 1, np.random.default_rng(3))
        assert a == b

    def test_joint_frequency(self, flip):
        # empirical (s, y) frequency for fixed x matches P_S(s) W(y|x,s)
        rng = np.random.default_rng(4)
        trials = 10**5
        states = sample_state_sequence(flip, trials, rng)
        counts = np.zeros((2, 2))
        for s in states:
            counts[s, transmit(flip, 0, int(s), rng)] += 1
        target = flip.state_prior[:, None] * flip.kernel[0]
        sigma = np.sqrt(target * (1 - target) / trials)
        assert (np.abs(counts / trials - target) <= 3 * sigma + 1e-12).all()


class TestLikelihood:
    def test_length_one(self, flip):
        assert sequence_likelihood(flip, [0], [1]) == pytest.approx(0.1, abs=1e-12)

    def test_flip_two_letters(self, flip):
        assert sequence_likelihood(flip, [0, 0], [0, 0]) == pytest.approx(0.81, abs=1e-12)

    def test_length_mismatch(self, flip):
        with pytest.raises(LengthMismatch):
            sequence_likelihood(flip, [0, 0], [0])

    def test_log_matches_linear(self, flip):
        lin = sequence_likelihood(flip, [0, 1, 0], [1, 1, 0])
        log = sequence_log2_likelihood(flip, [0, 1, 0], [1, 1, 0])
        assert lin == pytest.approx(2.0 ** log, rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6), n=st.integers(1, 6))
    def test_sums_to_one(self, seed, n):
        from itertools import product
        ch = random_channel(np.random.default_rng(seed), 2, 2, 2)
        x = list(np.random.default_rng(seed + 1).integers(0, 2, size=n))
        total = sum(sequence_likelihood(ch, x, list(y))
                    for y in product(range(2), repeat=n))
        assert total == pytest.approx(1.0, abs=1e-9)


class TestSerialization:
    def test_roundtrip(self, flip):
        again = channel_from_dict(channel_to_dict(flip))
        assert np.array_equal(again.kernel, flip.kernel)
        assert np.array_equal(again.state_prior, flip.state_prior)

    def test_load_channel_with_distortion(self, tmp_path, flip):
        spec = channel_to_dict(flip)
        spec["distortion"] = [[0.0, 1.0], [1.0, 0.0]]
        path = tmp_path / "ch.json"
        path.write_text(json.dumps(spec))
        ch, dist = load_channel(path)
        assert ch.input_size == 2
        assert np.array_equal(dist, np.array([[0.0, 1.0], [1.0, 0.0]]))
