import math

import numpy as np
import pytest
from scipy.stats import truncnorm

from maxcon.noise import (
    LinkNoiseModel,
    NoiseStream,
    link_noise_block,
    sample,
    stream_for,
    truncated_variance_factor,
)

MODEL = LinkNoiseModel(0.1, seed=5)


def test_variance_factor_matches_scipy():
    assert truncated_variance_factor() == pytest.approx(truncnorm.var(-3, 3), abs=1e-14)
    assert truncated_variance_factor() == pytest.approx(0.9733, abs=5e-5)


def test_zero_variance_is_exact_zero():
    s = stream_for(LinkNoiseModel(0.0), 0, 0, 1)
    assert all(sample(s, 0.0) == 0.0 for _ in range(20))


def test_negative_variance_rejected():
    with pytest.raises(ValueError):
        LinkNoiseModel(-1e-3)
    with pytest.raises(ValueError):
        sample(stream_for(MODEL, 0, 0, 1), -0.5)


def test_self_link_rejected():
    with pytest.raises(ValueError):
        stream_for(MODEL, 0, 3, 3)


def test_bound_and_moments_large_sample():
    w = stream_for(MODEL, 0, 0, 1).take(200_000, 0.1)
    sigma = math.sqrt(0.1)
    assert np.all(np.abs(w) <= 3 * sigma)
    assert abs(w.mean()) <= 5 * sigma / math.sqrt(w.size)


def test_determinism_and_separation():
    a = stream_for(MODEL, 0, 2, 3).take(50, 0.1)
    assert np.array_equal(a, stream_for(MODEL, 0, 2, 3).take(50, 0.1))
    assert not np.array_equal(a, stream_for(MODEL, 0, 3, 2).take(50, 0.1))
    assert not np.array_equal(a, stream_for(MODEL, 1, 2, 3).take(50, 0.1))
    assert not np.array_equal(a, stream_for(MODEL, 0, 2, 3, channel=1).take(50, 0.1))
    assert not np.array_equal(a, stream_for(LinkNoiseModel(0.1, 6), 0, 2, 3).take(50, 0.1))


def test_single_draws_equal_bulk_draws():
    one = stream_for(MODEL, 4, 1, 0)
    singles = np.array([sample(one, 0.1) for _ in range(1500)])
    bulk = stream_for(MODEL, 4, 1, 0).take(1500, 0.1)
    assert np.array_equal(singles, bulk)
    mixed = stream_for(MODEL, 4, 1, 0)
    parts = [mixed.take(7, 0.1), mixed.take(600, 0.1), mixed.take(893, 0.1)]
    assert np.array_equal(np.concatenate(parts), bulk)


def test_scaling_uses_same_standard_draws():
    z = stream_for(MODEL, 0, 0, 1).take(10, 1.0)
    w = stream_for(MODEL, 0, 0, 1).take(10, 0.04)
    assert np.array_equal(w, 0.2 * z)


def test_block_layout():
    links = ((1, 0), (0, 1), (2, 1))
    block = link_noise_block(MODEL, links, [3, 0], rounds=4)
    assert block.shape == (2, 4, 3)
    assert np.array_equal(block[0, :, 2], stream_for(MODEL, 3, 2, 1).take(4, 0.1))
    assert np.array_equal(block[1, :, 0], stream_for(MODEL, 0, 1, 0).take(4, 0.1))
    assert not link_noise_block(LinkNoiseModel(0.0), links, [0], 4).any()


def test_stream_entropy_is_stable():
    s = NoiseStream((0, 0, 0, 1, 0))
    assert np.array_equal(s.standard(3), stream_for(LinkNoiseModel(1.0, 0), 0, 0, 1).standard(3))
