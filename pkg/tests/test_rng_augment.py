import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ri3d.augment import IDENTITY, S3daConfig, jitter, random_scale, s3da, zero_indices, zero_mask
from ri3d.rng import RngStream, partial_fisher_yates


class OracleSplitMix:
    """Reference SplitMix64, written independently of the package."""

    def __init__(self, seed):
        self.s = seed % 2**64

    def next(self):
        self.s = (self.s + 0x9E3779B97F4A7C15) % 2**64
        z = self.s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) % 2**64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) % 2**64
        return z ^ (z >> 31)

    def uniform(self):
        return min(self.next() / 2.0**64, math.nextafter(1.0, 0.0))

    def gauss(self):
        u1, u2 = self.uniform(), self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def test_published_vectors():
    r = RngStream(1234567)
    assert [r.next_u64() for _ in range(5)] == [
        6457827717110365317, 3203168211198807973, 9817491932198370423,
        4593380528125082431, 16408922859458223821]
    assert RngStream(0).next_u64() == 0xE220A8397B1DCDAF


@given(seed=st.integers(0, 2**64 - 1), n=st.integers(0, 50))
def test_array_paths_match_scalar(seed, n):
    a, b, o = RngStream(seed), RngStream(seed), OracleSplitMix(seed)
    assert a.u64_array(n).tolist() == [b.next_u64() for _ in range(n)] == [o.next() for _ in range(n)]
    assert a.state == b.state
    assert a.uniform_array(n).tolist() == [b.uniform() for _ in range(n)]
    assert a.gaussian_array(n).tolist() == [b.gaussian() for _ in range(n)]


def test_uniform_stays_below_one():
    r = RngStream(0)
    r.state = (2**64 - 1 - 0x9E3779B97F4A7C15) % 2**64  # next state is all ones
    assert 0.0 <= r.uniform() < 1.0


def test_gaussian_golden_seed7():
    g = RngStream(7).gaussian_array(3).tolist()
    assert g == [0.9884743323187354, -1.8642558067312274, 0.003920207215189096]
    o = OracleSplitMix(7)
    assert g == [o.gauss() for _ in range(3)]


def test_gaussian_moments():
    g = RngStream(3).gaussian_array(200_000)
    assert abs(g.mean()) < 0.01 and abs(g.std() - 1) < 0.01


def test_for_sample_streams_differ():
    a = RngStream.for_sample(0, 0).next_u64()
    b = RngStream.for_sample(0, 1).next_u64()
    assert a != b
    assert RngStream.for_sample(0, 1).next_u64() == b


def test_fisher_yates_oracle():
    o = OracleSplitMix(11)
    perm = list(range(10))
    for i in range(4):
        j = i + int(o.uniform() * (10 - i))
        perm[i], perm[j] = perm[j], perm[i]
    assert partial_fisher_yates(10, 4, RngStream(11)).tolist() == perm[:4]


@given(seed=st.integers(0, 2**64 - 1), n=st.integers(0, 60), data=st.data())
def test_property_fisher_yates_distinct(seed, n, data):
    m = data.draw(st.integers(0, n))
    idx = partial_fisher_yates(n, m, RngStream(seed))
    assert len(idx) == m == len(set(idx.tolist()))
    assert all(0 <= i < n for i in idx)


# augmentation

TWO = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])


def test_jitter_golden_seed7():
    out = jitter(TWO, RngStream(7), S3daConfig(jitter_sigma=0.01, jitter_clip=0.05))
    o = OracleSplitMix(7)
    expect = TWO + np.clip(0.01 * np.array([o.gauss() for _ in range(6)]).reshape(2, 3), -0.05, 0.05)
    assert np.array_equal(out, expect)
    assert out[0].tolist() == [0.009884743323187354, -0.018642558067312274, 3.920207215189096e-05]


def test_jitter_identities():
    pts = np.random.default_rng(0).normal(size=(10, 3))
    assert np.array_equal(jitter(pts, RngStream(1), S3daConfig(jitter_sigma=0.0)), pts)
    assert np.array_equal(jitter(pts, RngStream(1), S3daConfig(jitter_clip=0.0)), pts)


def test_scale_golden():
    o = OracleSplitMix(5)
    f = [0.8 + 0.4 * o.uniform() for _ in range(3)]
    out = random_scale(TWO, RngStream(5), S3daConfig())
    assert np.array_equal(out, TWO * np.array(f))


def test_scale_unit_interval_is_identity():
    pts = np.random.default_rng(1).normal(size=(7, 3))
    assert np.array_equal(random_scale(pts, RngStream(9), S3daConfig(scale_low=1.0, scale_high=1.0)), pts)


def test_zero_mask_count_and_origin():
    pts = np.random.default_rng(2).normal(size=(100, 3)) + 5
    out = zero_mask(pts, RngStream(4), S3daConfig(zero_fraction=0.05))
    zeroed = np.flatnonzero(np.all(out == 0, axis=1))
    assert len(zeroed) == 5
    assert np.array_equal(np.sort(zeroed), np.sort(zero_indices(100, RngStream(4), 0.05)))
    kept = np.setdiff1d(np.arange(100), zeroed)
    assert np.array_equal(out[kept], pts[kept])


def test_zero_fraction_floor():
    assert len(zero_indices(19, RngStream(0), 0.05)) == 0
    assert len(zero_indices(20, RngStream(0), 0.05)) == 1


def test_identity_config():
    pts = np.random.default_rng(3).normal(size=(20, 3))
    assert np.array_equal(s3da(pts, RngStream(0), IDENTITY), pts)


def test_s3da_shared_stream_order():
    pts = np.random.default_rng(4).normal(size=(30, 3))
    cfg = S3daConfig()
    r = RngStream(8)
    manual = zero_mask(jitter(random_scale(pts, r, cfg), r, cfg), r, cfg)
    assert np.array_equal(s3da(pts, RngStream(8), cfg), manual)
    assert np.array_equal(s3da(pts, RngStream(8), cfg), s3da(pts, RngStream(8), cfg))


@pytest.mark.parametrize("kw", [
    dict(scale_low=0.0), dict(scale_low=1.3, scale_high=1.2), dict(jitter_sigma=-1.0),
    dict(jitter_clip=-0.1), dict(zero_fraction=1.0), dict(zero_fraction=-0.1),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        S3daConfig(**kw)


@given(seed=st.integers(0, 2**64 - 1), n=st.integers(1, 80))
def test_property_jitter_bounded(seed, n):
    pts = np.random.default_rng(seed % 2**32).normal(size=(n, 3))
    cfg = S3daConfig(zero_fraction=0.0)
    r1, r2 = RngStream(seed), RngStream(seed)
    scaled = random_scale(pts, r1, cfg)
    out = s3da(pts, r2, cfg)
    assert np.max(np.abs(out - scaled)) <= cfg.jitter_clip + 1e-12
    f = scaled[:, :] / np.where(pts == 0, 1, pts)
    assert np.all((f[pts != 0] >= 0.8 - 1e-12) & (f[pts != 0] <= 1.2 + 1e-12))
