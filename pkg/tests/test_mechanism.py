import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dploc.hilbert import HilbertConfig, map_dataset
from dploc.mechanism import (
    GroupPartition,
    Release,
    _laplace_at,
    group_sums,
    laplace_noise,
    pad_to_size,
    publish,
    publish_values,
    publish_with_private_size,
    sort_sequence,
)

unit = st.floats(0, 1, allow_nan=False)


def test_sort_sequence_examples():
    np.testing.assert_array_equal(sort_sequence([0.5]), [0.5])
    np.testing.assert_array_equal(sort_sequence([0.9, 0.1, 0.5]), [0.1, 0.5, 0.9])


@pytest.mark.parametrize("bad", [[1.2], [-0.1], [np.nan], []])
def test_sort_sequence_rejects(bad):
    with pytest.raises(ValueError):
        sort_sequence(bad)


def test_neighbour_l1_example():
    d1 = sort_sequence([0.2, 0.4, 0.9])
    d2 = sort_sequence([0.2, 0.95, 0.9])
    assert np.abs(d1 - d2).sum() == pytest.approx(0.55)


def test_group_sums_examples():
    sums, part = group_sums(np.array([0.1, 0.2, 0.3, 0.4]), 2)
    np.testing.assert_allclose(sums, [0.3, 0.7])
    assert part.tail_size == 2
    sums, part = group_sums(np.array([0.1, 0.2, 0.3]), 2)
    np.testing.assert_allclose(sums, [0.3, 0.3])
    assert part.tail_size == 1 and part.m == 2
    seq = np.array([0.1, 0.4, 0.45])
    np.testing.assert_array_equal(group_sums(seq, 1)[0], seq)


@pytest.mark.parametrize("k", [0, -1, 5])
def test_group_sums_bad_k(k):
    with pytest.raises(ValueError):
        group_sums(np.array([0.1, 0.2, 0.3]), k)


@given(st.integers(1, 500), st.integers(1, 500))
def test_partition_covers(n, k):
    k = min(k, n)
    p = GroupPartition.equal_depth(n, k)
    assert p.sizes.sum() == n
    assert np.all(p.sizes[:-1] == k)
    assert 1 <= p.tail_size <= k


@given(st.lists(unit, min_size=1, max_size=60), st.integers(0, 59), unit, st.integers(1, 60))
def test_sorting_and_grouping_sensitivity(values, pos, new, k):
    d1 = np.array(values)
    d2 = d1.copy()
    d2[pos % d1.size] = new
    s1, s2 = sort_sequence(d1), sort_sequence(d2)
    assert np.abs(s1 - s2).sum() <= 1.0 + 1e-12
    k = min(k, d1.size)
    assert np.abs(group_sums(s1, k)[0] - group_sums(s2, k)[0]).sum() <= 1.0 + 1e-12


def test_laplace_inverse_cdf():
    assert _laplace_at(0.0, 3.0) == 0.0
    assert _laplace_at(0.25, 1.0) == pytest.approx(-np.log(0.5))
    assert _laplace_at(-0.25, 1.0) == pytest.approx(np.log(0.5))


def test_laplace_moments():
    x = laplace_noise(1.0, 1_000_000, np.random.default_rng(7))
    assert abs(x.mean()) < 0.005
    assert np.abs(x).mean() == pytest.approx(1.0, rel=0.01)
    y = laplace_noise(2.5, 1_000_000, np.random.default_rng(8))
    assert np.abs(y).mean() == pytest.approx(2.5, rel=0.01)


def test_laplace_bad_scale():
    with pytest.raises(ValueError):
        laplace_noise(0.0, 3, 0)


def test_publish_deterministic(rng):
    pts = rng.random((500, 2))
    a = publish(pts, 1.0, 10, HilbertConfig(8), 42)
    b = publish(pts, 1.0, 10, HilbertConfig(8), 42)
    np.testing.assert_array_equal(a.noisy_sums, b.noisy_sums)
    assert a.to_json() == b.to_json()
    assert a.meta["seed"] == 42 and "config_hash" in a.meta and "version" in a.meta


def test_publish_zero_noise_exact(rng):
    pts = rng.random((103, 2))
    cfg = HilbertConfig(6)
    rel = publish(pts, 1.0, 10, cfg, 0, noise=False)
    expected, _ = group_sums(np.sort(map_dataset(pts, cfg)), 10)
    np.testing.assert_allclose(rel.noisy_sums, expected)
    assert rel.n == 103 and rel.m == 11 and rel.tail_size == 3


@pytest.mark.parametrize("eps", [0.0, -1.0, float("inf"), float("nan")])
def test_publish_rejects_epsilon(eps):
    with pytest.raises(ValueError):
        publish_values([0.1, 0.2], eps, 1, 0)


def test_release_json_round_trip(rng, tmp_path):
    rel = publish(rng.random((50, 2)), 0.7, 7, HilbertConfig(5), 3)
    path = tmp_path / "r.json"
    rel.save(path)
    back = Release.load(path)
    np.testing.assert_array_equal(back.noisy_sums, rel.noisy_sums)
    assert back.group_size == 7 and back.tail_size == rel.tail_size
    assert back.hilbert == rel.hilbert and back.epsilon == 0.7
    assert back.to_json() == rel.to_json()


def test_release_values_only_round_trip():
    rel = publish_values([0.1, 0.5, 0.9], 1.0, 1, 0)
    assert Release.from_json(rel.to_json()).hilbert is None


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("noisy_sums"),
        lambda d: d.update(group_size=0),
        lambda d: d.update(tail_size=99),
        lambda d: d.update(epsilon=-1),
    ],
)
def test_release_malformed(mutate):
    doc = json.loads(publish_values([0.1, 0.5, 0.9, 0.95], 1.0, 2, 0).to_json())
    mutate(doc)
    with pytest.raises(ValueError):
        Release.from_dict(doc)


def test_pad_to_size_examples():
    np.testing.assert_array_equal(pad_to_size([0.3, 0.7], 4), [0, 0, 0.3, 0.7])
    np.testing.assert_array_equal(pad_to_size([0.1, 0.3, 0.7], 2), [0.3, 0.7])
    np.testing.assert_array_equal(pad_to_size([0.1, 0.3], 2), [0.1, 0.3])


def test_private_size_zero_noise_matches_plain(rng):
    pts = rng.random((200, 2))
    cfg = HilbertConfig(6)
    noisy_n, rel = publish_with_private_size(pts, 2.0, 0.5, 10, cfg, 0, noise=False)
    plain = publish(pts, 1.0, 10, cfg, 0, noise=False)
    assert noisy_n == 200
    np.testing.assert_array_equal(rel.noisy_sums, plain.noisy_sums)
    assert rel.epsilon + rel.meta["size_epsilon"] == pytest.approx(2.0)


def test_private_size_bad_split(rng):
    with pytest.raises(ValueError):
        publish_with_private_size(rng.random((5, 2)), 1.0, 1.0, 1)
