import numpy as np
import pytest

from dploc.baselines import local_sensitivity_median
from dploc.datasets import (
    WORLD,
    clustered_2d,
    equally_spaced,
    median_dataset,
    read_dataset,
    repeating_single_value,
    write_points,
    write_values,
)


def test_generators():
    np.testing.assert_allclose(equally_spaced(4), [0, 1 / 3, 2 / 3, 1])
    np.testing.assert_array_equal(repeating_single_value(3), [0.5] * 3)
    pts = clustered_2d(2000, np.random.default_rng(0))
    assert pts.shape == (2000, 2)
    assert np.all((pts >= 0) & (pts <= 1))


@pytest.mark.parametrize("ls", [0.05, 0.1, 0.3, 0.5])
def test_median_dataset(ls):
    x = median_dataset(ls, np.random.default_rng(1))
    assert x.size == 129
    assert np.all(np.diff(x) >= 0) and x.min() >= 0 and x.max() == 1
    assert np.count_nonzero(x == 1.0) == 64
    assert local_sensitivity_median(x) == pytest.approx(ls)


def test_median_dataset_rejects():
    with pytest.raises(ValueError):
        median_dataset(1.5, np.random.default_rng(0))


def test_points_round_trip(tmp_path, rng):
    pts = rng.random((20, 2))
    path = tmp_path / "p.csv"
    write_points(path, pts, {"seed": 3})
    assert path.read_text().startswith("# seed=3\n")
    d = read_dataset(path)
    assert d.kind == "xy"
    np.testing.assert_array_equal(d.points, pts)


def test_values_round_trip(tmp_path):
    path = tmp_path / "v.csv"
    write_values(path, [0.1, 0.7])
    d = read_dataset(path)
    assert d.kind == "value" and d.default_config().domain.as_list() == [0, 0, 1, 1]
    np.testing.assert_array_equal(d.values, [0.1, 0.7])


def test_latlon(tmp_path):
    path = tmp_path / "ll.csv"
    path.write_text("id,lat,lon\n1,51.5,-0.12\n2,-33.9,151.2\n")
    d = read_dataset(path)
    assert d.kind == "latlon"
    np.testing.assert_allclose(d.points, [[-0.12, 51.5], [151.2, -33.9]])
    assert d.default_config(5).domain == WORLD


@pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "x,y\n0.1,oops\n"])
def test_bad_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        read_dataset(path)
