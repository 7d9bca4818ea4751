import math

import numpy as np
import pytest

from gblgp.benchmarks import (
    BENCHMARKS,
    Dataset,
    DomainError,
    E,
    U,
    generate_dataset,
    get_benchmark,
    target_value,
)


@pytest.mark.parametrize("name, inputs, expected", [
    ("nguyen1", [1.0], 3.0),
    ("nguyen2", [1.0], 4.0),
    ("nguyen3", [-1.0], -1.0),
    ("nguyen4", [2.0], 126.0),
    ("nguyen6", [0.5], math.sin(0.5) * math.sin(0.75)),
    ("keijzer5", [0.0, 1.5, 0.7], 0.0),
    ("keijzer5", [1.0, 2.0, 1.0], 30.0 / (-9.0 * 4.0)),
    ("korns5", [10.0, 20.0, 30.0, 40.0, 1.0], 3.0),
    ("korns3", [1.0, 2.0, 3.0, 4.0, 1.0], -5.41 + 4.9 * (4.0 - 1.0 + 2.0) / 3.0),
])
def test_target_values(name, inputs, expected):
    assert target_value(name, inputs) == pytest.approx(expected)


def test_keijzer4_against_formula():
    x = 1.3
    expected = x ** 3 * math.exp(-x) * math.cos(x) * math.sin(x) * (math.sin(x) ** 2 * math.cos(x) - 1)
    assert target_value("keijzer4", [x]) == pytest.approx(expected)


def test_domain_errors():
    with pytest.raises(DomainError):
        target_value("korns5", [1.0, 1.0, 1.0, 1.0, 0.0])
    with pytest.raises(DomainError):
        target_value("korns3", [1.0, 1.0, 1.0, 1.0, 0.0])
    with pytest.raises(KeyError):
        get_benchmark("nguyen99")


def test_sampling_counts():
    assert U(-1, 1, 20).count == 20
    assert E(0, 10, 0.05).count == 201
    assert E(0.05, 10.05, 0.05).count == 201
    with pytest.raises(ValueError):
        U(0, 1, 0)


@pytest.mark.parametrize("name, which, rows, dim, lo, hi", [
    ("nguyen1", "train", 20, 1, -1, 1),
    ("keijzer4", "train", 201, 1, 0, 10),
    ("keijzer4", "test", 201, 1, 0.05, 10.05),
    ("keijzer5", "test", 10000, 3, -1, 2),
    ("korns3", "train", 500, 5, -50, 50),
    ("korns5", "train", 500, 5, 0, 50),
])
def test_dataset_shapes(name, which, rows, dim, lo, hi):
    d = generate_dataset(name, which, 0)
    assert d.inputs.shape == (rows, dim)
    assert d.inputs.min() >= lo - 1e-12 and d.inputs.max() <= hi + 1e-12
    assert np.all(np.isfinite(d.targets))


def test_grid_endpoints():
    x = generate_dataset("keijzer4", "train", 0).inputs[:, 0]
    assert x[0] == 0.0 and x[-1] == pytest.approx(10.0)


def test_keijzer5_per_variable_ranges():
    d = generate_dataset("keijzer5", "train", 1)
    assert d.inputs[:, 1].min() >= 1.0
    assert np.abs(d.inputs[:, [0, 2]]).max() <= 1.0


def test_datasets_are_seeded():
    a, b = generate_dataset("nguyen1", "train", 5), generate_dataset("nguyen1", "train", 5)
    assert np.array_equal(a.inputs, b.inputs)
    assert not np.array_equal(a.inputs, generate_dataset("nguyen1", "test", 5).inputs)
    assert not np.array_equal(a.inputs, generate_dataset("nguyen1", "train", 6).inputs)


def test_csv_round_trip(tmp_path):
    d = generate_dataset("korns3", "train", 2)
    path = tmp_path / "korns3.csv"
    d.to_csv(path)
    again = Dataset.from_csv(path)
    assert np.array_equal(again.inputs, d.inputs)
    assert np.array_equal(again.targets, d.targets)


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset("x", np.zeros((3, 1)), np.zeros(2))
    with pytest.raises(ValueError):
        Dataset("x", np.array([[np.nan]]), np.zeros(1))


def test_variable_order_is_configurable():
    spec = get_benchmark("korns5").with_variable_order(("x", "w", "y", "z", "v"))
    assert spec.evaluate(np.array([[7.0, 1.0, 7.0, 7.0, 7.0]]))[0] == pytest.approx(3.0)


def test_all_benchmarks_generate():
    for name in BENCHMARKS:
        assert len(generate_dataset(name, "train", 0)) > 0
