import numpy as np
import pytest

from sweeptree.dataset import Dataset
from sweeptree.tree import DecisionTree

CRITERIA: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])


def random_dataset(rng, n=40, m=3, C=2, distinct=None) -> Dataset:
    if distinct:
        X = rng.integers(0, distinct, size=(n, m)).astype(float)
    else:
        X = rng.normal(size=(n, m))
    y = rng.integers(1, C + 1, size=n)
    y[:C] = np.arange(1, C + 1)
    return Dataset.from_arrays(X, y, n_classes=C)


def random_tree(ds: Dataset, rng, n_splits: int) -> DecisionTree:
    """Grow ``n_splits`` random splits on observed values."""
    tree = DecisionTree.from_dataset(ds)
    for _ in range(n_splits):
        terms = tree.terminals()
        nid = terms[rng.integers(len(terms))]
        var = int(rng.integers(ds.m))
        vals = ds.meta[var].observed_values
        tree._split(nid, var, float(vals[rng.integers(vals.size)]))
    return tree


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny():
    """Six rows, two features, two classes."""
    X = [[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0], [4.0, 0.0], [5.0, 2.0]]
    return Dataset.from_arrays(X, [1, 1, 2, 2, 1, 2])
