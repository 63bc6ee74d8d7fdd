import numpy as np
import pytest

from admercs.data import AttributeMeta, Dataset, Kind

# Filled by tests/test_acceptance.py; printed once at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def numeric_dataset(values, names=None, labels=None) -> Dataset:
    values = np.asarray(values, dtype=np.float64)
    names = names or [f"a{j}" for j in range(values.shape[1])]
    attrs = tuple(AttributeMeta(n, Kind.NUMERIC, j) for j, n in enumerate(names))
    return Dataset(attrs, values, labels)


def mixed_dataset(columns: dict, labels=None) -> Dataset:
    """Build from ``name -> list``; lists of strings become nominal columns."""
    attrs, cols = [], []
    for j, (name, col) in enumerate(columns.items()):
        if isinstance(col[0], str):
            cats = list(dict.fromkeys(col))
            attrs.append(AttributeMeta(name, Kind.NOMINAL, j, tuple(cats)))
            cols.append([cats.index(v) for v in col])
        else:
            attrs.append(AttributeMeta(name, Kind.NUMERIC, j))
            cols.append(col)
    return Dataset(tuple(attrs), np.column_stack(cols).astype(np.float64), labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_contexts():
    """Two trees, six instances.

    Tree 0 has contexts {0, 1, 2} and {3, 4, 5}; tree 1 has {0, 1} and
    {2, 3, 4, 5}. Instances 0 and 1 deviate (omega = 0) in tree 1; instance
    2 sits with them in tree 0 but has omega = 1 everywhere, as do 3-5.
    """
    contexts = [(0, [0, 1, 2]), (0, [3, 4, 5]), (1, [0, 1]), (1, [2, 3, 4, 5])]
    omega = [[1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]
    return contexts, omega
