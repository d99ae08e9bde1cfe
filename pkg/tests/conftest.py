import numpy as np
import pytest

from stayforge.data import DataMatrix, FeatureKind, LabeledDataset


def make_dataset(values, labels, kinds=None, names=None, categories=None) -> LabeledDataset:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    d = values.shape[1]
    kinds = kinds or [FeatureKind.CONTINUOUS] * d
    names = names or [f"f{j}" for j in range(d)]
    m = DataMatrix(names, kinds, values, [f"r{i}" for i in range(len(values))], categories or {})
    return LabeledDataset(m, np.asarray(labels))


def random_imbalanced(rng: np.random.Generator, n_max: int = 500, with_categorical: bool = True) -> LabeledDataset:
    n = int(rng.integers(6, n_max + 1))
    n_pos = int(rng.integers(2, max(3, n // 2)))
    labels = np.zeros(n, dtype=int)
    labels[rng.permutation(n)[:n_pos]] = 1
    n_cont = int(rng.integers(1, 5))
    n_cat = int(rng.integers(0, 4)) if with_categorical else 0
    cont = rng.normal(size=(n, n_cont)) * rng.uniform(0.1, 5, size=n_cont)
    cat = rng.integers(0, 3, size=(n, n_cat)).astype(float)
    kinds = [FeatureKind.CONTINUOUS] * n_cont + [FeatureKind.CATEGORICAL] * n_cat
    return make_dataset(np.hstack([cont, cat]), labels, kinds)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
