import numpy as np
import pytest

from doubledescent.sweep import bundled_mnist_csv, load_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mnist_1000():
    """1000 training / 4000 test MNIST digits from the bundled CSV sample."""
    if bundled_mnist_csv() is None:
        pytest.skip("MNIST CSV sample not available (pip install mlxtend)")
    return load_dataset({"source": "mnist_csv", "n_train": 1000, "n_test": 4000, "seed": 0})


def pytest_terminal_summary(terminalreporter):
    import sys
    lines = []
    for name, module in list(sys.modules.items()):
        if name.endswith("test_acceptance"):
            lines = getattr(module, "LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
