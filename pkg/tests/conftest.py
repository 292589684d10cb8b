import numpy as np
import pytest

from sharpssl.dataset import LabeledDataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_labeled(gen, n, d, K, gamma=1.0, shift=2.0):
    """Gaussian classes with means shift * e_k (wrapped), labels revealed w.p. gamma."""
    truth = np.arange(n) % K + 1
    gen.shuffle(truth)
    means = np.zeros((K, d))
    for k in range(K):
        means[k, k % d] = shift * (1 if k < d else -1)
    x = means[truth - 1] + gen.standard_normal((n, d))
    seen = gen.random(n) < gamma
    return LabeledDataset(x, np.where(seen, truth, 0), K), truth


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
