import numpy as np
import pytest

from pmbr import UtilityMatrix


def pytest_addoption(parser):
    parser.addoption(
        "--full-space", action="store_true", default=False,
        help="also run the tuner over the full 693-point hyperparameter grid",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "full_space: needs --full-space")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full-space"):
        return
    skip = pytest.mark.skip(reason="needs --full-space")
    for item in items:
        if "full_space" in item.keywords:
            item.add_marker(skip)


_REPORT_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """``criterion(name, passed, detail)`` records one line for the acceptance report."""
    lines = request.config.stash.setdefault(_REPORT_KEY, [])

    def record(name, passed, detail=""):
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def rank1(n, seed, noise=0.0, lo=0.3, hi=0.95):
    """``u v^T`` with positive factors, optional uniform noise, clipped to [0, 1]."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(lo, hi, n)
    v = rng.uniform(lo, hi, n)
    values = np.outer(u, v)
    if noise:
        values = values + rng.uniform(-noise, noise, (n, n))
    return UtilityMatrix.full(np.clip(values, 0.0, 1.0), "synthetic", (0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
