import numpy as np
import pytest

from risaccess.config import desk_profile


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def desk():
    return desk_profile()


@pytest.fixture
def micro():
    """Tiny but complete configuration for fast end-to-end runs."""
    return desk_profile().with_overrides(K=12, M=4, N1=2, N2=2, L=10, lambda_alpha=0.3,
                                         **{"amp.I_max": 40}, trials=4)


def pytest_terminal_summary(terminalreporter):
    import sys

    results = {}
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance"):
            results.update(getattr(mod, "RESULTS", {}))
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
