import numpy as np
import pytest

from glduality.fields import GLParams
from glduality.grid import GLDomain


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_domain():
    return GLDomain.build(cells=4, pad=2)


def random_phi(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@pytest.fixture
def params():
    return GLParams()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, detail = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title} ({detail})")
