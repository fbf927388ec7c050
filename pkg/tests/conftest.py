import numpy as np
import pytest

from sdft.model import init_model
from sdft.schedule import make_schedule


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences, one coordinate at a time."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return g


def assert_grad_close(analytic, numeric, rtol=1e-4, atol=1e-8):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    err = np.abs(analytic - numeric)
    bound = np.maximum(rtol * np.maximum(np.abs(analytic), np.abs(numeric)), atol)
    assert np.all(err <= bound), f"max violation {np.max(err - bound)}"


@pytest.fixture(scope="session")
def linear_schedule():
    return make_schedule("linear", 1000, 1e-4, 0.02)


@pytest.fixture(scope="session")
def small_schedule():
    return make_schedule("linear", 50, 1e-3, 0.2)


@pytest.fixture
def micro_model():
    return init_model(2, (4,), 2, seed=3)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance")
        for n in sorted(REPORT):
            terminalreporter.write_line(REPORT[n])
