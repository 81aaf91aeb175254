import numpy as np
import pytest

from radar_e2e.signal import EnvModel


def dense_shift(K, k):
    """Materialized shift matrix: ones where i - j == k."""
    i, j = np.indices((K, K))
    return (i - j == k).astype(float)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hpd(rng, K):
    A = random_complex(rng, K, K)
    return A @ A.conj().T + 0.5 * np.eye(K)


@pytest.fixture
def paper_env():
    return EnvModel.uniform(K=8, sigma_alpha_sq=50.0, clutter_power=1 / 7, shape_beta=2.0,
                            sigma_n_sq=1.0, rho=0.4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
