import warnings

import numpy as np
import pytest

from shrinksgd import make_family
from shrinksgd.scalar_estimator import Hypothesis

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def record_criterion(cid: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[cid] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[cid]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {cid:2d}. {title}: {detail}")


@pytest.fixture(autouse=True)
def _quiet_step_warnings():
    # small horizons trip the eta >= 1/8 advisory on purpose
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="eta=.*not below 1/8", category=RuntimeWarning)
        yield


@pytest.fixture
def cosine():
    return make_family("cosine-rff", 2, sigma=1.0)


@pytest.fixture
def constant():
    return make_family("constant", 2)


def make_five_support() -> Hypothesis:
    """Fixed 5-point cosine hypothesis shared by estimator tests."""
    rng = np.random.default_rng(1234)
    support = rng.uniform(-1, 1, size=(5, 2))
    alpha = np.array([0.7, -0.4, 0.25, -0.9, 0.5])
    return Hypothesis.from_arrays(make_family("cosine-rff", 2, sigma=1.0), support, alpha)


@pytest.fixture
def five_support():
    return make_five_support()
