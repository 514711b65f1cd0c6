import numpy as np
import pytest
from hypothesis import settings

from cavityqc.protocol import Device, chain_layout

# derandomized so that repeated runs are identical
settings.register_profile("repo", derandomize=True, deadline=None, max_examples=50)
settings.load_profile("repo")

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def device():
    return Device()


@pytest.fixture(scope="session")
def pair_layout(device):
    return chain_layout(device, ["A"], ["a1"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
