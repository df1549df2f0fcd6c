import numpy as np
import pytest

from utq.circle_maps import make_flow_diffeo, make_mobius, make_zigzag
from utq.fourier import FourierLoop, ModeSpec


def flow_field(modes):
    return FourierLoop.from_modes(ModeSpec(8), modes, real=True)


# gentle flows: rows of T_h spread to about k * max h', so these keep the
# interior blocks at N = 64 clean
GENTLE = {1: 0.05, 2: -0.025j}
MEDIUM = {1: 0.1, 3: 0.03j}
SHALE = {5: 0.04, 8: 0.02j}


@pytest.fixture(scope="session")
def gentle_flow():
    return make_flow_diffeo(flow_field(GENTLE))


@pytest.fixture(scope="session")
def medium_flow():
    return make_flow_diffeo(flow_field(MEDIUM))


@pytest.fixture(scope="session")
def shale_flow():
    return make_flow_diffeo(flow_field(SHALE))


@pytest.fixture(scope="session")
def mobius():
    return make_mobius(0.3 + 0.2j, 0.5)


@pytest.fixture(scope="session")
def zigzag():
    return make_zigzag(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance summary ----------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
