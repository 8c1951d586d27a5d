import numpy as np
import pytest

from corner_nucleation.branching import BranchingLayout, build_layout
from corner_nucleation.corner_geometry import DEFAULT_CORNER, frame_for_domain, validate_corner


@pytest.fixture(scope="session")
def domain():
    return validate_corner(*DEFAULT_CORNER)


@pytest.fixture(scope="session")
def frame(domain):
    return frame_for_domain(domain)


@pytest.fixture(scope="session")
def layout_1e4(domain):
    return build_layout(domain, 1e4)


@pytest.fixture(scope="session")
def box_layout(frame):
    return BranchingLayout.from_depth(27.0, frame)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
