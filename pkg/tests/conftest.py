import numpy as np
import pytest

from tempath.kernels import GaussianPacket4D


@pytest.fixture
def packet():
    return GaussianPacket4D(t_a=0.5, x_a=-0.3, omega_a=5.0, k_a=2.0, sigma_t=1.0, sigma_x=1.2)


@pytest.fixture
def rest_packet():
    """Packet at rest in x with omega_a = m = 1."""
    return GaussianPacket4D(t_a=0.0, x_a=0.0, omega_a=1.0, k_a=0.0, sigma_t=1.0, sigma_x=1.0)


def rel_l2(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
