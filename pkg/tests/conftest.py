import numpy as np
import pytest

from qobs.linalg import random_density, random_hermitian


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def frob(a):
    return float(np.linalg.norm(a))


def random_kraus(n, outcomes, per_outcome, rng):
    """Random complete Kraus family: slices of a random isometry."""
    total = outcomes * per_outcome
    z = rng.normal(size=(total * n, n)) + 1j * rng.normal(size=(total * n, n))
    q, _ = np.linalg.qr(z)
    blocks = q.reshape(total, n, n)
    return [[blocks[m * per_outcome + k] for k in range(per_outcome)] for m in range(outcomes)]


def random_pair(n, rng):
    return random_hermitian(n, rng), random_density(n, rng)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
