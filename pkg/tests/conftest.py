import numpy as np
import pytest

from qrs.channels import identity_channel
from qrs.tensor import correlated_classical, maximally_entangled, relabel


@pytest.fixture
def bell():
    """|Phi+> on A R as a density operator."""
    return relabel(maximally_entangled(2).density(), {"B": "R"})


@pytest.fixture
def corr_bit():
    return correlated_classical([0.5, 0.5])


@pytest.fixture
def id2():
    return identity_channel([("A", 2)], [("B", 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
