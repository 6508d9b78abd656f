import numpy as np
import pytest

from distincompat.assemblage import Povm, WeightedAssemblage

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE: dict = {}


def dichotomic(obs) -> Povm:
    return Povm([(np.eye(2) + obs) / 2, (np.eye(2) - obs) / 2])


def paulis(eta: float = 1.0, which: str = "XZY") -> WeightedAssemblage:
    ops = {"X": SX, "Y": SY, "Z": SZ}
    return WeightedAssemblage([dichotomic(eta * ops[k]) for k in which])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
