import numpy as np
import pytest

from wgbih.assembly import WGSpace
from wgbih.mesh import perturb_interior, structured_quad_mesh, structured_triangle_mesh
from wgbih.verify import manufactured


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tri2():
    return WGSpace(structured_triangle_mesh(2), 2)


@pytest.fixture(scope="session")
def tri4():
    return WGSpace(structured_triangle_mesh(4), 2)


@pytest.fixture(scope="session")
def quad3():
    return WGSpace(structured_quad_mesh(3), 2)


@pytest.fixture(scope="session")
def perturbed4():
    return WGSpace(perturb_interior(structured_triangle_mesh(4), 0.1, seed=7), 2)


@pytest.fixture(scope="session")
def ms_sin():
    return manufactured("sin")


@pytest.fixture(scope="session")
def ms_bubble():
    return manufactured("bubble")


@pytest.fixture(scope="session")
def ms_poly2():
    return manufactured("poly2")


_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line for an acceptance criterion; returns the verdict."""
    def record(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} ({title}): {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
