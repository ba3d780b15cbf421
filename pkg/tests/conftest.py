import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from artifact.chapman_enskog import assemble_LM  # noqa: E402
from artifact.collision import collision_quadrature  # noqa: E402
from artifact.kinetic_core import REFERENCE_STATE, VelocityGrid  # noqa: E402


@pytest.fixture(scope="session")
def grid16():
    return VelocityGrid(16, 7.0)


@pytest.fixture(scope="session")
def coarse():
    return VelocityGrid(10, 6.0)


@pytest.fixture(scope="session")
def quad16(grid16):
    return collision_quadrature(grid16)


@pytest.fixture(scope="session")
def ref_op(grid16, quad16):
    op = assemble_LM(REFERENCE_STATE, grid16, "hard-sphere", quad16)
    op.factorize()
    return op


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one summary line per acceptance criterion; printed at the end of the run."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(tag, passed, detail):
        line = f"{tag}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
