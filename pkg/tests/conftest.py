import random

import pytest

from chiral_magic.exactnum import CycloNum
from chiral_magic.model import canonical_potential, symmetry_complete
from chiral_magic.traces import bundled_table


def random_cyclo(rng: random.Random, span: int = 3) -> CycloNum:
    return CycloNum(*[rng.randint(-span, span) for _ in range(4)])


def random_symmetric_potential(seed: int, real: bool = False):
    """Six-mode potential: two seeded orbits closed under the symmetry relations."""
    rng = random.Random(seed)
    seeds = {(0, 0): random_cyclo(rng), (0, 1): random_cyclo(rng)}
    if real:
        # both orbits contain their reality partners, which pins the phases:
        # c_(0,0) is real and c_(1,1) is a real multiple of zeta^2
        seeds = {(0, 0): CycloNum(rng.randint(1, 3)), (1, 1): CycloNum(0, 0, rng.randint(1, 3))}
    return symmetry_complete(seeds, want_real=real)


@pytest.fixture(scope="session")
def canonical():
    return canonical_potential()


@pytest.fixture(scope="session")
def table(canonical):
    t = bundled_table(canonical)
    assert t is not None
    return t


@pytest.fixture(scope="session")
def random_potential():
    return random_symmetric_potential(7)


@pytest.fixture(scope="session")
def hs_report():
    from chiral_magic.fredholm import hs_norm_certified

    return hs_norm_certified(760, "dyadic")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
