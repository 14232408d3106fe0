import math

import numpy as np
import pytest

from oamlink import channel, rxarray, txarray

LAM = 1500.0 / 10000.0
K = 2 * math.pi / LAM
FS = 160000.0

_criteria = []


def record_criterion(number, title, passed, detail=""):
    _criteria.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_criteria, key=lambda c: c[0]):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {number:2d}. {title}  {detail}")


class Geometry:
    """Default link geometry assembled directly from the building blocks."""

    def __init__(self, layout="full-8x8", charges=(1, 2, 3, 4, 5, 6, 7, 8)):
        self.ring = txarray.ring_positions(20, LAM)
        self.plan = txarray.make_plan(charges, math.sqrt(2) * LAM, 10000.0, 4)
        self.grid = rxarray.grid_positions(layout, 20 * LAM, LAM)
        self.matrix = channel.transfer_matrix(self.ring.element_positions,
                                              self.grid.positions, K)
        self.coupling = rxarray.coupling_matrix(self.matrix, self.ring, self.plan, self.grid)
        self.resolvable = rxarray.resolvable_channels(self.matrix, self.ring, self.plan, self.grid)
        self.sps = 64

    def receive(self, frame, plan=None):
        tx = txarray.multiplex_excitations(self.ring, plan or self.plan, frame, FS)
        return channel.propagate(self.matrix, tx)


@pytest.fixture(scope="session")
def geometry():
    return Geometry()


@pytest.fixture(scope="session")
def make_geometry():
    cache = {}

    def get(layout="full-8x8", charges=(1, 2, 3, 4, 5, 6, 7, 8)):
        key = (layout, tuple(charges))
        if key not in cache:
            cache[key] = Geometry(layout, charges)
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
