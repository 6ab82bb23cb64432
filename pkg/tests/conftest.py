"""Shared model systems used across the test suite."""

import pytest

from mixdec.systems import system_from_text

DOUBLING = """
name = "doubling"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [true]
map = ["mod(2*x1, 1)"]
jacobian = ["2"]
lipschitz = 2.0
"""

ROTATION_QUARTER = """
name = "rotation-quarter"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [true]
map = ["x1 + 0.25"]
inverse = ["x1 - 0.25"]
jacobian = ["1"]
lipschitz = 1.0
"""

ROTATION_THIRD = """
name = "rotation-third"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [true]
map = ["x1 + 1/3"]
inverse = ["x1 - 1/3"]
jacobian = ["1"]
lipschitz = 1.0
"""

# rotation by 1/3 + 1e-6: near-resonant return model for the closing demo
ROTATION_THIRD_EPS = """
name = "rotation-third-eps"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [true]
map = ["x1 + 0.333334333333"]
inverse = ["x1 - 0.333334333333"]
jacobian = ["1"]
lipschitz = 1.0
"""

ROTATION_HALF = """
name = "rotation-half"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [true]
map = ["x1 + 0.5"]
inverse = ["x1 - 0.5"]
jacobian = ["1"]
lipschitz = 1.0
"""

CAT_MAP = """
name = "cat"
dimension = 2
domain = [[0.0, 1.0], [0.0, 1.0]]
periodic = [true, true]
map = ["2*x1 + x2", "x1 + x2"]
inverse = ["x1 - x2", "-x1 + 2*x2"]
jacobian = ["2", "1", "1", "1"]
lipschitz = 2.7
"""

LINEAR_SADDLE = """
name = "linear-saddle"
dimension = 2
domain = [[-1.0, 1.0], [-1.0, 1.0]]
periodic = [false, false]
map = ["2*x1", "x2/2"]
inverse = ["x1/2", "2*x2"]
jacobian = ["2", "0", "0", "0.5"]
lipschitz = 2.0
"""

STANDARD_MAP_K0 = """
name = "standard-k0"
dimension = 2
domain = [[0.0, 1.0], [0.0, 1.0]]
periodic = [true, true]
map = ["x1 + x2 + (0/(2*pi))*sin(2*pi*x1)", "x2 + (0/(2*pi))*sin(2*pi*x1)"]
lipschitz = 2.0
"""

STANDARD_MAP_K12 = """
name = "standard-k1.2"
dimension = 2
domain = [[0.0, 1.0], [0.0, 1.0]]
periodic = [true, true]
map = ["x1 + x2 + (1.2/(2*pi))*sin(2*pi*x1)", "x2 + (1.2/(2*pi))*sin(2*pi*x1)"]
inverse = ["x1 - x2", "x2 - (1.2/(2*pi))*sin(2*pi*(x1 - x2))"]
lipschitz = 3.5
"""

IDENTITY_1D = """
name = "identity"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [true]
map = ["x1"]
jacobian = ["1"]
lipschitz = 1.0
"""

SQUARE_MAP = """
name = "square"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [false]
map = ["x1*x1"]
jacobian = ["2*x1"]
lipschitz = 3.0
"""

# two half-interval blocks exchanged, doubling within each leg: the
# square acts as an expanding map inside each block
BLOCK_SWAP = """
name = "block-swap"
dimension = 1
domain = [[0.0, 1.0]]
periodic = [false]
map = ["mod(2*x1, 0.5) + 0.5*(1 - 2*(x1 - mod(x1, 0.5)))"]
lipschitz = 2.0
"""

TRANSLATION_LINE = """
name = "shift-line"
dimension = 1
domain = [[-50.0, 1000.0]]
periodic = [false]
map = ["x1 + 10"]
inverse = ["x1 - 10"]
jacobian = ["1"]
lipschitz = 1.0
"""

CONFIGS = {
    "doubling": DOUBLING,
    "rotation_quarter": ROTATION_QUARTER,
    "rotation_third": ROTATION_THIRD,
    "rotation_third_eps": ROTATION_THIRD_EPS,
    "rotation_half": ROTATION_HALF,
    "cat": CAT_MAP,
    "linear_saddle": LINEAR_SADDLE,
    "standard_k0": STANDARD_MAP_K0,
    "standard_k12": STANDARD_MAP_K12,
    "identity_1d": IDENTITY_1D,
    "square": SQUARE_MAP,
    "block_swap": BLOCK_SWAP,
    "translation_line": TRANSLATION_LINE,
}


def _make(name):
    return system_from_text(CONFIGS[name], name=name)


@pytest.fixture(scope="session")
def doubling():
    return _make("doubling")


@pytest.fixture(scope="session")
def rotation_quarter():
    return _make("rotation_quarter")


@pytest.fixture(scope="session")
def rotation_third():
    return _make("rotation_third")


@pytest.fixture(scope="session")
def rotation_third_eps():
    return _make("rotation_third_eps")


@pytest.fixture(scope="session")
def rotation_half():
    return _make("rotation_half")


@pytest.fixture(scope="session")
def cat():
    return _make("cat")


@pytest.fixture(scope="session")
def linear_saddle():
    return _make("linear_saddle")


@pytest.fixture(scope="session")
def standard_k0():
    return _make("standard_k0")


@pytest.fixture(scope="session")
def standard_k12():
    return _make("standard_k12")


@pytest.fixture(scope="session")
def identity_1d():
    return _make("identity_1d")


@pytest.fixture(scope="session")
def square_map():
    return _make("square")


@pytest.fixture(scope="session")
def block_swap():
    return _make("block_swap")


@pytest.fixture(scope="session")
def translation_line():
    return _make("translation_line")
