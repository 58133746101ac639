import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from surface_builder import build_torus, rectangle_torus  # noqa: E402


@pytest.fixture(scope="session")
def l_torus():
    # The reference L torus of the CLI examples
    return build_torus(1.0, 1.5, 0.5, seed=0)


@pytest.fixture(scope="session")
def rect_torus():
    return rectangle_torus(1.0, 1.2, 0.3)


@pytest.fixture(scope="session")
def rect_torus_untwisted():
    return rectangle_torus(1.0, 1.2, 0.0)
