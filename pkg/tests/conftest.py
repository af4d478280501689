import numpy as np
import pytest

from panolayout.layout import LayoutPolygon
from panolayout.synth import SyntheticScene, rasterize_density, rectangle

# criterion name -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def square_layout(half=2.0, height=2.8):
    return LayoutPolygon(rectangle(-half, -half, half, half), height)


@pytest.fixture(scope="session")
def square_gt():
    return square_layout()


@pytest.fixture(scope="session")
def square_map_512(square_gt):
    return rasterize_density(SyntheticScene(square_gt, (512, 1024)))


@pytest.fixture(scope="session")
def square_map_64(square_gt):
    return rasterize_density(SyntheticScene(square_gt, (64, 128)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
