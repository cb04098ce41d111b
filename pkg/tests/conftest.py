import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from avsm.audio import MicArrayGeometry


@pytest.fixture(scope="session")
def geom():
    return MicArrayGeometry.default()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


def square_image(cx, cy, half=12, shape=(256, 512), value=1.0, bg=0.0):
    m = np.full(shape, bg, dtype=np.float64)
    m[cy - half:cy + half, cx - half:cx + half] = value
    return m
