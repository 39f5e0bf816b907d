import numpy as np
import pytest

from linesfm.geometry import HomogeneousLine, binormalize


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_line(rng):
    """Line through a point of the 3 m cube in front of the camera."""
    while True:
        p = rng.uniform([-1.5, -1.5, 1.0], [1.5, 1.5, 4.0])
        line = binormalize(HomogeneousLine.from_point_direction(p, random_unit(rng)))
        if line.l > 0.05:
            return line


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
