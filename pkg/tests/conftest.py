import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def unit_disk_scene():
    from ablab.geometry import Disk, Rect, Scene

    return Scene((Disk((0.0, 0.0), 1.0, flux=np.pi),), Rect((-6.0, -6.0), (6.0, 6.0)))
