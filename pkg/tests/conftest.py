import math

import numpy as np
import pytest

from fraclat.items import InteractionKernel, LatticeConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def nearest_ring():
    """L = 2π 的最近邻环，g < 0 时振荡"""
    n = 64
    return LatticeConfig(
        n_sites=n, dx=2.0 * math.pi / n, coupling=-1.0,
        kernel=InteractionKernel.nearest_neighbor(),
    )


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name='run.cfg'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write
