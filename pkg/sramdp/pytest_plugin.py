"""
Pytest plugin for sramdp - registers the marker and provides seeded fixtures
"""

import numpy as np
import pytest

from .config import get_seed
from .mechanism import MechanismConfig


def pytest_configure(config):
    """Configure pytest for sramdp"""
    config.addinivalue_line(
        "markers", "sramdp: mark test as an sramdp mechanism test"
    )


@pytest.fixture
def sramdp_rng():
    """numpy Generator seeded from SRAMDP_SEED (default 12345)"""
    return np.random.default_rng(get_seed())


@pytest.fixture(scope="session")
def sramdp_config():
    """Default 8-bit mechanism: reliable MSBs, 6T LSBs at 0.50 V"""
    return MechanismConfig.default()
