"""
Shared fixtures for the sramdp test suite
"""

import numpy as np
import pytest

from sramdp.pytest_plugin import sramdp_config, sramdp_rng  # noqa: F401


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Keep tests independent of the caller's SRAMDP_* environment"""
    for name in ("SRAMDP_SEED", "SRAMDP_OUT_DIR", "SRAMDP_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
