import os
import tempfile

# log files go to a throwaway directory; must be set before any module import
os.environ.setdefault("CYLQ_LOG_DIR", tempfile.mkdtemp(prefix="cylq-logs-"))

import pytest  # noqa: E402

from modules.ConfigurationHandler import PhysicsConfig  # noqa: E402
from modules.LoggerHandler import get_logger  # noqa: E402


@pytest.fixture
def config() -> PhysicsConfig:
    return PhysicsConfig()


@pytest.fixture
def small_config() -> PhysicsConfig:
    """Coarse grid for tests that render or integrate over (phi, z)."""
    return PhysicsConfig(n_phi=32, n_z=256)


@pytest.fixture
def lab_logs(caplog):
    """The project logger does not propagate; route it into caplog for the test."""
    logger = get_logger()
    logger.addHandler(caplog.handler)
    caplog.set_level("DEBUG", logger=logger.name)
    yield caplog
    logger.removeHandler(caplog.handler)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("CYLQ_OUT_DIR", str(tmp_path))
    return tmp_path
