"""
Shared fixtures for the tobitsel test suite.
"""
import pytest

from config import get_config
from models.tobit import CensoredDataset
from services.data_io import make_affairs_like
from tests.helpers import censored_sample


@pytest.fixture(autouse=True)
def restore_config():
    """Every test sees (and leaves) the global configuration unchanged."""
    snapshot = get_config().to_dict()
    yield
    get_config().update_from_dict(snapshot)


@pytest.fixture
def tight_tolerance():
    get_config().optimizer.tol = 1e-12


@pytest.fixture
def sample_data() -> CensoredDataset:
    return censored_sample()


@pytest.fixture
def affairs_csv(tmp_path):
    path = tmp_path / "affairs.csv"
    make_affairs_like(n=200, seed=3).to_csv(path, index=False)
    return str(path)
