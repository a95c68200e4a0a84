import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from einbein.schemas.objects import ModelKind, RefractionModel, SourceKind, SourceSpec  # noqa: E402
from einbein.utils.config import get_settings  # noqa: E402


@pytest.fixture(scope="session")
def settings():
    return get_settings()


@pytest.fixture
def constant_model():
    return RefractionModel(kind=ModelKind.CONSTANT, n0sq=1.0)


@pytest.fixture
def linear_model():
    return RefractionModel(kind=ModelKind.LINEAR_Z, n0sq=1.0, a=1.0)


@pytest.fixture
def channel_model():
    return RefractionModel(kind=ModelKind.QUADRATIC_Z, n0sq=1.0, alpha=0.01)


@pytest.fixture
def point_source():
    return SourceSpec(location=[0.0, 0.0])


@pytest.fixture
def point_source_3d():
    return SourceSpec(location=[0.0, 0.0, 0.0])


@pytest.fixture
def sheet_source():
    """Phase sheet with mu = 1; with n0 = 1 its cusps sit at (0, +-2)."""
    return SourceSpec(kind=SourceKind.PHASE_SHEET, location=[0.0, 0.0], mu=1.0)
