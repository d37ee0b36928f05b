import pytest
from unittest.mock import patch

from fraclab.core.config import get_settings
from fraclab.models import Domain, StableParams
from fraclab.services import DirichletKernelService, SearchSpec


@pytest.fixture(scope="session")
def cauchy():
    return StableParams(dim=1, order=1.0)


@pytest.fixture(scope="session")
def unit_interval():
    return Domain.interval(0.0, 1.0)


@pytest.fixture(scope="session")
def small_grid(unit_interval, cauchy):
    """Ω=(0,1), θ=1 on 64 nodes; shared read-only by the whole session."""
    return DirichletKernelService.assemble_operator(unit_interval, 64, cauchy)


@pytest.fixture
def coarse_search():
    return SearchSpec(centers_per_component=8, sigma_per_decade=2, sigma_decades=3, workers=2)


@pytest.fixture
def workspace(tmp_path):
    """
    Temporary artifact directory and constants ledger, patched into the settings
    so nothing is written next to the package.
    """
    out = tmp_path / "artifacts"
    ledger = tmp_path / "constants.json"
    settings = get_settings()
    with patch.object(settings, "OUTPUT_DIR", out), patch.object(settings, "CONSTANTS_LEDGER", ledger):
        yield out, ledger
