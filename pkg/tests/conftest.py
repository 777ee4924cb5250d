import pytest

from isospec.family import SuperpotentialFamily
from isospec.presets import PRESETS


@pytest.fixture(scope="session")
def families():
    """One built family per preset on its default window, shared across tests."""
    return {name: SuperpotentialFamily(p.spec(), p.window) for name, p in PRESETS.items()}
