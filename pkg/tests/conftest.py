import pytest
from hypothesis import settings

from inhand.scene import ScrewSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def spec():
    return ScrewSpec()
