import pytest
from hypothesis import settings

import gainreg as gr

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def cat():
    return gr.catalog()


@pytest.fixture(scope="session")
def quad():
    return gr.QuadratureConfig()
