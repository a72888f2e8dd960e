import pytest

from sicl.backend import MockBackend


@pytest.fixture
def mock_backend():
    return MockBackend()
