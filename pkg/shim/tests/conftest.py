import pytest
from fastapi.testclient import TestClient

from whisper_shim.model import tiny_bundle
from whisper_shim.service import create_app


@pytest.fixture(scope="session")
def bundle():
    return tiny_bundle(seed=20240831)


@pytest.fixture(scope="session")
def client(bundle):
    return TestClient(create_app(bundle))
