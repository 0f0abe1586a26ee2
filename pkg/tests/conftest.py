import pytest

from selberg_lab import forms


@pytest.fixture(scope="session")
def delta_small():
    return forms.load_form("delta", 20000)


@pytest.fixture(scope="session")
def weight16_small():
    return forms.load_form("weight16", 20000)


@pytest.fixture(scope="session")
def sym2_small():
    return forms.load_form("sym2_delta", 20000)
