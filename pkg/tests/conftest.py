import warnings

import pytest

import starquad as sq


@pytest.fixture(scope="session")
def square():
    return sq.example_domain("square")


@pytest.fixture(scope="session")
def disk():
    return sq.example_domain("disk")


@pytest.fixture(scope="session")
def cross():
    return sq.example_domain("cross")


@pytest.fixture(scope="session")
def star_polygon():
    return sq.example_domain("star-polygon")


@pytest.fixture(autouse=True)
def _silence_zero_weight_warnings():
    # thin boundary slivers legitimately produce zero-weight nodes in tests
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*zero weight.*")
        yield
