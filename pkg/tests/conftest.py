from __future__ import annotations

import random

import pytest

from causeway.embedding import mock_provider


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240601)


@pytest.fixture
def provider():
    return mock_provider(seed=0)
