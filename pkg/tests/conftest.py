from __future__ import annotations

from pathlib import Path

import pytest

from aibom.serialization import read_document

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_bytes(name: str) -> bytes:
    return (FIXTURES / name).read_bytes()


def load(name: str):
    return read_document(fixture_bytes(name))


@pytest.fixture
def full_doc():
    return load("full.aibom")[0]


@pytest.fixture
def card_doc():
    return load("card.aibom")[0]
