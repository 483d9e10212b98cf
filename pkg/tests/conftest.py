import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mdk.schema import default_schema
from mdk.sources import SourceHub


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture()
def hub(schema):
    # fresh per test: consultation traces and down-flags must not leak
    return SourceHub(schema)
