from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import tiny_catalog  # noqa: E402


@pytest.fixture()
def catalog(tmp_path):
    return tiny_catalog(tmp_path)
