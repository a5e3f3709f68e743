import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture
def tiny_config_path():
    return ROOT / "configs" / "tiny.json"
