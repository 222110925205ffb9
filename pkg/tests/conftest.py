import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aismap.tensorio import load_dataset, load_manifest

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def golden_manifest():
    return load_manifest(GOLDEN_DIR / "manifest.txt")


@pytest.fixture(scope="session")
def golden_dataset(golden_manifest):
    return load_dataset(golden_manifest)


@pytest.fixture(scope="session")
def wide_manifest():
    return load_manifest(GOLDEN_DIR / "layout" / "manifest.txt")


@pytest.fixture(scope="session")
def wide_dataset(wide_manifest):
    return load_dataset(wide_manifest)
