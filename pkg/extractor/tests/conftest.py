from pathlib import Path

import numpy as np
import pytest
from PIL import Image

COMMITTED = Path(__file__).resolve().parents[2] / "tests" / "golden"


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Three small random RGB images with non-square native sizes."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(3)
    for i, (h, w) in enumerate(((96, 128), (120, 90), (64, 64))):
        arr = (rng.uniform(size=(h, w, 3)) * 255).astype(np.uint8)
        Image.fromarray(arr).save(root / f"pic{i}.png")
    return root
