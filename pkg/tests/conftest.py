from pathlib import Path

import numpy as np
import pytest

DEMOS = Path(__file__).resolve().parent.parent / "demos"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def demos() -> Path:
    return DEMOS
