import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spacevar import NoiseSpec, TimeSeriesPanel, TransitionStack, VarProcess


@pytest.fixture
def ar1_process() -> VarProcess:
    """Scalar AR(1) with a = 0.5 and unit noise."""
    return VarProcess(TransitionStack((np.array([[0.5]]),)), NoiseSpec([1.0]))


@pytest.fixture
def small_var2() -> VarProcess:
    """Two-component VAR(1) with one cross edge."""
    A = np.array([[0.5, 0.0], [0.2, 0.1]])
    return VarProcess(TransitionStack((A,)), NoiseSpec([1.0, 1.0]))


def make_panel(values) -> TimeSeriesPanel:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    ids = tuple(f"s{i + 1}" for i in range(values.shape[1]))
    return TimeSeriesPanel(values, ids)


@pytest.fixture
def panel_123() -> TimeSeriesPanel:
    return make_panel([1.0, 2.0, 3.0])
