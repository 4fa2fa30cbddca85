from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

from zoomtune.teacher_student import Dataset, mse

WORKERS = Path(__file__).parent / "workers"


@pytest.fixture
def replay_worker():
    """Command builder for the protocol fixture worker."""
    def cmd(*args: str) -> list[str]:
        return [sys.executable, str(WORKERS / "replay_worker.py"), *args]
    return cmd


def central_diff_grad(w: np.ndarray, data: Dataset, activation: str,
                      h: float = 1e-5) -> np.ndarray:
    """Finite-difference oracle for the MSE gradient (independent of grad_mse)."""
    grad = np.zeros_like(w)
    for j in range(w.shape[0]):
        for l in range(w.shape[1]):
            plus, minus = w.copy(), w.copy()
            plus[j, l] += h
            minus[j, l] -= h
            grad[j, l] = (mse(plus, data, activation)
                          - mse(minus, data, activation)) / (2.0 * h)
    return grad
