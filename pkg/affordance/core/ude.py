# affordance/core/ude.py
"""
Unexpected demon error: a windowed, variance-normalized TD error.
"""
from collections import deque
from typing import Optional

import numpy as np

from affordance.config import Config
from affordance.exceptions import InvalidArgumentError


class UdeTracker:
    """
    UDE = |mean of the last w δ| / (sample std of the last w δ + ε),
    reported at most 1/ε. Window and ε default to Config.UDE_WINDOW and
    Config.UDE_EPSILON.
    """

    def __init__(self, window: Optional[int] = None, epsilon: Optional[float] = None):
        window = Config.UDE_WINDOW if window is None else window
        epsilon = Config.UDE_EPSILON if epsilon is None else epsilon
        if window < 1:
            raise InvalidArgumentError(f"UDE window must be >= 1, got {window}")
        if epsilon <= 0:
            raise InvalidArgumentError(f"UDE epsilon must be positive, got {epsilon}")
        self.window = int(window)
        self.epsilon = float(epsilon)
        self._deltas = deque(maxlen=self.window)

    def update(self, delta: float) -> float:
        if np.isfinite(delta):
            self._deltas.append(float(delta))
        return self.value()

    def value(self) -> float:
        if not self._deltas:
            return 0.0
        deltas = np.fromiter(self._deltas, dtype=float)
        std = deltas.std(ddof=1) if len(deltas) > 1 else 0.0
        return float(min(abs(deltas.mean()) / (std + self.epsilon), 1.0 / self.epsilon))


def ude(tracker: UdeTracker, deltas) -> float:
    """Feed a stream of TD errors and return the final UDE"""
    value = tracker.value()
    for delta in deltas:
        value = tracker.update(delta)
    return value
