# affordance/core/replay.py
"""
Ring replay memory storing (x_i, a_i, c_{i+1}, γ_{i+1}, x_{i+1}, ρ_i).
"""
import numpy as np

from affordance.exceptions import InvalidArgumentError


class ReplayBuffer:
    """
    Fixed-capacity ring of transitions with importance ratios.

    Σρ is recomputed from the stored ratios on every query instead of being
    maintained incrementally.
    """

    def __init__(self, capacity: int, dim: int):
        if capacity < 1:
            raise InvalidArgumentError(f"Buffer capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self.features = np.zeros((self.capacity, self.dim))
        self.next_features = np.zeros((self.capacity, self.dim))
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.cumulants = np.zeros(self.capacity)
        self.continuations = np.zeros(self.capacity)
        self.rhos = np.zeros(self.capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, x, action: int, cumulant: float, continuation: float, x_next, rho: float) -> int:
        """Store one transition, evicting the oldest when full; returns its slot"""
        if not (rho >= 0.0) or not np.isfinite(rho):
            raise InvalidArgumentError(f"Importance ratio must be finite and non-negative, got {rho}")
        slot = self._next
        self.features[slot] = x
        self.next_features[slot] = x_next
        self.actions[slot] = action
        self.cumulants[slot] = cumulant
        self.continuations[slot] = continuation
        self.rhos[slot] = rho
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        return slot

    def total_rho(self) -> float:
        return float(self.rhos[:self._size].sum())

    def mean_rho(self) -> float:
        """ρ̄, the average importance ratio currently stored"""
        if self._size == 0:
            return 0.0
        return self.total_rho() / self._size

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        """Draw k slot indices with replacement, each with probability ρ_i / Σρ_j."""
        total = self.total_rho()
        if total <= 0.0:
            raise InvalidArgumentError("Buffer holds no importance mass to sample from")
        p = self.rhos[:self._size] / total
        return rng.choice(self._size, size=k, replace=True, p=p)
