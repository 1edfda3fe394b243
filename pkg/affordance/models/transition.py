# affordance/models/transition.py
"""
States, environment step results and stored transitions.
"""
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from affordance.exceptions import InvalidArgumentError


@dataclass(frozen=True, eq=False)
class State:
    """
    A state as seen by both the exact and the learned paths.

    `features` is the vector handed to approximators (one-hot for tabular
    environments); `index` is the discrete state id when the environment is
    enumerable, None otherwise.
    """
    features: np.ndarray
    index: Optional[int] = None

    @property
    def dim(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True, eq=False)
class StepResult:
    """What an environment returns from step()"""
    next_state: State
    signals: Mapping[str, float]
    terminal: bool
    truncated: bool = False


@dataclass(frozen=True, eq=False)
class Transition:
    """One environment step, (x_t, a_t, x_{t+1}) plus signals read at t+1."""
    features: np.ndarray
    action: int
    next_features: np.ndarray
    signals: Mapping[str, float] = field(default_factory=dict)
    behavior_prob: float = 1.0
    terminal: bool = False
    state_id: Optional[int] = None
    next_state_id: Optional[int] = None
    truncated: bool = False

    def __post_init__(self):
        if not (self.behavior_prob > 0.0) or not math.isfinite(self.behavior_prob):
            raise InvalidArgumentError(f"behavior_prob must be in (0, 1], got {self.behavior_prob}")
        for name, value in self.signals.items():
            if not math.isfinite(value):
                raise InvalidArgumentError(f"Signal '{name}' is not finite: {value}")

    @property
    def state(self) -> State:
        return State(self.features, self.state_id)

    @property
    def next_state(self) -> State:
        return State(self.next_features, self.next_state_id)

    @classmethod
    def from_step(cls, state: State, action: int, result: StepResult, behavior_prob: float) -> 'Transition':
        """Assemble a transition from the pre-step state and the environment's step result"""
        return cls(
            features=state.features,
            action=int(action),
            next_features=result.next_state.features,
            signals=dict(result.signals),
            behavior_prob=float(behavior_prob),
            terminal=bool(result.terminal),
            state_id=state.index,
            next_state_id=result.next_state.index,
            truncated=bool(result.truncated),
        )
