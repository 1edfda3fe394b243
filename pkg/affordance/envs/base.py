# affordance/envs/base.py
"""
Stepping contract shared by all bundled environments and the finite
transition model they expose to the oracle.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from affordance.constants import PROBABILITY_TOLERANCE
from affordance.exceptions import EnvironmentProtocolError, InvalidArgumentError, ModelNotAvailableError
from affordance.models.transition import State, StepResult, Transition

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteModel:
    """
    Enumerable MDP: p(s'|s,a), per-(s,a,s') signal tables, terminal flags and
    the feature vector of every state. Terminal states are absorbing.
    """
    transitions: np.ndarray          # (S, A, S)
    signals: Dict[str, np.ndarray]   # name -> (S, A, S)
    terminal: np.ndarray             # (S,) bool
    features: np.ndarray             # (S, d)
    start_state: int

    def __post_init__(self):
        S, A, S2 = self.transitions.shape
        if S != S2:
            raise InvalidArgumentError("Transition tensor must be (S, A, S)")
        row_sums = self.transitions.sum(axis=2)
        if np.any(self.transitions < 0) or np.any(np.abs(row_sums - 1.0) > PROBABILITY_TOLERANCE):
            raise InvalidArgumentError("Transition rows must be non-negative and sum to 1")
        for name, table in self.signals.items():
            if table.shape != self.transitions.shape:
                raise InvalidArgumentError(f"Signal table '{name}' has shape {table.shape}")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def state(self, s: int) -> State:
        return State(self.features[s], int(s))

    def nonterminal_states(self) -> List[int]:
        return [s for s in range(self.n_states) if not self.terminal[s]]

    def successors(self, s: int, a: int) -> np.ndarray:
        return np.flatnonzero(self.transitions[s, a] > 0)

    def transition(self, s: int, a: int, s_next: int, behavior_prob: float = 1.0) -> Transition:
        """The Transition a simulator would emit for (s, a, s')"""
        return Transition(
            features=self.features[s],
            action=int(a),
            next_features=self.features[s_next],
            signals={name: float(table[s, a, s_next]) for name, table in self.signals.items()},
            behavior_prob=behavior_prob,
            terminal=bool(self.terminal[s_next]) and not bool(self.terminal[s]),
            state_id=int(s),
            next_state_id=int(s_next),
        )


class Environment(ABC):
    """
    Uniform stepping contract: reset(seed) -> State, step(action) -> StepResult.

    Stepping after a terminal (or truncated) step is a protocol error until
    the next reset.
    """

    action_names: List[str] = []
    signal_names: List[str] = []

    def __init__(self):
        self.rng = np.random.default_rng(0)
        self._state: Optional[State] = None
        self._done = True

    @property
    def n_actions(self) -> int:
        return len(self.action_names)

    @property
    def n_states(self) -> Optional[int]:
        return None

    @property
    @abstractmethod
    def feature_dim(self) -> int:
        """Dimension d of emitted feature vectors"""

    @property
    def state(self) -> Optional[State]:
        return self._state

    def reset(self, seed: Optional[int] = None) -> State:
        """Start a new episode; a seed reseeds the internal RNG."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self._state = self._initial_state()
        self._done = False
        return self._state

    def step(self, action: int) -> StepResult:
        if self._done or self._state is None:
            raise EnvironmentProtocolError(f"{type(self).__name__}: step() called before reset() or after episode end")
        if not 0 <= action < self.n_actions:
            raise InvalidArgumentError(f"Action {action} out of range for {self.n_actions} actions")
        result = self._advance(int(action))
        self._state = result.next_state
        self._done = result.terminal or result.truncated
        return result

    def state_of(self, index: int) -> State:
        """The State for discrete state `index`, used for probing predictions"""
        return self.model().state(index)

    def model(self) -> FiniteModel:
        raise ModelNotAvailableError(f"{type(self).__name__} has no finite model")

    @abstractmethod
    def _initial_state(self) -> State:
        ...

    @abstractmethod
    def _advance(self, action: int) -> StepResult:
        ...


def one_hot(index: int, dim: int) -> np.ndarray:
    x = np.zeros(dim)
    x[index] = 1.0
    return x
