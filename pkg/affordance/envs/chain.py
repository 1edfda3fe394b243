# affordance/envs/chain.py
"""
ChainWorld: n cells in a row, deterministic left/right moves, terminal at both ends.
"""
import numpy as np

from affordance.constants.gvf_constants import CHAIN_ACTIONS, CHAIN_LEFT, CHAIN_RIGHT
from affordance.envs.base import Environment, FiniteModel, one_hot
from affordance.exceptions import InvalidArgumentError
from affordance.models.transition import State, StepResult


class ChainWorld(Environment):
    """
    Cells 0..n-1 are non-terminal; index n is the left terminal and n+1 the
    right terminal. Every episode starts in the middle cell n // 2.

    Signals: step_cost = 1 on every step, goal = 1 on entering the right terminal.
    """

    action_names = CHAIN_ACTIONS
    signal_names = ['step_cost', 'goal']

    def __init__(self, n: int = 5):
        super().__init__()
        if n < 1:
            raise InvalidArgumentError(f"ChainWorld needs at least one cell, got {n}")
        self.n = int(n)
        self.left_terminal = self.n
        self.right_terminal = self.n + 1

    @property
    def n_states(self) -> int:
        return self.n + 2

    @property
    def feature_dim(self) -> int:
        return self.n + 2

    @property
    def start_cell(self) -> int:
        return self.n // 2

    def state_of(self, index: int) -> State:
        return State(one_hot(index, self.feature_dim), index)

    def _move(self, cell: int, action: int) -> int:
        if action == CHAIN_RIGHT:
            return self.right_terminal if cell == self.n - 1 else cell + 1
        return self.left_terminal if cell == 0 else cell - 1

    def _signals(self, next_cell: int):
        return {'step_cost': 1.0, 'goal': 1.0 if next_cell == self.right_terminal else 0.0}

    def _initial_state(self) -> State:
        return self.state_of(self.start_cell)

    def _advance(self, action: int) -> StepResult:
        next_cell = self._move(self._state.index, action)
        return StepResult(
            next_state=self.state_of(next_cell),
            signals=self._signals(next_cell),
            terminal=next_cell >= self.n,
        )

    def model(self) -> FiniteModel:
        S, A = self.n_states, self.n_actions
        P = np.zeros((S, A, S))
        step_cost = np.zeros((S, A, S))
        goal = np.zeros((S, A, S))
        for s in range(S):
            for a in (CHAIN_LEFT, CHAIN_RIGHT):
                if s >= self.n:
                    P[s, a, s] = 1.0
                    continue
                s_next = self._move(s, a)
                P[s, a, s_next] = 1.0
                signals = self._signals(s_next)
                step_cost[s, a, s_next] = signals['step_cost']
                goal[s, a, s_next] = signals['goal']
        terminal = np.zeros(S, dtype=bool)
        terminal[self.n:] = True
        return FiniteModel(
            transitions=P,
            signals={'step_cost': step_cost, 'goal': goal},
            terminal=terminal,
            features=np.eye(S),
            start_state=self.start_cell,
        )
