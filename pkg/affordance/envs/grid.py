# affordance/envs/grid.py
"""
GridWorld with walls, named zones, goal and trap cells and action slip.
"""
from collections import deque
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from affordance.constants.gvf_constants import GRID_ACTIONS, GRID_MOVES
from affordance.envs.base import Environment, FiniteModel, one_hot
from affordance.exceptions import ConfigurationError
from affordance.models.transition import State, StepResult

Cell = Tuple[int, int]


class GridWorld(Environment):
    """
    Free cells are indexed in row-major order. Entering a goal or trap cell
    ends the episode; bumping into a wall or the border keeps the agent in
    place. With probability `slip` the chosen action is replaced by a
    uniformly random one (which may be the chosen action again).

    Signals on arrival: one indicator per zone name, `success` on entering a
    goal cell, `failure` on entering a trap cell.
    """

    action_names = GRID_ACTIONS

    def __init__(
        self,
        width: int,
        height: int,
        start: Sequence[int],
        walls: Iterable[Sequence[int]] = (),
        zones: Optional[Dict[str, Iterable[Sequence[int]]]] = None,
        goals: Iterable[Sequence[int]] = (),
        traps: Iterable[Sequence[int]] = (),
        slip: float = 0.0,
    ):
        super().__init__()
        if width < 1 or height < 1:
            raise ConfigurationError(f"Grid dimensions must be positive, got {width}x{height}")
        if not 0.0 <= slip <= 1.0:
            raise ConfigurationError(f"slip must be in [0, 1], got {slip}")
        self.width, self.height, self.slip = int(width), int(height), float(slip)
        self.walls = {tuple(c) for c in walls}
        self.cells: List[Cell] = [
            (r, c) for r in range(self.height) for c in range(self.width) if (r, c) not in self.walls
        ]
        self._index = {cell: i for i, cell in enumerate(self.cells)}

        self.goals = self._indices(goals, 'goals')
        self.traps = self._indices(traps, 'traps')
        self.zones = {name: self._indices(cells, f"zone '{name}'") for name, cells in (zones or {}).items()}
        clashes = set(self.zones) & {'success', 'failure'}
        if clashes:
            raise ConfigurationError(f"Zone names clash with built-in signals: {sorted(clashes)}")
        self.start = self._indices([start], 'start')[0]
        if self.start in self.goals or self.start in self.traps:
            raise ConfigurationError("Start cell cannot be terminal")
        self.signal_names = sorted(self.zones) + ['success', 'failure']

    def _indices(self, cells, what) -> List[int]:
        out = []
        for cell in cells:
            cell = tuple(int(v) for v in cell)
            if cell not in self._index:
                raise ConfigurationError(f"{what}: cell {list(cell)} is not a free cell of the grid")
            out.append(self._index[cell])
        return out

    @property
    def n_states(self) -> int:
        return len(self.cells)

    @property
    def feature_dim(self) -> int:
        return len(self.cells)

    def index_of(self, cell: Sequence[int]) -> int:
        return self._index[tuple(cell)]

    def cell_of(self, index: int) -> Cell:
        return self.cells[index]

    def state_of(self, index: int) -> State:
        return State(one_hot(index, self.feature_dim), index)

    def is_terminal(self, index: int) -> bool:
        return index in self.goals or index in self.traps

    def move(self, index: int, action: int) -> int:
        """Deterministic effect of `action` from free cell `index`"""
        r, c = self.cells[index]
        dr, dc = GRID_MOVES[action]
        target = (r + dr, c + dc)
        return self._index.get(target, index)

    def _signals(self, next_index: int) -> Dict[str, float]:
        signals = {name: (1.0 if next_index in cells else 0.0) for name, cells in self.zones.items()}
        signals['success'] = 1.0 if next_index in self.goals else 0.0
        signals['failure'] = 1.0 if next_index in self.traps else 0.0
        return signals

    def _initial_state(self) -> State:
        return self.state_of(self.start)

    def _advance(self, action: int) -> StepResult:
        if self.slip > 0.0 and self.rng.random() < self.slip:
            action = int(self.rng.integers(self.n_actions))
        next_index = self.move(self._state.index, action)
        return StepResult(
            next_state=self.state_of(next_index),
            signals=self._signals(next_index),
            terminal=self.is_terminal(next_index),
        )

    def model(self) -> FiniteModel:
        S, A = self.n_states, self.n_actions
        P = np.zeros((S, A, S))
        for s in range(S):
            if self.is_terminal(s):
                P[s, :, s] = 1.0
                continue
            for a in range(A):
                P[s, a, self.move(s, a)] += 1.0 - self.slip
                for b in range(A):
                    P[s, a, self.move(s, b)] += self.slip / A

        signals = {name: np.zeros((S, A, S)) for name in self.signal_names}
        for s in range(S):
            if self.is_terminal(s):
                continue
            for a in range(A):
                for s_next in np.flatnonzero(P[s, a] > 0):
                    for name, value in self._signals(int(s_next)).items():
                        signals[name][s, a, s_next] = value

        terminal = np.array([self.is_terminal(s) for s in range(S)], dtype=bool)
        return FiniteModel(
            transitions=P,
            signals=signals,
            terminal=terminal,
            features=np.eye(S),
            start_state=self.start,
        )

    def distances_to(self, targets: Iterable[int]) -> Dict[int, int]:
        """
        Shortest deterministic path length from every free cell to the
        nearest target, by breadth-first search. Paths do not pass through
        terminal cells; unreachable cells are absent from the result.
        """
        targets = set(targets)
        dist = {t: 0 for t in targets}
        queue = deque(targets)
        while queue:
            current = queue.popleft()
            for s in range(self.n_states):
                if s in dist or self.is_terminal(s):
                    continue
                if any(self.move(s, a) == current for a in range(self.n_actions)):
                    dist[s] = dist[current] + 1
                    queue.append(s)
        return dist
