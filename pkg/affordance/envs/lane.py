# affordance/envs/lane.py
"""
LaneWorld: a continuous lateral lane position with steering and Gaussian drift.
"""
from typing import Dict

import numpy as np
from scipy.stats import norm

from affordance.constants.gvf_constants import (
    LANE_ACTIONS,
    LANE_DEFAULT_HORIZON,
    LANE_DEFAULT_SIGMA,
    LANE_EDGE,
    LANE_LIMIT,
    LANE_STEER_STEP,
)
from affordance.envs.base import Environment, FiniteModel
from affordance.exceptions import ConfigurationError
from affordance.models.transition import State, StepResult


class LaneWorld(Environment):
    """
    Position p lives in [-1.2, 1.2]; leaving [-1, 1] ends the episode, as does
    reaching the horizon (a truncation, not a terminal state).

    Features encode p either as a one-hot over `bins` uniform bins or as
    radial-basis activations centred on the bin centres. The finite model is
    the bin discretization: each bin is represented by its centre and moves
    by the steering shift plus drift integrated over the bin edges. It
    approximates the continuous simulation; it is not identical to it.
    """

    action_names = LANE_ACTIONS
    signal_names = ['lane_centeredness', 'out_of_lane', 'position']

    def __init__(
        self,
        bins: int,
        sigma: float = LANE_DEFAULT_SIGMA,
        horizon: int = LANE_DEFAULT_HORIZON,
        encoding: str = 'bins',
        rbf_width: float = None,
        step: float = LANE_STEER_STEP,
        start: float = 0.0,
    ):
        super().__init__()
        if bins < 2:
            raise ConfigurationError(f"LaneWorld needs at least 2 bins, got {bins}")
        if sigma < 0:
            raise ConfigurationError(f"sigma must be non-negative, got {sigma}")
        if encoding not in ('bins', 'rbf'):
            raise ConfigurationError(f"Unknown lane encoding '{encoding}'")
        if abs(start) > LANE_EDGE:
            raise ConfigurationError(f"Start position {start} is outside the lane")
        self.bins = int(bins)
        self.sigma = float(sigma)
        self.horizon = int(horizon)
        self.encoding = encoding
        self.step_size = float(step)
        self.start = float(start)
        self.edges = np.linspace(-LANE_LIMIT, LANE_LIMIT, self.bins + 1)
        self.centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        self.rbf_width = float(rbf_width) if rbf_width else float(self.edges[1] - self.edges[0])
        self.position = self.start
        self.t = 0

    @property
    def n_states(self) -> int:
        return self.bins

    @property
    def feature_dim(self) -> int:
        return self.bins

    def bin_of(self, p: float) -> int:
        width = self.edges[1] - self.edges[0]
        return int(np.clip(np.floor((p + LANE_LIMIT) / width), 0, self.bins - 1))

    def features_of(self, p: float) -> np.ndarray:
        if self.encoding == 'bins':
            x = np.zeros(self.bins)
            x[self.bin_of(p)] = 1.0
            return x
        return np.exp(-((p - self.centers) ** 2) / (2.0 * self.rbf_width ** 2))

    def state_at(self, p: float) -> State:
        return State(self.features_of(p), self.bin_of(p))

    def state_of(self, index: int) -> State:
        """Bin `index`, represented by its centre"""
        return State(self.features_of(self.centers[index]), int(index))

    def shift(self, action: int) -> float:
        return (action - 1) * self.step_size

    @staticmethod
    def signals_at(p: float) -> Dict[str, float]:
        return {
            'lane_centeredness': float(np.clip(1.0 - abs(p), 0.0, 1.0)),
            'out_of_lane': 1.0 if abs(p) > LANE_EDGE else 0.0,
            'position': float(p),
        }

    def _initial_state(self) -> State:
        self.position = self.start
        self.t = 0
        return self.state_at(self.position)

    def _advance(self, action: int) -> StepResult:
        drift = self.sigma * self.rng.standard_normal() if self.sigma > 0 else 0.0
        self.position = float(np.clip(self.position + self.shift(action) + drift, -LANE_LIMIT, LANE_LIMIT))
        self.t += 1
        terminal = abs(self.position) > LANE_EDGE
        return StepResult(
            next_state=self.state_at(self.position),
            signals=self.signals_at(self.position),
            terminal=terminal,
            truncated=(not terminal) and self.t >= self.horizon,
        )

    def model(self) -> FiniteModel:
        S, A = self.bins, self.n_actions
        terminal = np.abs(self.centers) > LANE_EDGE
        P = np.zeros((S, A, S))
        for s in range(S):
            if terminal[s]:
                P[s, :, s] = 1.0
                continue
            for a in range(A):
                mean = self.centers[s] + self.shift(a)
                if self.sigma == 0:
                    P[s, a, self.bin_of(float(np.clip(mean, -LANE_LIMIT, LANE_LIMIT)))] = 1.0
                    continue
                # Mass beyond the outer edges is clipped into the edge bins
                cdf = norm.cdf(self.edges[1:-1], loc=mean, scale=self.sigma)
                upper = np.append(cdf, 1.0)
                lower = np.insert(cdf, 0, 0.0)
                P[s, a] = upper - lower

        signals = {name: np.zeros((S, A, S)) for name in self.signal_names}
        for s in range(S):
            if terminal[s]:
                continue
            for s_next in range(S):
                for name, value in self.signals_at(self.centers[s_next]).items():
                    signals[name][s, :, s_next] = value

        features = np.stack([self.features_of(c) for c in self.centers])
        return FiniteModel(
            transitions=P,
            signals=signals,
            terminal=terminal,
            features=features,
            start_state=self.bin_of(self.start),
        )
