# affordance/core/psr.py
"""
Acting on the prediction vector υ: a tabular Q-learning agent over binned υ
and an empirical check of whether υ behaves like a Markov state.
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Any, Callable, Dict, Hashable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from affordance.constants.gvf_constants import DEFAULT_PSR_BINS, MARKOV_MIN_SUPPORT, MARKOV_NOISE_THRESHOLD
from affordance.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

BinKey = Tuple[int, ...]


class PsrAgent:
    """
    Q-learning in the space of discretized prediction vectors.

    Each υ component is cut into `bins` uniform bins over [low, high];
    values outside are clamped into the edge bins and counted. States with
    the same bins share action values.
    """

    def __init__(
        self,
        n_actions: int,
        bins: int = DEFAULT_PSR_BINS,
        low=0.0,
        high=1.0,
        step_size: float = 0.1,
        gamma: float = 0.9,
        epsilon: float = 0.1,
        seed: int = 0,
    ):
        if n_actions < 1 or bins < 1:
            raise InvalidArgumentError(f"Need n_actions >= 1 and bins >= 1, got {n_actions} and {bins}")
        if np.any(np.asarray(high) <= np.asarray(low)):
            raise InvalidArgumentError("Every bin range needs high > low")
        self.n_actions = int(n_actions)
        self.bins = int(bins)
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.step_size = float(step_size)
        self.gamma = float(gamma)
        self.epsilon = float(epsilon)
        self.rng = np.random.default_rng(seed)
        self.q: Dict[BinKey, np.ndarray] = defaultdict(lambda: np.zeros(self.n_actions))
        self.clamped = 0

    def discretize(self, upsilon) -> BinKey:
        u = np.asarray(upsilon, dtype=float)
        scaled = np.floor((u - self.low) / (self.high - self.low) * self.bins).astype(int)
        clipped = np.clip(scaled, 0, self.bins - 1)
        overflow = int(np.count_nonzero(clipped != scaled))
        if overflow:
            self.clamped += overflow
            logger.debug(f"Clamped {overflow} prediction(s) into edge bins")
        return tuple(int(b) for b in np.atleast_1d(clipped))

    def q_values(self, upsilon) -> np.ndarray:
        return self.q[self.discretize(upsilon)].copy()

    def greedy_action(self, upsilon) -> int:
        return int(np.argmax(self.q[self.discretize(upsilon)]))

    def act(self, upsilon) -> int:
        """ε-greedy action"""
        if self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.n_actions))
        return self.greedy_action(upsilon)

    def step(self, upsilon, action: int, reward: float, next_upsilon, terminal: bool = False) -> np.ndarray:
        """One Q-learning update; returns the updated action values at υ"""
        if not 0 <= action < self.n_actions:
            raise InvalidArgumentError(f"Action {action} out of range for {self.n_actions} actions")
        key = self.discretize(upsilon)
        bootstrap = 0.0 if terminal else float(np.max(self.q[self.discretize(next_upsilon)]))
        delta = self.q[key][action] - (reward + self.gamma * bootstrap)
        self.q[key][action] -= self.step_size * delta
        return self.q[key].copy()


def psr_agent_step(agent: PsrAgent, upsilon, action: int, reward: float, next_upsilon,
                   terminal: bool = False) -> np.ndarray:
    return agent.step(upsilon, action, reward, next_upsilon, terminal)


class MarkovSample(NamedTuple):
    """One logged step for the Markov check; observations are optional."""
    upsilon: Any
    action: int
    next_upsilon: Any
    observation: Optional[Hashable] = None
    next_observation: Optional[Hashable] = None
    episode: int = 0


@dataclass(frozen=True)
class MarkovEntry:
    condition: tuple
    history: Hashable
    support: int
    discrepancy: float
    reliable: bool


@dataclass(frozen=True)
class MarkovReport:
    max_discrepancy: float
    entries: List[MarkovEntry]
    min_support: int
    noise_threshold: float

    @property
    def n_reliable(self) -> int:
        return sum(1 for e in self.entries if e.reliable)

    @property
    def n_unreliable(self) -> int:
        return len(self.entries) - self.n_reliable

    @property
    def markov(self) -> bool:
        return self.max_discrepancy <= self.noise_threshold


def _total_variation(p: Counter, q: Counter) -> float:
    n_p, n_q = sum(p.values()), sum(q.values())
    return 0.5 * sum(abs(p[k] / n_p - q[k] / n_q) for k in set(p) | set(q))


def markov_diagnostic(
    stream: Sequence[MarkovSample],
    discretize: Callable[[Any], BinKey],
    min_support: int = MARKOV_MIN_SUPPORT,
    noise_threshold: float = MARKOV_NOISE_THRESHOLD,
) -> MarkovReport:
    """
    Compare next-step distributions conditioned on (υ_t, a_t) with those
    conditioned on (υ_t, a_t, h_{t-1}).

    The predicted variable is the next observation when the stream carries
    observations, otherwise the binned next υ. The extra history h_{t-1} is
    the previous observation, otherwise the previous binned υ, taken from the
    same episode. Conditions with fewer than `min_support` samples on either
    side are reported as unreliable and left out of the maximum.
    """
    short: Dict[tuple, Counter] = defaultdict(Counter)
    long: Dict[Tuple[tuple, Hashable], Counter] = defaultdict(Counter)

    previous = None
    for sample in stream:
        has_obs = sample.next_observation is not None
        outcome = sample.next_observation if has_obs else discretize(sample.next_upsilon)
        condition = (discretize(sample.upsilon), int(sample.action))
        if previous is not None and previous.episode == sample.episode:
            history = previous.observation if previous.observation is not None else discretize(previous.upsilon)
            long[(condition, history)][outcome] += 1
        short[condition][outcome] += 1
        previous = sample

    entries = []
    for (condition, history), counts in long.items():
        support = sum(counts.values())
        reliable = support >= min_support and sum(short[condition].values()) >= min_support
        entries.append(MarkovEntry(
            condition=condition,
            history=history,
            support=support,
            discrepancy=_total_variation(counts, short[condition]),
            reliable=reliable,
        ))
    reliable = [e.discrepancy for e in entries if e.reliable]
    report = MarkovReport(
        max_discrepancy=max(reliable, default=0.0),
        entries=entries,
        min_support=min_support,
        noise_threshold=noise_threshold,
    )
    if report.n_unreliable:
        logger.info(f"Markov check: {report.n_unreliable} condition(s) below support {min_support}")
    return report
