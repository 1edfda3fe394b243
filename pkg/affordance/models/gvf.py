# affordance/models/gvf.py
"""
Domain types for GVF questions: policies, options, cumulants, continuation
functions and the GVF / affordance specifications built from them.

All objects here are immutable after construction. A greedy policy holds a
reference to a predictor whose weights may change, but the policy object
itself never mutates.
"""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, FrozenSet, Iterable, Optional, Protocol

import numpy as np

from affordance.constants import PROBABILITY_TOLERANCE
from affordance.exceptions import InvalidArgumentError
from affordance.models.transition import State, Transition


class ActionValuePredictor(Protocol):
    """Anything that returns one action value per action for a feature vector"""

    def predict_all(self, x: np.ndarray) -> np.ndarray:
        ...


def _require_index(state: State, what: str) -> int:
    if state.index is None:
        raise InvalidArgumentError(f"{what} needs a discrete state index")
    return state.index


def _check_unit_interval(value: float, name: str):
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise InvalidArgumentError(f"{name} must be in [0, 1], got {value}")


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

class Policy(ABC):
    """Distribution over actions conditioned on state (π, τ or μ)."""

    kind = 'abstract'

    def __init__(self, n_actions: int):
        if n_actions < 1:
            raise InvalidArgumentError(f"Policy needs at least one action, got {n_actions}")
        self.n_actions = int(n_actions)

    @abstractmethod
    def probs(self, state: State) -> np.ndarray:
        """Return the action probability vector at `state`"""

    def sample(self, state: State, rng: np.random.Generator) -> int:
        p = self.probs(state)
        action = int(np.searchsorted(np.cumsum(p), rng.random(), side='right'))
        return min(action, self.n_actions - 1)


class UniformRandomPolicy(Policy):
    kind = 'uniform-random'

    def probs(self, state: State) -> np.ndarray:
        return np.full(self.n_actions, 1.0 / self.n_actions)


class FixedActionPolicy(Policy):
    kind = 'fixed-action'

    def __init__(self, n_actions: int, action: int):
        super().__init__(n_actions)
        if not 0 <= action < n_actions:
            raise InvalidArgumentError(f"Fixed action {action} out of range for {n_actions} actions")
        self.action = int(action)

    def probs(self, state: State) -> np.ndarray:
        p = np.zeros(self.n_actions)
        p[self.action] = 1.0
        return p


class TabularPolicy(Policy):
    """One probability row per discrete state."""
    kind = 'tabular-stochastic'

    def __init__(self, table):
        table = np.array(table, dtype=float)
        if table.ndim != 2:
            raise InvalidArgumentError("Policy table must be a 2-D array (states x actions)")
        if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > PROBABILITY_TOLERANCE):
            raise InvalidArgumentError("Policy table rows must be non-negative and sum to 1")
        super().__init__(table.shape[1])
        table.setflags(write=False)
        self.table = table

    def probs(self, state: State) -> np.ndarray:
        index = _require_index(state, "Tabular policy")
        if not 0 <= index < self.table.shape[0]:
            raise InvalidArgumentError(f"State {index} outside policy table")
        return self.table[index].copy()


class GreedyPolicy(Policy):
    """Argmax over a GAVF predictor, ties broken by lowest action index."""
    kind = 'greedy-over-gavf'

    def __init__(self, predictor: ActionValuePredictor, n_actions: int):
        super().__init__(n_actions)
        self.predictor = predictor

    def greedy_action(self, state: State) -> int:
        q = np.asarray(self.predictor.predict_all(state.features), dtype=float)
        return int(np.argmax(q))

    def probs(self, state: State) -> np.ndarray:
        p = np.zeros(self.n_actions)
        p[self.greedy_action(state)] = 1.0
        return p


class EpsilonGreedyPolicy(GreedyPolicy):
    kind = 'epsilon-greedy-over-gavf'

    def __init__(self, predictor: ActionValuePredictor, n_actions: int, epsilon: float):
        super().__init__(predictor, n_actions)
        _check_unit_interval(epsilon, "epsilon")
        self.epsilon = float(epsilon)

    def probs(self, state: State) -> np.ndarray:
        p = np.full(self.n_actions, self.epsilon / self.n_actions)
        p[self.greedy_action(state)] += 1.0 - self.epsilon
        return p


def policy_prob(policy: Policy, state: State, action: int) -> float:
    """
    Evaluate π(a|s).

    Args:
        policy: Any Policy
        state: State to condition on
        action: Action index

    Returns:
        Probability of `action` at `state`
    """
    if not 0 <= action < policy.n_actions:
        raise InvalidArgumentError(f"Action {action} out of range for {policy.n_actions} actions")
    return float(policy.probs(state)[action])


# ---------------------------------------------------------------------------
# Termination functions β
# ---------------------------------------------------------------------------

class TerminationFn(ABC):
    kind = 'abstract'

    @abstractmethod
    def __call__(self, state: State) -> float:
        """Probability of stopping in `state`"""


@dataclass(frozen=True)
class ConstantTermination(TerminationFn):
    beta: float
    kind = 'constant'

    def __post_init__(self):
        _check_unit_interval(self.beta, "beta")

    def __call__(self, state: State) -> float:
        return self.beta


@dataclass(frozen=True)
class StateSetTermination(TerminationFn):
    """β = 1 inside the set, 0 outside."""
    states: FrozenSet[int]
    kind = 'state-set'

    def __call__(self, state: State) -> float:
        return 1.0 if _require_index(state, "State-set termination") in self.states else 0.0


@dataclass(frozen=True, eq=False)
class TableTermination(TerminationFn):
    table: np.ndarray
    kind = 'table'

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if np.any(table < 0) or np.any(table > 1):
            raise InvalidArgumentError("Termination table entries must be in [0, 1]")
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)

    def __call__(self, state: State) -> float:
        return float(self.table[_require_index(state, "Table termination")])


@dataclass(frozen=True, eq=False)
class PredicateTermination(TerminationFn):
    """β = 1 wherever the predicate holds; used for learned initiation sets."""
    predicate: Callable[[State], bool]
    kind = 'predicate'

    def __call__(self, state: State) -> float:
        return 1.0 if self.predicate(state) else 0.0


# ---------------------------------------------------------------------------
# Continuation functions γ(s)
# ---------------------------------------------------------------------------

class ContinuationFn(ABC):
    kind = 'abstract'

    @abstractmethod
    def __call__(self, state: State) -> float:
        """Continuation value in [0, 1] on arrival in `state`"""


@dataclass(frozen=True)
class ConstantContinuation(ContinuationFn):
    gamma: float
    kind = 'constant'

    def __post_init__(self):
        _check_unit_interval(self.gamma, "gamma")

    def __call__(self, state: State) -> float:
        return self.gamma


@dataclass(frozen=True, eq=False)
class ComposedContinuation(ContinuationFn):
    """γ(s) = γ_const · (1 − β(s))"""
    gamma_const: float
    termination: TerminationFn
    kind = 'composed'

    def __call__(self, state: State) -> float:
        return self.gamma_const * (1.0 - self.termination(state))


@dataclass(frozen=True, eq=False)
class TableContinuation(ContinuationFn):
    table: np.ndarray
    kind = 'table'

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if np.any(table < 0) or np.any(table > 1):
            raise InvalidArgumentError("Continuation table entries must be in [0, 1]")
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)

    def __call__(self, state: State) -> float:
        return float(self.table[_require_index(state, "Table continuation")])


def compose_continuation(gamma_const: float, beta: TerminationFn) -> ComposedContinuation:
    """Bind a discount constant to an option's termination: γ(s) = γ·(1 − β(s))"""
    _check_unit_interval(gamma_const, "gamma_const")
    return ComposedContinuation(float(gamma_const), beta)


# ---------------------------------------------------------------------------
# Cumulants c(s, a, s')
# ---------------------------------------------------------------------------

class CumulantFn(ABC):
    kind = 'abstract'

    @abstractmethod
    def __call__(self, transition: Transition) -> float:
        """Cumulant c_{t+1} for the transition"""


@dataclass(frozen=True)
class ConstantCumulant(CumulantFn):
    value: float
    kind = 'constant'

    def __call__(self, transition: Transition) -> float:
        return self.value


@dataclass(frozen=True)
class SignalCumulant(CumulantFn):
    """Reads one named signal channel, optionally scaled."""
    signal: str
    scale: float = 1.0
    kind = 'signal'

    def __call__(self, transition: Transition) -> float:
        try:
            return self.scale * float(transition.signals[self.signal])
        except KeyError:
            raise InvalidArgumentError(f"Transition has no signal '{self.signal}'")


@dataclass(frozen=True)
class StateSetCumulant(CumulantFn):
    """1 when the arrival state is in the set."""
    states: FrozenSet[int]
    kind = 'state-set'

    def __call__(self, transition: Transition) -> float:
        if transition.next_state_id is None:
            raise InvalidArgumentError("State-set cumulant needs a discrete next state index")
        return 1.0 if transition.next_state_id in self.states else 0.0


@dataclass(frozen=True)
class OutcomeCumulant(CumulantFn):
    """Final-outcome label: the signal's value on terminal transitions, 0 before."""
    signal: str
    kind = 'terminal-outcome'

    def __call__(self, transition: Transition) -> float:
        if not transition.terminal:
            return 0.0
        return float(transition.signals.get(self.signal, 0.0))


@dataclass(frozen=True)
class FeatureCumulant(CumulantFn):
    """Feature j of the arrival state (next-step model questions)."""
    feature: int
    kind = 'feature'

    def __call__(self, transition: Transition) -> float:
        return float(transition.next_features[self.feature])


# ---------------------------------------------------------------------------
# Options and specifications
# ---------------------------------------------------------------------------

def always_initiable(state: State) -> bool:
    return True


@dataclass(frozen=True)
class StateSetInitiation:
    states: FrozenSet[int]

    def __call__(self, state: State) -> bool:
        return _require_index(state, "State-set initiation") in self.states


@dataclass(frozen=True, eq=False)
class OptionSpec:
    """An action possibility (I, β, τ)."""
    policy: Policy
    termination: TerminationFn
    initiation: Callable[[State], bool] = always_initiable
    name: str = 'option'

    def can_start(self, state: State) -> bool:
        return bool(self.initiation(state))


@dataclass(frozen=True, eq=False)
class GvfSpec:
    """The predictive question (c, τ, γ)."""
    name: str
    cumulant: CumulantFn
    target_policy: Policy
    continuation: ContinuationFn

    def cumulant_at(self, transition: Transition) -> float:
        return float(self.cumulant(transition))

    def continuation_at(self, transition: Transition) -> float:
        # Terminal arrivals never bootstrap
        if transition.terminal:
            return 0.0
        return float(self.continuation(transition.next_state))

    def target_prob(self, state: State, action: int) -> float:
        return policy_prob(self.target_policy, state, action)


@dataclass(frozen=True, eq=False)
class AffordanceSpec:
    """A GVF bound to an option through γ(s) = γ(1 − β(s))."""
    gvf: GvfSpec
    option: OptionSpec

    def __post_init__(self):
        if self.gvf.target_policy is not self.option.policy:
            raise InvalidArgumentError(f"Affordance '{self.gvf.name}': target policy must be the option's policy")
        continuation = self.gvf.continuation
        if not isinstance(continuation, ComposedContinuation) or continuation.termination is not self.option.termination:
            raise InvalidArgumentError(
                f"Affordance '{self.gvf.name}': continuation must be composed from the option's termination"
            )

    @property
    def name(self) -> str:
        return self.gvf.name

    @classmethod
    def from_option(cls, name: str, option: OptionSpec, cumulant: CumulantFn, gamma_const: float) -> 'AffordanceSpec':
        gvf = GvfSpec(
            name=name,
            cumulant=cumulant,
            target_policy=option.policy,
            continuation=compose_continuation(gamma_const, option.termination),
        )
        return cls(gvf=gvf, option=option)


def as_gvf(spec) -> GvfSpec:
    """Accept either a GvfSpec or an AffordanceSpec"""
    return spec.gvf if isinstance(spec, AffordanceSpec) else spec


def frozen_states(states: Optional[Iterable[int]]) -> FrozenSet[int]:
    return frozenset(int(s) for s in (states or []))
