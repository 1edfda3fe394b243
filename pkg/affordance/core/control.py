# affordance/core/control.py
"""
Using learned affordances to act: Pavlovian rules over predictions, what-if
action selection over GAVFs, learned initiation sets and option chaining.
"""
import logging
import operator
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from affordance.constants.gvf_constants import (
    DEFAULT_FIND_GAMMA,
    DEFAULT_SUCCESS_SIGNAL,
    DEFAULT_SUCCESS_THRESHOLD,
)
from affordance.core.horde import PredictionVector
from affordance.envs.base import Environment
from affordance.exceptions import ConfigurationError, InvalidArgumentError
from affordance.models.gvf import (
    ComposedContinuation,
    CumulantFn,
    GvfSpec,
    OptionSpec,
    Policy,
    StateSetCumulant,
    StateSetTermination,
    UniformRandomPolicy,
    compose_continuation,
)
from affordance.models.transition import State, Transition

logger = logging.getLogger(__name__)

_OPERATORS: Dict[str, Callable[[float, float], bool]] = {
    '<': operator.lt,
    '<=': operator.le,
    '>': operator.gt,
    '>=': operator.ge,
}


# ---------------------------------------------------------------------------
# Pavlovian control
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """Compare one demon's prediction against a threshold."""
    demon: str
    op: str
    threshold: float

    def __post_init__(self):
        if self.op not in _OPERATORS:
            raise ConfigurationError(f"Unknown comparison '{self.op}'")

    def __call__(self, upsilon: PredictionVector) -> bool:
        return _OPERATORS[self.op](upsilon[self.demon], self.threshold)


@dataclass(frozen=True)
class PavlovianRule:
    """Fire `action` when every condition holds; no conditions means always."""
    action: int
    conditions: Tuple[Condition, ...] = ()
    priority: int = 0

    @property
    def is_default(self) -> bool:
        return not self.conditions

    def matches(self, upsilon: PredictionVector) -> bool:
        return all(condition(upsilon) for condition in self.conditions)


class RuleSet:
    """
    Rules ordered by descending priority, then declaration order. A default
    rule must exist so every prediction vector selects some action.
    """

    def __init__(self, rules: Sequence[PavlovianRule], demon_names: Optional[Iterable[str]] = None,
                 n_actions: Optional[int] = None):
        if not any(rule.is_default for rule in rules):
            raise ConfigurationError("Pavlovian rules need a default rule with no conditions")
        if demon_names is not None:
            known = set(demon_names)
            for rule in rules:
                for condition in rule.conditions:
                    if condition.demon not in known:
                        raise ConfigurationError(f"Rule refers to unknown demon '{condition.demon}'")
        if n_actions is not None:
            for rule in rules:
                if not 0 <= rule.action < n_actions:
                    raise ConfigurationError(f"Rule action {rule.action} out of range for {n_actions} actions")
        order = sorted(range(len(rules)), key=lambda i: (-rules[i].priority, i))
        self.rules: List[PavlovianRule] = [rules[i] for i in order]

    def act(self, upsilon: PredictionVector) -> int:
        for rule in self.rules:
            if rule.matches(upsilon):
                return rule.action
        # Unreachable: the default rule always matches
        raise ConfigurationError("No Pavlovian rule matched")


def pavlovian_act(rules, upsilon: PredictionVector) -> int:
    if not isinstance(rules, RuleSet):
        rules = RuleSet(rules)
    return rules.act(upsilon)


# ---------------------------------------------------------------------------
# What-if action selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WhatIfChoice:
    action: int
    scores: Dict[int, float]


def _action_values(predictor, x: np.ndarray) -> np.ndarray:
    vfa = getattr(predictor, 'vfa', predictor)
    return np.asarray(vfa.predict_all(x), dtype=float)


def what_if_select(gavfs: Mapping[str, object], weights: Mapping[str, float], x,
                   candidates: Optional[Sequence[int]] = None) -> WhatIfChoice:
    """
    Score each candidate action by a weighted sum of GAVF predictions and
    pick the best.

    Args:
        gavfs: Named action-value predictors (LinearVfa or GAVF learners)
        weights: Weight per GAVF name; unnamed GAVFs are ignored
        x: Feature vector of the current state
        candidates: Actions to consider; all actions when None

    Returns:
        The argmax action (lowest action index on ties) and every candidate's score
    """
    if not weights:
        raise ConfigurationError("What-if selection needs at least one weighted GAVF")
    unknown = sorted(set(weights) - set(gavfs))
    if unknown:
        raise ConfigurationError(f"What-if weights name unknown GAVFs: {unknown}")
    x = np.asarray(x, dtype=float)

    total = None
    for name, weight in weights.items():
        q = _action_values(gavfs[name], x)
        total = weight * q if total is None else total + weight * q
    if candidates is None:
        candidates = range(len(total))
    candidates = sorted(int(a) for a in candidates)
    if not candidates:
        raise InvalidArgumentError("what_if_select needs at least one candidate action")
    outside = [a for a in candidates if not 0 <= a < len(total)]
    if outside:
        raise InvalidArgumentError(f"Candidate actions {outside} out of range for {len(total)} actions")

    scores = {a: float(total[a]) for a in candidates}
    best = candidates[0]
    for a in candidates[1:]:
        if scores[a] > scores[best]:
            best = a
    return WhatIfChoice(best, scores)


# ---------------------------------------------------------------------------
# Learned initiation sets and the find construction
# ---------------------------------------------------------------------------

class LearnedInitiationSet:
    """
    I = {s : V_success(s) >= threshold}, where V_success is any predictor
    with a `predict(state)` method or a plain callable on states.
    """

    def __init__(self, success, threshold: float = DEFAULT_SUCCESS_THRESHOLD):
        if not 0.0 <= threshold <= 1.0:
            raise InvalidArgumentError(f"threshold must be in [0, 1], got {threshold}")
        self.success = success
        self.threshold = float(threshold)

    def value(self, state: State) -> float:
        predict = getattr(self.success, 'predict', self.success)
        return float(predict(state))

    def __call__(self, state: State) -> bool:
        return self.value(state) >= self.threshold

    def members(self, states: Iterable[State]) -> FrozenSet[int]:
        return frozenset(s.index for s in states if self(s))


def _all_states(env: Environment) -> List[State]:
    if env.n_states is None:
        raise InvalidArgumentError(f"{type(env).__name__} has no enumerable states")
    return [env.state_of(i) for i in range(env.n_states)]


@dataclass(frozen=True, eq=False)
class StateValueCumulant(CumulantFn):
    """c = values[s'] on arrival in a listed state, 0 elsewhere."""
    values: Mapping[int, float]
    kind = 'state-value'

    def __call__(self, transition: Transition) -> float:
        if transition.next_state_id is None:
            raise InvalidArgumentError("State-value cumulant needs a discrete next state index")
        return float(self.values.get(transition.next_state_id, 0.0))


@dataclass(frozen=True, eq=False)
class FindTask:
    """
    Control question that drives the agent into a target set: inside the set
    the cumulant is paid and γ = 0; outside c = 0 and γ = `gamma`.
    """
    target: FrozenSet[int]
    cumulant: CumulantFn
    continuation: ComposedContinuation
    gamma: float

    def in_target(self, state: State) -> bool:
        return state.index in self.target

    def to_gvf(self, name: str, n_actions: int) -> GvfSpec:
        # A control learner replaces the placeholder policy with its own greedy policy
        return GvfSpec(name, self.cumulant, UniformRandomPolicy(n_actions), self.continuation)


def build_find_option(target: LearnedInitiationSet, env: Environment,
                      gamma: float = DEFAULT_FIND_GAMMA) -> FindTask:
    """
    Build the find question for a learned initiation set: c = 1 and γ = 0 on
    arrival in the set, c = 0 and γ = `gamma` elsewhere.

    Raises:
        ConfigurationError: If no state of `env` belongs to the set
    """
    if not 0.0 < gamma <= 1.0:
        raise InvalidArgumentError(f"Find gamma must be in (0, 1], got {gamma}")
    members = target.members(_all_states(env))
    if not members:
        raise ConfigurationError(f"Empty target: no state reaches success threshold {target.threshold}")
    logger.info(f"Find target holds {len(members)} state(s)", extra={'threshold': target.threshold})
    return FindTask(
        target=members,
        cumulant=StateSetCumulant(members),
        continuation=compose_continuation(gamma, StateSetTermination(members)),
        gamma=float(gamma),
    )


def value_refined_find(comfort, task: FindTask, env: Environment) -> FindTask:
    """
    Replace the find task's unit reward with the comfort prediction at the
    state reached. The continuation structure is unchanged.
    """
    vfa = getattr(comfort, 'vfa', None)
    if vfa is not None and vfa.dim != env.feature_dim:
        raise ConfigurationError(
            f"Comfort predictor has dimension {vfa.dim}, environment features have {env.feature_dim}"
        )
    predict = getattr(comfort, 'predict', comfort)
    values = {s: float(predict(env.state_of(s))) for s in sorted(task.target)}
    return FindTask(
        target=task.target,
        cumulant=StateValueCumulant(values),
        continuation=task.continuation,
        gamma=task.gamma,
    )


# ---------------------------------------------------------------------------
# Option chaining
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChainPlan:
    """Find policy that leads into the target option's initiation set, then the target option."""
    find_policy: Policy
    target: OptionSpec
    initiation: Callable[[State], bool]
    success_signal: str = DEFAULT_SUCCESS_SIGNAL


@dataclass(frozen=True)
class ChainOutcome:
    reached: bool
    success: bool
    find_steps: int
    option_steps: int
    reason: str = ''


def execute_chain(plan: ChainPlan, env: Environment, max_steps: int, seed: Optional[int] = None) -> ChainOutcome:
    """
    Run the find policy until the target option becomes available, then run
    the option until β stops it. Each phase gets at most `max_steps` steps.

    Returns:
        Phase lengths and the success signal seen when the option stopped
    """
    if max_steps < 1:
        raise InvalidArgumentError(f"max_steps must be >= 1, got {max_steps}")
    rng = np.random.default_rng(seed)
    state = env.reset(seed)

    find_steps = 0
    while not plan.initiation(state):
        if find_steps >= max_steps:
            return ChainOutcome(False, False, find_steps, 0, 'budget')
        result = env.step(plan.find_policy.sample(state, rng))
        find_steps += 1
        if result.terminal or result.truncated:
            return ChainOutcome(False, False, find_steps, 0, 'ended-before-initiation')
        state = result.next_state

    option_steps = 0
    while option_steps < max_steps:
        result = env.step(plan.target.policy.sample(state, rng))
        option_steps += 1
        success = float(result.signals.get(plan.success_signal, 0.0)) > 0.0
        if result.terminal or result.truncated:
            return ChainOutcome(True, success, find_steps, option_steps, 'ended')
        state = result.next_state
        if rng.random() < plan.target.termination(state):
            return ChainOutcome(True, success, find_steps, option_steps, 'option-terminated')
    return ChainOutcome(True, False, find_steps, option_steps, 'budget')
