# affordance/core/learners.py
"""
Online learners for GVFs and GAVFs.

Every learner owns one LinearVfa and follows the descent convention
δ = prediction − target, θ ← θ − α·δ·∇prediction.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Type

import numpy as np

from affordance.constants import PROBABILITY_TOLERANCE
from affordance.core.replay import ReplayBuffer
from affordance.core.ude import UdeTracker
from affordance.core.vfa import LinearVfa
from affordance.exceptions import (
    ConfigurationError,
    CoverageViolationError,
    InvalidArgumentError,
    NumericOverflowError,
    PolicyMismatchError,
)
from affordance.models.experiment import LearnerConfig
from affordance.models.gvf import GreedyPolicy, GvfSpec, as_gvf
from affordance.models.transition import State, Transition

logger = logging.getLogger(__name__)


def _finite(*values):
    for value in values:
        if not math.isfinite(value):
            raise NumericOverflowError(f"Non-finite value in TD computation: {value}")


def td_target(c: float, gamma_next: float, v_next: float) -> float:
    """y = c + γ'·v(s')"""
    _finite(c, gamma_next, v_next)
    if not 0.0 <= gamma_next <= 1.0:
        raise InvalidArgumentError(f"gamma_next must be in [0, 1], got {gamma_next}")
    return c + gamma_next * v_next


def td_error(v: float, y: float) -> float:
    return v - y


def importance_ratio(tau_prob: float, mu_prob: float, rho_clip: Optional[float] = None) -> float:
    """
    ρ = τ(a|s) / μ(a|s), optionally clipped from above.

    Args:
        tau_prob: Target policy probability of the taken action
        mu_prob: Behavior policy probability of the taken action
        rho_clip: Optional upper bound on ρ

    Returns:
        The importance sampling ratio

    Raises:
        CoverageViolationError: If μ gives zero probability to an action τ takes
    """
    if tau_prob < 0 or mu_prob < 0:
        raise InvalidArgumentError(f"Probabilities must be non-negative, got τ={tau_prob}, μ={mu_prob}")
    if mu_prob == 0.0:
        if tau_prob == 0.0:
            return 0.0
        raise CoverageViolationError(f"Behavior probability is 0 for an action with target probability {tau_prob}")
    rho = tau_prob / mu_prob
    if rho_clip is not None:
        rho = min(rho, rho_clip)
    return rho


def gavf_target(c: float, gamma_next: float, q_next, tau_next) -> float:
    """y = c + γ'·Σ_a' τ(a'|s')·q(s', a')"""
    if gamma_next == 0.0:
        return c
    q_next = np.asarray(q_next, dtype=float)
    tau_next = np.asarray(tau_next, dtype=float)
    if q_next.shape != tau_next.shape:
        raise InvalidArgumentError(f"q has shape {q_next.shape} but τ has shape {tau_next.shape}")
    if np.any(tau_next < 0) or abs(tau_next.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError("Target policy probabilities must be non-negative and sum to 1")
    return td_target(c, gamma_next, float(tau_next @ q_next))


@dataclass(frozen=True)
class StepReport:
    """What one learner update produced; `delta` is the value logged as δ."""
    delta: float
    rho: float = 1.0
    rho_bar: float = 1.0
    cumulant: float = 0.0
    ude: float = 0.0
    skipped: bool = False


class EpisodeStep(NamedTuple):
    """One recorded step for Monte-Carlo regression"""
    features: np.ndarray
    cumulant: float
    continuation: float
    target_prob: float = 1.0
    behavior_prob: float = 1.0


class Learner:
    """
    Base learner: owns an approximator, a UDE tracker and an RNG.

    Subclasses implement `_update`; `step` adds the surprise measure.
    """

    algorithm = 'abstract'
    action_value = False

    def __init__(self, spec, dim: int, n_actions: int, config: Optional[LearnerConfig] = None,
                 ude_window: Optional[int] = None, ude_epsilon: Optional[float] = None):
        self.gvf: GvfSpec = as_gvf(spec)
        self.config = config or LearnerConfig()
        self.n_actions = int(n_actions)
        self.vfa = LinearVfa(
            dim,
            self.n_actions if self.action_value else 0,
            name=self.gvf.name,
            seed=self.config.seed,
        )
        self.rng = np.random.default_rng(self.config.seed)
        self.ude_tracker = UdeTracker(ude_window, ude_epsilon)

    @property
    def name(self) -> str:
        return self.gvf.name

    @property
    def step_size(self) -> float:
        return self.config.step_size

    def predict(self, state: State) -> float:
        """This learner's answer to its question at `state`"""
        return self.vfa.predict_v(state.features)

    def load_weights(self, vfa: LinearVfa) -> None:
        """Adopt the weights of a saved model with matching shape"""
        if (vfa.dim, vfa.n_actions) != (self.vfa.dim, self.vfa.n_actions):
            raise ConfigurationError(
                f"Model for '{self.name}' has dim={vfa.dim}, n_actions={vfa.n_actions}; "
                f"expected dim={self.vfa.dim}, n_actions={self.vfa.n_actions}"
            )
        self.vfa.set_weights(vfa.weights)

    def step(self, transition: Transition) -> StepReport:
        report = self._update(transition)
        return replace(report, ude=self.ude_tracker.update(report.delta))

    def _update(self, transition: Transition) -> StepReport:
        raise NotImplementedError

    def _rho(self, transition: Transition) -> float:
        tau = self.gvf.target_prob(transition.state, transition.action)
        try:
            return importance_ratio(tau, transition.behavior_prob, self.config.rho_clip)
        except CoverageViolationError as e:
            raise CoverageViolationError(str(e), demon=self.name)

    def _state_value_delta(self, transition: Transition):
        c = self.gvf.cumulant_at(transition)
        gamma_next = self.gvf.continuation_at(transition)
        v = self.vfa.predict_v(transition.features)
        y = td_target(c, gamma_next, self.vfa.predict_v(transition.next_features))
        return td_error(v, y), c


class TDLearner(Learner):
    """On-policy TD(0); transitions must come from the GVF's own target policy."""
    algorithm = 'td'

    def _update(self, transition: Transition) -> StepReport:
        delta, c = self._state_value_delta(transition)
        grad = self.vfa.gradient(transition.features)
        self.vfa.apply_update(delta * grad, self.step_size)
        return StepReport(delta=delta, cumulant=c)


class ImportanceSamplingTDLearner(Learner):
    """Off-policy TD(0) with per-step importance ratio ρ = τ/μ."""
    algorithm = 'is'

    def _update(self, transition: Transition) -> StepReport:
        rho = self._rho(transition)
        delta, c = self._state_value_delta(transition)
        grad = self.vfa.gradient(transition.features)
        self.vfa.apply_update((rho * delta) * grad, self.step_size)
        return StepReport(delta=rho * delta, rho=rho, rho_bar=rho, cumulant=c)


class ResampledReplayLearner(Learner):
    """
    Off-policy learning by replay with importance resampling.

    Each step stores the transition with its ρ, draws a minibatch with
    replacement in proportion to the stored ratios and applies one step
    θ ← θ − α·ρ̄·mean_i(δ_i·x_i), where ρ̄ is the mean ratio in the buffer.
    With `use_rho_bar` off the ρ̄ factor is dropped.
    """
    algorithm = 'resampled'

    def __init__(self, spec, dim: int, n_actions: int, config: Optional[LearnerConfig] = None, **kwargs):
        super().__init__(spec, dim, n_actions, config, **kwargs)
        self.buffer = ReplayBuffer(self.config.buffer_capacity, dim)
        self.skipped_updates = 0

    def resampled_update(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Draw one minibatch and return the scaled gradient ρ̄·mean_i(δ_i·x_i)
        without applying it, together with the minibatch δ values.
        """
        indices = self.buffer.sample(self.config.minibatch_size, self.rng)
        X = self.buffer.features[indices]
        X_next = self.buffer.next_features[indices]
        theta = self.vfa.weights
        targets = self.buffer.cumulants[indices] + self.buffer.continuations[indices] * (X_next @ theta)
        deltas = X @ theta - targets
        scale = self.buffer.mean_rho() if self.config.use_rho_bar else 1.0
        return scale * (deltas[:, None] * X).mean(axis=0), deltas

    def _update(self, transition: Transition) -> StepReport:
        rho = self._rho(transition)
        c = self.gvf.cumulant_at(transition)
        gamma_next = self.gvf.continuation_at(transition)
        _finite(c, gamma_next)
        self.buffer.add(transition.features, transition.action, c, gamma_next, transition.next_features, rho)
        rho_bar = self.buffer.mean_rho()

        if self.buffer.total_rho() <= 0.0:
            self.skipped_updates += 1
            logger.warning(
                "Skipping resampled update: no importance mass in buffer",
                extra={'demon': self.name, 'skipped_updates': self.skipped_updates},
            )
            return StepReport(delta=0.0, rho=rho, rho_bar=rho_bar, cumulant=c, skipped=True)

        update, deltas = self.resampled_update()
        self.vfa.apply_update(update, self.step_size)
        return StepReport(delta=float(np.mean(np.abs(deltas))), rho=rho, rho_bar=rho_bar, cumulant=c)


class GavfLearner(Learner):
    """
    Expected-target TD for a GAVF Q(s,a). The bootstrap averages over τ at
    the next state, so no importance ratio is needed.
    """
    algorithm = 'gavf'
    action_value = True

    def predict(self, state: State) -> float:
        """E_{a∼τ} Q(s, a)"""
        return float(self.gvf.target_policy.probs(state) @ self.vfa.predict_all(state.features))

    def _bootstrap(self, transition: Transition, gamma_next: float, c: float) -> float:
        if gamma_next == 0.0:
            return c
        tau_next = self.gvf.target_policy.probs(transition.next_state)
        return gavf_target(c, gamma_next, self.vfa.predict_all(transition.next_features), tau_next)

    def _update(self, transition: Transition) -> StepReport:
        c = self.gvf.cumulant_at(transition)
        gamma_next = self.gvf.continuation_at(transition)
        y = self._bootstrap(transition, gamma_next, c)
        _finite(y)
        delta = td_error(self.vfa.predict_q(transition.features, transition.action), y)
        grad = self.vfa.gradient(transition.features, transition.action)
        self.vfa.apply_update(delta * grad, self.step_size)
        return StepReport(delta=delta, cumulant=c)


class ControlGavfLearner(GavfLearner):
    """
    Q-learning on a control GVF: the bootstrap takes the max over next
    actions and the target policy is greedy over this learner's own Q.
    """
    algorithm = 'control'

    def __init__(self, spec, dim: int, n_actions: int, config: Optional[LearnerConfig] = None, **kwargs):
        super().__init__(spec, dim, n_actions, config, **kwargs)
        self.gvf = replace(self.gvf, target_policy=GreedyPolicy(self.vfa, self.n_actions))

    def greedy_policy(self) -> GreedyPolicy:
        return self.gvf.target_policy

    def predict(self, state: State) -> float:
        return float(np.max(self.vfa.predict_all(state.features)))

    def _bootstrap(self, transition: Transition, gamma_next: float, c: float) -> float:
        if gamma_next == 0.0:
            return c
        return td_target(c, gamma_next, float(np.max(self.vfa.predict_all(transition.next_features))))


class MonteCarloLearner(Learner):
    """
    Supervised regression on complete-episode returns.

    Steps are buffered until the episode ends (terminal or truncated), then
    the whole episode is regressed at once. Off-policy experience is
    rejected.
    """
    algorithm = 'montecarlo'

    def __init__(self, spec, dim: int, n_actions: int, config: Optional[LearnerConfig] = None, **kwargs):
        super().__init__(spec, dim, n_actions, config, **kwargs)
        self._episode: List[EpisodeStep] = []

    @staticmethod
    def returns(episode: Sequence[EpisodeStep]) -> List[float]:
        """G_t = c_{t+1} + γ(s_{t+1})·G_{t+1}, with G = 0 after the last step"""
        G = 0.0
        out = [0.0] * len(episode)
        for t in range(len(episode) - 1, -1, -1):
            G = episode[t].cumulant + episode[t].continuation * G
            out[t] = G
        return out

    def _update(self, transition: Transition) -> StepReport:
        tau = self.gvf.target_prob(transition.state, transition.action)
        c = self.gvf.cumulant_at(transition)
        self._episode.append(EpisodeStep(
            transition.features,
            c,
            self.gvf.continuation_at(transition),
            tau,
            transition.behavior_prob,
        ))
        if not (transition.terminal or transition.truncated):
            return StepReport(delta=0.0, cumulant=c, skipped=True)
        episode, self._episode = self._episode, []
        mse = self.episode(episode)
        return StepReport(delta=mse, cumulant=c)

    def step(self, transition: Transition) -> StepReport:
        report = self._update(transition)
        if report.skipped:
            return replace(report, ude=self.ude_tracker.value())
        return replace(report, ude=self.ude_tracker.update(report.delta))

    def episode(self, episode: Sequence[EpisodeStep]) -> float:
        """Regress every visited state toward its return; returns the mean squared error"""
        for item in episode:
            if abs(item.target_prob - item.behavior_prob) > PROBABILITY_TOLERANCE:
                raise PolicyMismatchError(
                    f"Monte-Carlo demon '{self.name}' got an action with target probability "
                    f"{item.target_prob} but behavior probability {item.behavior_prob}"
                )
        if not episode:
            return 0.0
        targets = self.returns(episode)
        squared = []
        for item, G in zip(episode, targets):
            delta = td_error(self.vfa.predict_v(item.features), G)
            squared.append(delta * delta)
            self.vfa.apply_update(delta * self.vfa.gradient(item.features), self.step_size)
        return float(np.mean(squared))


LEARNERS: Dict[str, Type[Learner]] = {
    cls.algorithm: cls
    for cls in (
        TDLearner,
        ImportanceSamplingTDLearner,
        ResampledReplayLearner,
        GavfLearner,
        MonteCarloLearner,
        ControlGavfLearner,
    )
}


def make_learner(algorithm: str, spec, dim: int, n_actions: int, config: Optional[LearnerConfig] = None,
                 **kwargs) -> Learner:
    try:
        cls = LEARNERS[algorithm]
    except KeyError:
        raise InvalidArgumentError(f"Unknown learning algorithm '{algorithm}', expected one of {sorted(LEARNERS)}")
    return cls(spec, dim, n_actions, config, **kwargs)


def _expect(learner: Learner, cls: Type[Learner], operation: str):
    if not isinstance(learner, cls):
        raise InvalidArgumentError(f"{operation} needs a {cls.__name__}, got {type(learner).__name__}")


def on_policy_step(learner: TDLearner, transition: Transition) -> float:
    _expect(learner, TDLearner, "on_policy_step")
    return learner.step(transition).delta


def off_policy_is_step(learner: ImportanceSamplingTDLearner, transition: Transition) -> float:
    _expect(learner, ImportanceSamplingTDLearner, "off_policy_is_step")
    return learner.step(transition).delta


def resampled_replay_step(learner: ResampledReplayLearner, transition: Transition) -> float:
    _expect(learner, ResampledReplayLearner, "resampled_replay_step")
    return learner.step(transition).delta


def gavf_step(learner: GavfLearner, transition: Transition) -> float:
    _expect(learner, GavfLearner, "gavf_step")
    return learner.step(transition).delta


def control_gavf_step(learner: ControlGavfLearner, transition: Transition) -> float:
    _expect(learner, ControlGavfLearner, "control_gavf_step")
    return learner.step(transition).delta


def monte_carlo_episode(learner: MonteCarloLearner, episode: Sequence[EpisodeStep]) -> float:
    _expect(learner, MonteCarloLearner, "monte_carlo_episode")
    return learner.episode([EpisodeStep(*item) for item in episode])
