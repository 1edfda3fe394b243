# affordance/services/builder.py
"""
Turns a validated ExperimentConfig into environments, questions and a horde.
"""
import logging
from typing import Dict, List, Optional, Union

from affordance.core.horde import AffordanceSet, Horde, Question, derive_seed
from affordance.envs import ChainWorld, Environment, GridWorld, LaneWorld
from affordance.exceptions import ConfigurationError, InvalidArgumentError
from affordance.models import experiment as schema
from affordance.models.gvf import (
    AffordanceSpec,
    ConstantContinuation,
    ConstantCumulant,
    ConstantTermination,
    ContinuationFn,
    CumulantFn,
    FeatureCumulant,
    FixedActionPolicy,
    GvfSpec,
    OptionSpec,
    OutcomeCumulant,
    Policy,
    SignalCumulant,
    StateSetCumulant,
    StateSetInitiation,
    StateSetTermination,
    TableContinuation,
    TableTermination,
    TabularPolicy,
    TerminationFn,
    UniformRandomPolicy,
    always_initiable,
    compose_continuation,
    frozen_states,
)

logger = logging.getLogger(__name__)


def build_environment(config) -> Environment:
    """Instantiate the environment block of an experiment config"""
    try:
        if isinstance(config, schema.ChainEnvConfig):
            return ChainWorld(config.n)
        if isinstance(config, schema.GridEnvConfig):
            return GridWorld(
                config.width,
                config.height,
                config.start,
                walls=config.walls,
                zones=config.zones,
                goals=config.goals,
                traps=config.traps,
                slip=config.slip,
            )
        if isinstance(config, schema.LaneEnvConfig):
            return LaneWorld(
                config.bins,
                sigma=config.sigma,
                horizon=config.horizon,
                encoding=config.encoding,
                rbf_width=config.rbf_width,
                step=config.step,
                start=config.start,
            )
    except InvalidArgumentError as e:
        raise ConfigurationError(f"environment: {e}")
    raise ConfigurationError(f"environment: unsupported type {type(config).__name__}")


class ExperimentBuilder:
    """Resolves every name and table in the config against one environment."""

    def __init__(self, config: schema.ExperimentConfig):
        self.config = config
        self.env = build_environment(config.environment)
        self._options: Optional[Dict[str, OptionSpec]] = None

    @property
    def dim(self) -> int:
        return self.env.feature_dim

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    def action(self, ref: Union[int, str], path: str) -> int:
        names = self.env.action_names
        if isinstance(ref, str):
            if ref not in names:
                raise ConfigurationError(f"{path}: unknown action '{ref}', expected one of {names}")
            return names.index(ref)
        if not 0 <= ref < len(names):
            raise ConfigurationError(f"{path}: action {ref} out of range for {len(names)} actions")
        return int(ref)

    def state_set(self, states: List[int], path: str):
        n = self.env.n_states
        if n is None:
            raise ConfigurationError(f"{path}: state sets need an environment with discrete states")
        bad = [s for s in states if not 0 <= s < n]
        if bad:
            raise ConfigurationError(f"{path}: states {bad} out of range for {n} states")
        return frozen_states(states)

    def _table_length(self, table, path: str):
        if self.env.n_states is None or len(table) != self.env.n_states:
            raise ConfigurationError(f"{path}: table needs one entry per state ({self.env.n_states})")

    def policy(self, config, path: str) -> Policy:
        try:
            if isinstance(config, schema.UniformPolicyConfig):
                return UniformRandomPolicy(self.n_actions)
            if isinstance(config, schema.FixedActionPolicyConfig):
                return FixedActionPolicy(self.n_actions, self.action(config.action, f"{path}.action"))
            self._table_length(config.table, f"{path}.table")
            policy = TabularPolicy(config.table)
        except InvalidArgumentError as e:
            raise ConfigurationError(f"{path}: {e}")
        if policy.n_actions != self.n_actions:
            raise ConfigurationError(f"{path}: table rows need {self.n_actions} action probabilities")
        return policy

    def cumulant(self, config, path: str) -> CumulantFn:
        if isinstance(config, str):
            return self.cumulant(self.config.cumulants[config], f"cumulants.{config}")
        if isinstance(config, schema.ConstantCumulantConfig):
            return ConstantCumulant(config.value)
        if isinstance(config, (schema.SignalCumulantConfig, schema.OutcomeCumulantConfig)):
            if config.signal not in self.env.signal_names:
                raise ConfigurationError(
                    f"{path}.signal: unknown signal '{config.signal}', expected one of {self.env.signal_names}"
                )
            if isinstance(config, schema.OutcomeCumulantConfig):
                return OutcomeCumulant(config.signal)
            return SignalCumulant(config.signal, config.scale)
        if isinstance(config, schema.StateSetCumulantConfig):
            return StateSetCumulant(self.state_set(config.states, f"{path}.states"))
        if config.feature >= self.dim:
            raise ConfigurationError(f"{path}.feature: index {config.feature} out of range for {self.dim} features")
        return FeatureCumulant(config.feature)

    def termination(self, config, path: str) -> TerminationFn:
        if isinstance(config, schema.ConstantTerminationConfig):
            return ConstantTermination(config.beta)
        if isinstance(config, schema.StateSetTerminationConfig):
            return StateSetTermination(self.state_set(config.states, f"{path}.states"))
        self._table_length(config.table, f"{path}.table")
        return TableTermination(config.table)

    def continuation(self, config, path: str) -> ContinuationFn:
        if isinstance(config, schema.ConstantContinuationConfig):
            return ConstantContinuation(config.gamma)
        if isinstance(config, schema.TableContinuationConfig):
            self._table_length(config.table, f"{path}.table")
            return TableContinuation(config.table)
        return compose_continuation(config.gamma, self.termination(config.termination, f"{path}.termination"))

    def options(self) -> Dict[str, OptionSpec]:
        if self._options is None:
            self._options = {}
            for name, option in self.config.options.items():
                path = f"options.{name}"
                initiation = always_initiable
                if option.initiation is not None:
                    initiation = StateSetInitiation(self.state_set(option.initiation, f"{path}.initiation"))
                self._options[name] = OptionSpec(
                    policy=self.policy(option.policy, f"{path}.policy"),
                    termination=self.termination(option.termination, f"{path}.termination"),
                    initiation=initiation,
                    name=name,
                )
        return self._options

    def behavior(self) -> Policy:
        return self.policy(self.config.behavior, "behavior")

    def affordance_set(self) -> AffordanceSet:
        """(O, C, Ω) from the named options, named cumulants and option-bound demons"""
        cumulants = {name: self.cumulant(c, f"cumulants.{name}") for name, c in self.config.cumulants.items()}
        questions = []
        for i, demon in enumerate(self.config.demons):
            if demon.option is None:
                continue
            key = demon.cumulant
            if not isinstance(key, str):
                key = f"{demon.name}.cumulant"
                cumulants[key] = self.cumulant(demon.cumulant, f"demons.{i}.cumulant")
            questions.append(Question(demon.name, demon.option, key, demon.gamma, demon.learner.algorithm))
        return AffordanceSet(self.options(), cumulants, questions)

    def demon_spec(self, index: int, affordances: AffordanceSet) -> Union[GvfSpec, AffordanceSpec]:
        demon = self.config.demons[index]
        path = f"demons.{index}"
        if demon.option is not None:
            question = next(q for q in affordances.questions if q.name == demon.name)
            return affordances.spec(question)
        cumulant = self.cumulant(demon.cumulant, f"{path}.cumulant")
        continuation = self.continuation(demon.continuation, f"{path}.continuation")
        if demon.target_policy is None:
            # Control demons replace this with a greedy policy over their own values
            target = UniformRandomPolicy(self.n_actions)
        else:
            target = self.policy(demon.target_policy, f"{path}.target_policy")
        return GvfSpec(demon.name, cumulant, target, continuation)

    def horde(self, master_seed: Optional[int] = None, ude_window: Optional[int] = None,
              ude_epsilon: Optional[float] = None) -> Horde:
        seed = self.config.run.seed if master_seed is None else master_seed
        horde = Horde(self.behavior(), master_seed=seed)
        affordances = self.affordance_set()
        for i, demon in enumerate(self.config.demons):
            spec = self.demon_spec(i, affordances)
            learner = demon.learner
            config = schema.LearnerConfig(**learner.model_dump(exclude={'algorithm'}))
            horde.add(spec, learner.algorithm, self.dim, self.n_actions, config,
                      ude_window=ude_window, ude_epsilon=ude_epsilon)
        logger.info(f"Built horde of {len(horde)} demon(s)", extra={'demons': list(horde.names)})
        return horde

    def probe_states(self) -> List[int]:
        probes = list(self.config.run.probe_states)
        self.state_set(probes, "run.probe_states")
        return probes

    def seed_for(self, purpose: str, master_seed: Optional[int] = None) -> int:
        seed = self.config.run.seed if master_seed is None else master_seed
        return derive_seed(seed, purpose)
