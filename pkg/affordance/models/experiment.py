# affordance/models/experiment.py
"""
Schema for experiment configuration files.

Everything is validated before a run starts; unknown keys are rejected and
every name a block refers to (demons, options, cumulants) must resolve.
"""
from typing import Annotated, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from affordance.constants import CONFIG_SCHEMA_VERSION
from affordance.constants.gvf_constants import (
    DEFAULT_BUFFER_CAPACITY,
    DEFAULT_FIND_GAMMA,
    DEFAULT_MINIBATCH_SIZE,
    DEFAULT_PSR_BINS,
    DEFAULT_STEP_SIZE,
    DEFAULT_SUCCESS_SIGNAL,
    DEFAULT_SUCCESS_THRESHOLD,
    LANE_DEFAULT_HORIZON,
    LANE_DEFAULT_SIGMA,
    LANE_STEER_STEP,
    MARKOV_MIN_SUPPORT,
    MARKOV_NOISE_THRESHOLD,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


Cell = List[int]
ActionRef = Union[int, str]
UnitInterval = Annotated[float, Field(ge=0.0, le=1.0)]


# ---------------------------------------------------------------------------
# Learners
# ---------------------------------------------------------------------------

class LearnerConfig(StrictModel):
    """Step size, replay settings and seed shared by every learning algorithm"""
    step_size: float = Field(DEFAULT_STEP_SIZE, gt=0)
    buffer_capacity: int = Field(DEFAULT_BUFFER_CAPACITY, ge=1)
    minibatch_size: int = Field(DEFAULT_MINIBATCH_SIZE, ge=1)
    rho_clip: Optional[float] = Field(None, gt=0)
    use_rho_bar: bool = True
    seed: int = 0

    @model_validator(mode='after')
    def _minibatch_fits(self):
        if self.buffer_capacity < self.minibatch_size:
            raise ValueError(
                f"buffer_capacity ({self.buffer_capacity}) must be >= minibatch_size ({self.minibatch_size})"
            )
        return self


class DemonLearnerConfig(LearnerConfig):
    algorithm: Literal['td', 'is', 'resampled', 'gavf', 'montecarlo', 'control']


# ---------------------------------------------------------------------------
# Environments
# ---------------------------------------------------------------------------

class ChainEnvConfig(StrictModel):
    type: Literal['chain']
    n: int = Field(5, ge=1)


class GridEnvConfig(StrictModel):
    type: Literal['grid']
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    start: Cell
    walls: List[Cell] = []
    zones: Dict[str, List[Cell]] = {}
    goals: List[Cell] = []
    traps: List[Cell] = []
    slip: UnitInterval = 0.0


class LaneEnvConfig(StrictModel):
    type: Literal['lane']
    bins: int = Field(ge=2)
    sigma: float = Field(LANE_DEFAULT_SIGMA, ge=0)
    horizon: int = Field(LANE_DEFAULT_HORIZON, ge=1)
    encoding: Literal['bins', 'rbf'] = 'bins'
    rbf_width: Optional[float] = Field(None, gt=0)
    step: float = Field(LANE_STEER_STEP, gt=0)
    start: float = 0.0


EnvConfig = Annotated[Union[ChainEnvConfig, GridEnvConfig, LaneEnvConfig], Field(discriminator='type')]


# ---------------------------------------------------------------------------
# Policies, cumulants, terminations, continuations
# ---------------------------------------------------------------------------

class UniformPolicyConfig(StrictModel):
    kind: Literal['uniform-random']


class FixedActionPolicyConfig(StrictModel):
    kind: Literal['fixed-action']
    action: ActionRef


class TabularPolicyConfig(StrictModel):
    kind: Literal['tabular-stochastic']
    table: List[List[float]]


PolicyConfig = Annotated[
    Union[UniformPolicyConfig, FixedActionPolicyConfig, TabularPolicyConfig],
    Field(discriminator='kind'),
]


class ConstantCumulantConfig(StrictModel):
    kind: Literal['constant']
    value: float


class SignalCumulantConfig(StrictModel):
    kind: Literal['signal']
    signal: str
    scale: float = 1.0


class StateSetCumulantConfig(StrictModel):
    kind: Literal['state-set']
    states: List[int]


class OutcomeCumulantConfig(StrictModel):
    kind: Literal['terminal-outcome']
    signal: str = DEFAULT_SUCCESS_SIGNAL


class FeatureCumulantConfig(StrictModel):
    kind: Literal['feature']
    feature: int = Field(ge=0)


CumulantConfig = Annotated[
    Union[
        ConstantCumulantConfig,
        SignalCumulantConfig,
        StateSetCumulantConfig,
        OutcomeCumulantConfig,
        FeatureCumulantConfig,
    ],
    Field(discriminator='kind'),
]


class ConstantTerminationConfig(StrictModel):
    kind: Literal['constant']
    beta: UnitInterval


class StateSetTerminationConfig(StrictModel):
    kind: Literal['state-set']
    states: List[int]


class TableTerminationConfig(StrictModel):
    kind: Literal['table']
    table: List[UnitInterval]


TerminationConfig = Annotated[
    Union[ConstantTerminationConfig, StateSetTerminationConfig, TableTerminationConfig],
    Field(discriminator='kind'),
]


class ConstantContinuationConfig(StrictModel):
    kind: Literal['constant']
    gamma: UnitInterval


class TableContinuationConfig(StrictModel):
    kind: Literal['table']
    table: List[UnitInterval]


class ComposedContinuationConfig(StrictModel):
    kind: Literal['composed']
    gamma: UnitInterval
    termination: TerminationConfig


ContinuationConfig = Annotated[
    Union[ConstantContinuationConfig, TableContinuationConfig, ComposedContinuationConfig],
    Field(discriminator='kind'),
]


class OptionConfig(StrictModel):
    policy: PolicyConfig
    termination: TerminationConfig
    initiation: Optional[List[int]] = None


# ---------------------------------------------------------------------------
# Demons
# ---------------------------------------------------------------------------

class DemonConfig(StrictModel):
    """
    One question and its learner. The question is either spelled out
    (target_policy + continuation) or bound to a named option (option + gamma).
    Control demons give only a continuation; their target policy is greedy
    over their own action values.
    """
    name: str = Field(min_length=1, pattern=r'^[A-Za-z0-9_.\-]+$')
    cumulant: Union[str, CumulantConfig]
    target_policy: Optional[PolicyConfig] = None
    continuation: Optional[ContinuationConfig] = None
    option: Optional[str] = None
    gamma: Optional[UnitInterval] = None
    learner: DemonLearnerConfig

    @model_validator(mode='after')
    def _one_question_form(self):
        explicit = self.target_policy is not None or self.continuation is not None
        bound = self.option is not None or self.gamma is not None
        if explicit and bound:
            raise ValueError("use either target_policy/continuation or option/gamma, not both")
        if bound and (self.option is None or self.gamma is None):
            raise ValueError("an option-bound demon needs both 'option' and 'gamma'")
        if self.learner.algorithm == 'control':
            if self.continuation is None and not bound:
                raise ValueError("a control demon needs a continuation")
        elif not bound and (self.target_policy is None or self.continuation is None):
            raise ValueError("a demon needs target_policy and continuation (or option and gamma)")
        return self


# ---------------------------------------------------------------------------
# Control scenarios
# ---------------------------------------------------------------------------

class ConditionConfig(StrictModel):
    demon: str
    op: Literal['<', '<=', '>', '>=']
    threshold: float


class RuleConfig(StrictModel):
    action: ActionRef
    conditions: List[ConditionConfig] = []
    priority: int = 0


class PavlovianConfig(StrictModel):
    rules: List[RuleConfig] = Field(min_length=1)
    steps: int = Field(10_000, ge=1)


class WhatIfConfig(StrictModel):
    weights: Dict[str, float] = Field(min_length=1)
    candidates: Optional[List[ActionRef]] = None
    states: List[int] = []


class ChainPlanConfig(StrictModel):
    target_option: str
    success_demon: str
    threshold: UnitInterval = DEFAULT_SUCCESS_THRESHOLD
    find_gamma: float = Field(DEFAULT_FIND_GAMMA, gt=0, le=1)
    find_steps: int = Field(50_000, ge=0)
    find_learner: LearnerConfig = LearnerConfig()
    comfort_demon: Optional[str] = None
    success_signal: str = DEFAULT_SUCCESS_SIGNAL
    episodes: int = Field(1000, ge=1)
    max_steps: int = Field(100, ge=1)


class PsrConfig(StrictModel):
    demons: List[str] = Field(min_length=1)
    reward_signal: str
    bins: int = Field(DEFAULT_PSR_BINS, ge=1)
    low: float = 0.0
    high: float = 1.0
    step_size: float = Field(0.1, gt=0)
    gamma: UnitInterval = 0.9
    epsilon: UnitInterval = 0.1
    episodes: int = Field(500, ge=1)
    max_steps: int = Field(100, ge=1)
    min_support: int = Field(MARKOV_MIN_SUPPORT, ge=1)
    noise_threshold: float = Field(MARKOV_NOISE_THRESHOLD, ge=0)

    @model_validator(mode='after')
    def _range(self):
        if not self.high > self.low:
            raise ValueError(f"high ({self.high}) must exceed low ({self.low})")
        return self


class ControlConfig(StrictModel):
    pavlovian: Optional[PavlovianConfig] = None
    whatif: Optional[WhatIfConfig] = None
    chain: Optional[ChainPlanConfig] = None
    psr: Optional[PsrConfig] = None


# ---------------------------------------------------------------------------
# Run and output
# ---------------------------------------------------------------------------

class RunConfig(StrictModel):
    steps: int = Field(0, ge=0)
    seed: int = 0
    log_interval: int = Field(1, ge=1)
    probe_states: List[int] = []
    parallel: bool = False


class OutputConfig(StrictModel):
    dir: str = 'out'
    run_log: str = 'runlog.csv'
    oracle: str = 'oracle.csv'
    evaluation: str = 'evaluation.csv'
    demo: str = 'demo.csv'
    models: str = 'models'


class ExperimentConfig(StrictModel):
    schema_version: Literal[CONFIG_SCHEMA_VERSION] = CONFIG_SCHEMA_VERSION
    name: str = 'experiment'
    environment: EnvConfig
    behavior: PolicyConfig = UniformPolicyConfig(kind='uniform-random')
    options: Dict[str, OptionConfig] = {}
    cumulants: Dict[str, CumulantConfig] = {}
    demons: List[DemonConfig] = []
    control: ControlConfig = ControlConfig()
    run: RunConfig = RunConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode='after')
    def _references_resolve(self):
        names = [d.name for d in self.demons]
        duplicates = sorted({n for n in names if names.count(n) > 1})
        if duplicates:
            raise ValueError(f"demons: duplicate names {duplicates}")
        known = set(names)

        for i, demon in enumerate(self.demons):
            if isinstance(demon.cumulant, str) and demon.cumulant not in self.cumulants:
                raise ValueError(f"demons.{i}.cumulant: unknown cumulant '{demon.cumulant}'")
            if demon.option is not None and demon.option not in self.options:
                raise ValueError(f"demons.{i}.option: unknown option '{demon.option}'")

        def check(path, demon_names):
            missing = sorted(set(demon_names) - known)
            if missing:
                raise ValueError(f"{path}: unknown demons {missing}")

        control = self.control
        if control.pavlovian:
            for i, rule in enumerate(control.pavlovian.rules):
                check(f"control.pavlovian.rules.{i}.conditions", [c.demon for c in rule.conditions])
        if control.whatif:
            check("control.whatif.weights", control.whatif.weights)
        if control.psr:
            check("control.psr.demons", control.psr.demons)
        if control.chain:
            check("control.chain.success_demon", [control.chain.success_demon])
            if control.chain.comfort_demon:
                check("control.chain.comfort_demon", [control.chain.comfort_demon])
            if control.chain.target_option not in self.options:
                raise ValueError(f"control.chain.target_option: unknown option '{control.chain.target_option}'")
        return self
