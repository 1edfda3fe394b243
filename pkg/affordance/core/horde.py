# affordance/core/horde.py
"""
Many demons learning in parallel from one behavior stream, and the vector of
their predictions used as a predictive state representation.
"""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from affordance.core.learners import Learner, StepReport, make_learner
from affordance.exceptions import ConfigurationError, CoverageViolationError, InvalidArgumentError
from affordance.models.experiment import LearnerConfig
from affordance.models.gvf import AffordanceSpec, CumulantFn, GvfSpec, OptionSpec, Policy
from affordance.models.transition import State, Transition

logger = logging.getLogger(__name__)


def derive_seed(master_seed: int, name: str) -> int:
    """Stable 64-bit seed for the RNG of demon `name`"""
    digest = hashlib.blake2b(f"{int(master_seed)}:{name}".encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


class Question(NamedTuple):
    """One element of Ω: a named (option, cumulant) pair plus how to learn it."""
    name: str
    option: str
    cumulant: str
    gamma: float
    algorithm: str = 'is'


class AffordanceSet:
    """
    The tuple (O, C, Ω): named options, named cumulants and the questions
    asked about them.
    """

    def __init__(
        self,
        options: Mapping[str, OptionSpec],
        cumulants: Mapping[str, CumulantFn],
        questions: Sequence[Question] = (),
    ):
        self.options = dict(options)
        self.cumulants = dict(cumulants)
        self.questions = list(questions)

        seen = set()
        for q in self.questions:
            if q.name in seen:
                raise ConfigurationError(f"Duplicate question name '{q.name}'")
            seen.add(q.name)
            if q.option not in self.options:
                raise ConfigurationError(f"Question '{q.name}' refers to unknown option '{q.option}'")
            if q.cumulant not in self.cumulants:
                raise ConfigurationError(f"Question '{q.name}' refers to unknown cumulant '{q.cumulant}'")

    def spec(self, question: Question) -> AffordanceSpec:
        return AffordanceSpec.from_option(
            question.name,
            self.options[question.option],
            self.cumulants[question.cumulant],
            question.gamma,
        )

    def specs(self) -> List[AffordanceSpec]:
        return [self.spec(q) for q in self.questions]


@dataclass(eq=False)
class Demon:
    spec: Union[GvfSpec, AffordanceSpec]
    learner: Learner

    @property
    def name(self) -> str:
        return self.learner.name


@dataclass(frozen=True)
class DemonReport:
    """Outcome of one demon's update: a StepReport, or the coverage error that stopped it."""
    name: str
    report: Optional[StepReport] = None
    error: Optional[CoverageViolationError] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True, eq=False)
class PredictionVector:
    """υ: one prediction per demon, in demon order."""
    values: np.ndarray
    names: Tuple[str, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (len(self.names),):
            raise InvalidArgumentError(f"{values.shape[0]} predictions for {len(self.names)} demons")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("Prediction vector entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'names', tuple(self.names))

    def __len__(self):
        return len(self.names)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def __getitem__(self, key) -> float:
        if isinstance(key, str):
            try:
                return float(self.values[self.names.index(key)])
            except ValueError:
                raise InvalidArgumentError(f"No demon named '{key}' in prediction vector")
        return float(self.values[key])

    def as_dict(self) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.names, self.values)}


class Horde:
    """
    Ordered demons sharing one behavior policy.

    Every demon added through `add` gets an RNG seed derived from
    (master_seed, demon name), so its trajectory does not depend on which
    other demons exist or on the order updates are scheduled in.
    """

    def __init__(self, behavior: Optional[Policy] = None, master_seed: int = 0, demons: Sequence[Demon] = ()):
        self.behavior = behavior
        self.master_seed = int(master_seed)
        self.demons: List[Demon] = []
        for demon in demons:
            self._append(demon)

    def __len__(self):
        return len(self.demons)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(d.name for d in self.demons)

    def demon(self, name: str) -> Demon:
        for demon in self.demons:
            if demon.name == name:
                return demon
        raise ConfigurationError(f"Horde has no demon named '{name}'")

    def _append(self, demon: Demon):
        if demon.name in self.names:
            raise ConfigurationError(f"Duplicate demon name '{demon.name}'")
        self.demons.append(demon)

    def add(self, spec, algorithm: str, dim: int, n_actions: int,
            config: Optional[LearnerConfig] = None, **learner_kwargs) -> Demon:
        """Create a learner for `spec` with a seed derived from the demon name and append it"""
        config = config or LearnerConfig()
        name = spec.name
        seeded = config.model_copy(update={'seed': derive_seed(self.master_seed, name)})
        learner = make_learner(algorithm, spec, dim, n_actions, seeded, **learner_kwargs)
        demon = Demon(spec, learner)
        self._append(demon)
        return demon

    def _update_one(self, demon: Demon, transition: Transition) -> DemonReport:
        try:
            return DemonReport(demon.name, report=demon.learner.step(transition))
        except CoverageViolationError as e:
            logger.warning(f"Coverage violation for demon '{demon.name}': {e}", extra={'demon': demon.name})
            return DemonReport(demon.name, error=e)

    def step(self, transition: Transition, parallel: bool = False,
             max_workers: Optional[int] = None) -> Dict[str, DemonReport]:
        """
        Broadcast one transition to every demon.

        Args:
            transition: The shared, read-only transition
            parallel: Update demons concurrently in a thread pool
            max_workers: Thread pool size when parallel

        Returns:
            Reports keyed by demon name, in demon order
        """
        if parallel and len(self.demons) > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as executor:
                reports = list(executor.map(lambda d: self._update_one(d, transition), self.demons))
        else:
            reports = [self._update_one(d, transition) for d in self.demons]
        return {r.name: r for r in reports}

    def predict_vector(self, state) -> PredictionVector:
        if not isinstance(state, State):
            state = State(np.asarray(state, dtype=float))
        return PredictionVector(
            np.array([d.learner.predict(state) for d in self.demons], dtype=float),
            self.names,
        )


def horde_step(horde: Horde, transition: Transition, parallel: bool = False) -> Dict[str, DemonReport]:
    return horde.step(transition, parallel=parallel)


def predict_vector(horde: Horde, state) -> PredictionVector:
    return horde.predict_vector(state)
