"""
Tests for hordes of demons, affordance sets and prediction vectors.
"""
import numpy as np
import pytest

from affordance.core.horde import (
    AffordanceSet,
    Demon,
    Horde,
    PredictionVector,
    Question,
    derive_seed,
    horde_step,
    predict_vector,
)
from affordance.core.learners import ResampledReplayLearner, TDLearner
from affordance.core.oracle import solve_gvf
from affordance.envs import ChainWorld
from affordance.exceptions import ConfigurationError, CoverageViolationError, InvalidArgumentError
from affordance.models.experiment import LearnerConfig
from affordance.models.gvf import (
    ConstantContinuation,
    ConstantTermination,
    FixedActionPolicy,
    GvfSpec,
    OptionSpec,
    SignalCumulant,
    UniformRandomPolicy,
)
from affordance.models.transition import Transition

LEFT, RIGHT = 0, 1
DIM = 7
REPLAY = LearnerConfig(step_size=0.1, buffer_capacity=200, minibatch_size=4)


def spec(name, action=RIGHT, signal='goal', gamma=0.9):
    return GvfSpec(name, SignalCumulant(signal), FixedActionPolicy(2, action), ConstantContinuation(gamma))


def chain_stream(steps, seed=0):
    env = ChainWorld(5)
    behavior = UniformRandomPolicy(2)
    rng = np.random.default_rng(seed)
    state = env.reset(seed)
    stream = []
    for _ in range(steps):
        action = behavior.sample(state, rng)
        result = env.step(action)
        stream.append(Transition.from_step(state, action, result, 0.5))
        state = env.reset() if result.terminal else result.next_state
    return stream


class UncoveredLearner(TDLearner):
    def _update(self, transition):
        raise CoverageViolationError("no behavior support", demon=self.name)


class TestDeriveSeed:

    def test_stable(self):
        assert derive_seed(7, 'goal') == derive_seed(7, 'goal')

    def test_depends_on_name_and_master(self):
        assert derive_seed(7, 'goal') != derive_seed(7, 'cost')
        assert derive_seed(7, 'goal') != derive_seed(8, 'goal')

    def test_fits_64_bits(self):
        assert 0 <= derive_seed(123, 'x') < 2 ** 64


class TestAffordanceSet:

    @pytest.fixture
    def options(self):
        return {'right': OptionSpec(FixedActionPolicy(2, RIGHT), ConstantTermination(0.0), name='right')}

    def test_specs_follow_question_order(self, options):
        questions = [Question('b', 'right', 'goal', 0.9), Question('a', 'right', 'goal', 0.5)]
        specs = AffordanceSet(options, {'goal': SignalCumulant('goal')}, questions).specs()
        assert [s.name for s in specs] == ['b', 'a']
        assert specs[0].gvf.target_policy is options['right'].policy

    def test_unknown_option(self, options):
        with pytest.raises(ConfigurationError, match="unknown option"):
            AffordanceSet(options, {'goal': SignalCumulant('goal')}, [Question('q', 'left', 'goal', 0.9)])

    def test_unknown_cumulant(self, options):
        with pytest.raises(ConfigurationError, match="unknown cumulant"):
            AffordanceSet(options, {}, [Question('q', 'right', 'goal', 0.9)])

    def test_duplicate_question(self, options):
        questions = [Question('q', 'right', 'goal', 0.9)] * 2
        with pytest.raises(ConfigurationError, match="Duplicate"):
            AffordanceSet(options, {'goal': SignalCumulant('goal')}, questions)


class TestHordeStep:

    def test_empty_horde(self):
        assert horde_step(Horde(), chain_stream(1)[0]) == {}

    def test_singleton_matches_standalone_learner(self):
        horde = Horde(master_seed=5)
        horde.add(spec('goal-right'), 'resampled', DIM, 2, REPLAY)
        standalone = ResampledReplayLearner(
            spec('goal-right'), DIM, 2, REPLAY.model_copy(update={'seed': derive_seed(5, 'goal-right')})
        )
        for transition in chain_stream(500):
            horde.step(transition)
            standalone.step(transition)
        np.testing.assert_array_equal(horde.demon('goal-right').learner.vfa.weights, standalone.vfa.weights)

    def test_independent_of_declaration_order(self):
        names = ['goal-right', 'goal-left', 'cost-right']
        specs = {
            'goal-right': spec('goal-right'),
            'goal-left': spec('goal-left', LEFT),
            'cost-right': spec('cost-right', signal='step_cost'),
        }
        forward, backward = Horde(master_seed=1), Horde(master_seed=1)
        for name in names:
            forward.add(specs[name], 'resampled', DIM, 2, REPLAY)
        for name in reversed(names):
            backward.add(specs[name], 'resampled', DIM, 2, REPLAY)
        for transition in chain_stream(300):
            forward.step(transition)
            backward.step(transition, parallel=True)
        for name in names:
            np.testing.assert_array_equal(
                forward.demon(name).learner.vfa.weights, backward.demon(name).learner.vfa.weights
            )

    def test_coverage_violation_is_recorded_per_demon(self):
        healthy = TDLearner(spec('goal-right'), DIM, 2)
        horde = Horde(demons=[
            Demon(spec('uncovered'), UncoveredLearner(spec('uncovered'), DIM, 2)),
            Demon(spec('goal-right'), healthy),
        ])
        reports = horde.step(Transition(np.eye(DIM)[4], RIGHT, np.eye(DIM)[6], {'goal': 1.0}, terminal=True))
        assert list(reports) == ['uncovered', 'goal-right']
        assert not reports['uncovered'].ok
        assert reports['goal-right'].ok
        assert healthy.vfa.weights[4] > 0

    def test_duplicate_names_rejected(self):
        horde = Horde()
        horde.add(spec('goal'), 'is', DIM, 2)
        with pytest.raises(ConfigurationError, match="Duplicate"):
            horde.add(spec('goal'), 'td', DIM, 2)

    def test_unknown_demon(self):
        with pytest.raises(ConfigurationError):
            Horde().demon('nobody')


class TestPredictionVector:

    def test_zero_weights(self):
        horde = Horde()
        horde.add(spec('a'), 'is', DIM, 2)
        horde.add(spec('b'), 'gavf', DIM, 2)
        assert not predict_vector(horde, np.eye(DIM)[2]).values.any()

    def test_oracle_loaded_horde(self):
        model = ChainWorld(5).model()
        horde = Horde()
        specs = [spec('steps-left', LEFT, 'step_cost', 0.5), spec('goal-right')]
        for s in specs:
            horde.add(s, 'is', DIM, 2).learner.vfa.set_weights(solve_gvf(model, s).v)
        upsilon = horde.predict_vector(model.state(3))
        assert upsilon.names == ('steps-left', 'goal-right')
        np.testing.assert_allclose(upsilon.values, [solve_gvf(model, s).v[3] for s in specs])
        assert upsilon['steps-left'] == pytest.approx(1.875)

    def test_read_only(self):
        upsilon = PredictionVector([1.0, 2.0], ('a', 'b'))
        with pytest.raises(ValueError):
            upsilon.values[0] = 3.0
        assert upsilon.as_dict() == {'a': 1.0, 'b': 2.0}

    def test_unknown_name(self):
        with pytest.raises(InvalidArgumentError):
            PredictionVector([1.0], ('a',))['b']

    def test_length_must_match(self):
        with pytest.raises(InvalidArgumentError):
            PredictionVector([1.0, 2.0], ('a',))
