"""
Tests for Pavlovian rules, what-if selection, learned initiation sets,
the find construction and option chaining.
"""
import numpy as np
import pytest

from affordance.core.control import (
    ChainPlan,
    Condition,
    LearnedInitiationSet,
    PavlovianRule,
    RuleSet,
    build_find_option,
    execute_chain,
    pavlovian_act,
    value_refined_find,
    what_if_select,
)
from affordance.core.horde import PredictionVector
from affordance.core.learners import ControlGavfLearner
from affordance.core.oracle import value_iteration
from affordance.core.vfa import LinearVfa
from affordance.envs import GridWorld
from affordance.exceptions import ConfigurationError, InvalidArgumentError
from affordance.models.experiment import LearnerConfig
from affordance.models.gvf import (
    ConstantTermination,
    FixedActionPolicy,
    OptionSpec,
    StateSetTermination,
    UniformRandomPolicy,
    frozen_states,
)
from affordance.models.transition import Transition

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3


def upsilon(**values):
    return PredictionVector(list(values.values()), tuple(values))


def train_find(grid, task, steps=20_000):
    """Q-learn the find task from a uniform random stream with resets every 25 steps"""
    learner = ControlGavfLearner(task.to_gvf('find', 4), grid.feature_dim, 4, LearnerConfig(step_size=0.5))
    behavior = UniformRandomPolicy(4)
    rng = np.random.default_rng(0)
    state = grid.reset(0)
    for t in range(steps):
        action = behavior.sample(state, rng)
        result = grid.step(action)
        learner.step(Transition.from_step(state, action, result, 0.25))
        state = grid.reset() if t % 25 == 24 else result.next_state
    return learner


def follow(grid, policy, start, targets, limit=10):
    s, steps = start, 0
    while s not in targets and steps < limit:
        s = grid.move(s, policy.greedy_action(grid.state_of(s)))
        steps += 1
    return s, steps


class TestPavlovian:

    @pytest.fixture
    def lane_rules(self):
        return RuleSet([
            PavlovianRule(0, (Condition('centered', '<', 0.6), Condition('position', '>', 0.0)), priority=1),
            PavlovianRule(2, (Condition('centered', '<', 0.6), Condition('position', '<', 0.0)), priority=1),
            PavlovianRule(1),
        ])

    def test_single_default_rule(self):
        assert pavlovian_act([PavlovianRule(2)], upsilon(a=0.3)) == 2

    def test_recovers_toward_center(self, lane_rules):
        assert lane_rules.act(upsilon(centered=0.4, position=0.7)) == 0
        assert lane_rules.act(upsilon(centered=0.4, position=-0.7)) == 2
        assert lane_rules.act(upsilon(centered=0.9, position=0.1)) == 1

    def test_priority_beats_declaration_order(self):
        rules = RuleSet([PavlovianRule(1), PavlovianRule(0, (Condition('a', '>=', 0.0),), priority=5)])
        assert rules.act(upsilon(a=0.0)) == 0

    def test_equal_priority_uses_declaration_order(self):
        rules = RuleSet([
            PavlovianRule(2, (Condition('a', '>', 0.0),)),
            PavlovianRule(1, (Condition('a', '>', 0.0),)),
            PavlovianRule(0),
        ])
        assert rules.act(upsilon(a=1.0)) == 2

    def test_default_required(self):
        with pytest.raises(ConfigurationError, match="default"):
            RuleSet([PavlovianRule(0, (Condition('a', '>', 0.0),))])

    def test_unknown_demon(self):
        with pytest.raises(ConfigurationError, match="unknown demon"):
            RuleSet([PavlovianRule(0, (Condition('b', '>', 0.0),)), PavlovianRule(1)], demon_names=['a'])

    def test_action_range(self):
        with pytest.raises(ConfigurationError):
            RuleSet([PavlovianRule(3)], n_actions=3)

    def test_unknown_operator(self):
        with pytest.raises(ConfigurationError):
            Condition('a', '==', 0.0)


class TestWhatIf:

    @pytest.fixture
    def gavfs(self):
        safety, speed = LinearVfa(2, 3), LinearVfa(2, 3)
        safety.set_weights([[1.0, 0.0], [0.5, 0.0], [0.0, 0.0]])
        speed.set_weights([[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]])
        return {'safety': safety, 'speed': speed}

    def test_weighted_argmax(self, gavfs):
        choice = what_if_select(gavfs, {'safety': 1.0, 'speed': 0.6}, [1.0, 0.0])
        assert choice.scores == pytest.approx({0: 1.0, 1: 0.8, 2: 1.2})
        assert choice.action == 2

    def test_ties_pick_lowest_action(self, gavfs):
        assert what_if_select(gavfs, {'safety': 1.0, 'speed': 1.0}, [1.0, 0.0], candidates=[1, 0]).action == 0

    def test_candidates_restrict_choice(self, gavfs):
        choice = what_if_select(gavfs, {'safety': 1.0}, [1.0, 0.0], candidates=[1, 2])
        assert choice.action == 1
        assert set(choice.scores) == {1, 2}

    def test_unknown_gavf(self, gavfs):
        with pytest.raises(ConfigurationError, match="unknown GAVFs"):
            what_if_select(gavfs, {'comfort': 1.0}, [1.0, 0.0])

    def test_empty_candidates(self, gavfs):
        with pytest.raises(InvalidArgumentError):
            what_if_select(gavfs, {'safety': 1.0}, [1.0, 0.0], candidates=[])

    @pytest.mark.parametrize('candidates', [[3], [-1], [0, 5]])
    def test_candidates_out_of_range(self, gavfs, candidates):
        with pytest.raises(InvalidArgumentError, match="out of range"):
            what_if_select(gavfs, {'safety': 1.0}, [1.0, 0.0], candidates=candidates)


class TestFindOption:

    @pytest.fixture
    def grid(self):
        return GridWorld(3, 3, [0, 0])

    def test_learned_initiation(self, grid):
        target = grid.index_of([2, 2])
        initiation = LearnedInitiationSet(lambda s: 0.9 if s.index == target else 0.1, threshold=0.8)
        assert initiation(grid.state_of(target))
        assert initiation.members(grid.state_of(i) for i in range(grid.n_states)) == {target}

    def test_find_task_shape(self, grid):
        target = grid.index_of([2, 2])
        task = build_find_option(LearnedInitiationSet(lambda s: float(s.index == target)), grid, 0.9)
        assert task.target == {target}
        assert task.continuation(grid.state_of(target)) == 0.0
        assert task.continuation(grid.state_of(0)) == pytest.approx(0.9)

    def test_empty_target(self, grid):
        with pytest.raises(ConfigurationError, match="Empty target"):
            build_find_option(LearnedInitiationSet(lambda s: 0.0), grid)

    def test_find_gamma_range(self, grid):
        with pytest.raises(InvalidArgumentError):
            build_find_option(LearnedInitiationSet(lambda s: 1.0), grid, 0.0)

    def test_value_refined_reward(self, grid):
        task = build_find_option(LearnedInitiationSet(lambda s: float(s.index in (2, 8))), grid)
        refined = value_refined_find(lambda s: 10.0 * s.index, task, grid)
        into_8 = Transition(grid.state_of(7).features, RIGHT, grid.state_of(8).features, state_id=7, next_state_id=8)
        into_4 = Transition(grid.state_of(1).features, DOWN, grid.state_of(4).features, state_id=1, next_state_id=4)
        assert refined.cumulant(into_8) == 80.0
        assert refined.cumulant(into_4) == 0.0
        assert refined.continuation is task.continuation

    def test_value_refined_checks_dimension(self, grid):
        task = build_find_option(LearnedInitiationSet(lambda s: float(s.index == 8)), grid)

        class Comfort:
            vfa = LinearVfa(4)

        with pytest.raises(ConfigurationError, match="dimension"):
            value_refined_find(Comfort(), task, grid)

    def test_greedy_find_takes_shortest_paths(self, grid):
        target = grid.index_of([2, 2])
        task = build_find_option(LearnedInitiationSet(lambda s: float(s.index == target)), grid, 0.9)
        policy = train_find(grid, task).greedy_policy()
        distances = grid.distances_to([target])
        for start in range(grid.n_states):
            if start == target:
                continue
            _, steps = follow(grid, policy, start, {target})
            assert steps == distances[start], start

    def test_value_refined_find_prefers_comfortable_zone(self):
        # Both zones are two moves from the middle column
        grid = GridWorld(5, 3, [1, 2])
        cramped, comfy = grid.index_of([1, 0]), grid.index_of([1, 4])
        comfort = {cramped: 0.2, comfy: 0.9}
        task = build_find_option(LearnedInitiationSet(lambda s: float(s.index in comfort)), grid, 0.9)
        refined = value_refined_find(lambda s: comfort.get(s.index, 0.0), task, grid)
        learner = train_find(grid, refined)

        v_star, _ = value_iteration(grid.model(), refined.cumulant, refined.continuation)
        policy = learner.greedy_policy()
        for start in (grid.index_of([r, 2]) for r in range(3)):
            end, steps = follow(grid, policy, start, set(comfort))
            assert end == comfy, start
            assert steps == grid.distances_to([comfy])[start]
            assert v_star[start] == pytest.approx(0.9 * 0.9 ** (steps - 1))
            assert learner.predict(grid.state_of(start)) == pytest.approx(v_star[start], abs=0.05)


class TestExecuteChain:

    def plan(self, find_action, initiation, termination=ConstantTermination(0.0)):
        option = OptionSpec(FixedActionPolicy(4, RIGHT), termination, name='go-right')
        return ChainPlan(FixedActionPolicy(4, find_action), option, initiation)

    def test_find_then_option_succeeds(self):
        env = GridWorld(4, 1, [0, 0], goals=[[0, 3]])
        outcome = execute_chain(self.plan(RIGHT, lambda s: s.index >= 2), env, 10, seed=0)
        assert (outcome.reached, outcome.success) == (True, True)
        assert (outcome.find_steps, outcome.option_steps) == (2, 1)
        assert outcome.reason == 'ended'

    def test_find_budget(self):
        env = GridWorld(4, 1, [0, 0], goals=[[0, 3]])
        outcome = execute_chain(self.plan(UP, lambda s: s.index >= 2), env, 5, seed=0)
        assert not outcome.reached
        assert (outcome.find_steps, outcome.reason) == (5, 'budget')

    def test_episode_ends_before_initiation(self):
        env = GridWorld(4, 1, [0, 1], goals=[[0, 3]], traps=[[0, 0]])
        outcome = execute_chain(self.plan(LEFT, lambda s: s.index >= 2), env, 10, seed=0)
        assert outcome.reason == 'ended-before-initiation'
        assert not outcome.success

    def test_option_stops_on_termination(self):
        env = GridWorld(5, 1, [0, 0], goals=[[0, 4]])
        termination = StateSetTermination(frozen_states([2]))
        outcome = execute_chain(self.plan(RIGHT, lambda s: True, termination), env, 10, seed=0)
        assert outcome.reached and not outcome.success
        assert (outcome.find_steps, outcome.option_steps, outcome.reason) == (0, 2, 'option-terminated')

    def test_rejects_empty_budget(self):
        with pytest.raises(InvalidArgumentError):
            execute_chain(self.plan(RIGHT, lambda s: True), GridWorld(2, 1, [0, 0]), 0)
