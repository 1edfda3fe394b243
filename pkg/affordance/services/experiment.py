# affordance/services/experiment.py
"""
Experiment orchestration behind the CLI: oracle tables, learning runs,
model evaluation and the control demos. Every run is a pure function of
(config, seed); outputs are CSV files and model files.
"""
import json
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tqdm import tqdm

from affordance.constants.gvf_constants import RUN_LOG_LEADING_COLUMNS, RUN_LOG_TRAILING_COLUMNS
from affordance.core.control import (
    ChainPlan,
    Condition,
    LearnedInitiationSet,
    PavlovianRule,
    RuleSet,
    build_find_option,
    execute_chain,
    value_refined_find,
    what_if_select,
)
from affordance.core.horde import Demon, Horde
from affordance.core.learners import ControlGavfLearner
from affordance.core.oracle import solve_gvf, value_iteration
from affordance.core.psr import MarkovSample, PsrAgent, markov_diagnostic
from affordance.core.returns import trajectory_return
from affordance.core.vfa import LinearVfa
from affordance.envs.base import Environment, FiniteModel
from affordance.exceptions import (
    AffordanceError,
    ConfigurationError,
    ModelNotAvailableError,
)
from affordance.models.experiment import ExperimentConfig
from affordance.models.gvf import ConstantContinuation, SignalCumulant, policy_prob
from affordance.models.transition import Transition
from affordance.services.builder import ExperimentBuilder
from affordance.utils.helpers import model_path, write_csv
from affordance.utils.validators import format_validation_error

logger = logging.getLogger(__name__)

DEMOS = ('pavlovian', 'chain', 'psr', 'whatif')


def load_experiment(path: str, seed: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    """
    Read and validate an experiment config file, applying CLI overrides.

    Raises:
        ConfigurationError: For unreadable JSON or any schema violation
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: invalid JSON ({e})")
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"{path}: {format_validation_error(e)}")

    if seed is not None:
        config = config.model_copy(update={'run': config.run.model_copy(update={'seed': int(seed)})})
    if out is not None:
        config = config.model_copy(update={'output': config.output.model_copy(update={'dir': out})})
    return config


class ExperimentService:
    """Runs one experiment configuration."""

    def __init__(self, config: ExperimentConfig, quiet: bool = False):
        self.config = config
        self.quiet = quiet
        self.builder = ExperimentBuilder(config)

    @property
    def env(self) -> Environment:
        return self.builder.env

    @property
    def seed(self) -> int:
        return self.config.run.seed

    def output_path(self, name: str) -> str:
        return os.path.join(self.config.output.dir, name)

    @property
    def model_dir(self) -> str:
        return self.output_path(self.config.output.models)

    def _model(self) -> FiniteModel:
        try:
            return self.env.model()
        except ModelNotAvailableError:
            raise
        except AffordanceError as e:
            raise ModelNotAvailableError(f"{type(self.env).__name__}: cannot build finite model ({e})")

    def _new_horde(self) -> Horde:
        return self.builder.horde()

    # -----------------------------------------------------------------------
    # Oracle
    # -----------------------------------------------------------------------

    def run_oracle(self) -> pd.DataFrame:
        """Exact v and q of every demon at every non-terminal state"""
        model = self._model()
        horde = self._new_horde()
        action_columns = [f"q_{name}" for name in self.env.action_names]
        rows = []
        for demon in horde.demons:
            if isinstance(demon.learner, ControlGavfLearner):
                v, q = value_iteration(model, demon.learner.gvf.cumulant, demon.learner.gvf.continuation)
            else:
                solution = solve_gvf(model, demon.spec)
                v, q = solution.v, solution.q
            for s in model.nonterminal_states():
                row = {'demon': demon.name, 'state': s, 'v': float(v[s])}
                row.update({col: float(q[s, a]) for a, col in enumerate(action_columns)})
                rows.append(row)
            logger.info(f"Oracle solved for demon '{demon.name}'")
        frame = pd.DataFrame(rows, columns=['demon', 'state', 'v'] + action_columns)
        write_csv(frame, self.output_path(self.config.output.oracle))
        return frame

    # -----------------------------------------------------------------------
    # Learning
    # -----------------------------------------------------------------------

    def _run_behavior(self, horde: Horde, steps: int, seed: int, on_step=None, desc: str = 'learn'):
        """
        Drive the environment with the behavior policy, broadcasting every
        transition to the horde. Only the first reset is seeded.
        """
        env = self.env
        behavior = horde.behavior
        rng = np.random.default_rng(self.builder.seed_for('behavior', seed))
        state = env.reset(seed)
        episode = 0
        for t in tqdm(range(steps), desc=desc, disable=self.quiet):
            action = behavior.sample(state, rng)
            result = env.step(action)
            transition = Transition.from_step(state, action, result, policy_prob(behavior, state, action))
            try:
                reports = horde.step(transition, parallel=self.config.run.parallel)
            except AffordanceError as e:
                logger.warning(f"Update failed at step {t + 1}: {e}", extra={'step': t + 1})
                raise
            if on_step is not None:
                on_step(t, episode, transition, reports)
            if result.terminal or result.truncated:
                state = env.reset()
                episode += 1
            else:
                state = result.next_state

    def train(self, horde: Horde, steps: Optional[int] = None, seed: Optional[int] = None) -> Horde:
        steps = self.config.run.steps if steps is None else steps
        self._run_behavior(horde, steps, self.seed if seed is None else seed, desc='train')
        return horde

    def run_learn(self) -> Tuple[pd.DataFrame, List[str]]:
        """Learn every demon from the behavior stream, write the RunLog and save the models"""
        horde = self._new_horde()
        probes = self.builder.probe_states()
        probe_states = [self.env.state_of(s) for s in probes]
        probe_columns = [f"probe_{s}" for s in probes]
        interval = self.config.run.log_interval
        rows = []

        def log_step(t, episode, transition, reports):
            if (t + 1) % interval:
                return
            for demon in horde.demons:
                demon_report = reports[demon.name]
                if not demon_report.ok:
                    continue
                report = demon_report.report
                row = {'step': t + 1, 'demon': demon.name}
                row.update({col: demon.learner.predict(st) for col, st in zip(probe_columns, probe_states)})
                row.update({
                    'delta': report.delta,
                    'rho': report.rho,
                    'rho_bar': report.rho_bar,
                    'ude': report.ude,
                    'episode': episode,
                    'cumulant_observed': report.cumulant,
                })
                rows.append(row)

        self._run_behavior(horde, self.config.run.steps, self.seed, on_step=log_step)
        columns = RUN_LOG_LEADING_COLUMNS + probe_columns + RUN_LOG_TRAILING_COLUMNS
        frame = pd.DataFrame(rows, columns=columns)
        write_csv(frame, self.output_path(self.config.output.run_log))

        paths = []
        for demon in horde.demons:
            path = model_path(self.model_dir, demon.name)
            demon.learner.vfa.save(path)
            paths.append(path)
        logger.info(f"Learning finished after {self.config.run.steps} steps", extra={'models': len(paths)})
        return frame, paths

    # -----------------------------------------------------------------------
    # Evaluation
    # -----------------------------------------------------------------------

    def load_models(self, horde: Horde, model_dir: Optional[str] = None) -> Horde:
        model_dir = model_dir or self.model_dir
        for demon in horde.demons:
            path = model_path(model_dir, demon.name)
            if not os.path.exists(path):
                raise ConfigurationError(f"No trained model for demon '{demon.name}' at {path}")
            demon.learner.load_weights(LinearVfa.load(path))
        return horde

    def _oracle_values(self, horde: Horde) -> Dict[str, np.ndarray]:
        try:
            model = self._model()
        except ModelNotAvailableError:
            return {}
        values = {}
        for demon in horde.demons:
            if isinstance(demon.learner, ControlGavfLearner):
                values[demon.name] = value_iteration(
                    model, demon.learner.gvf.cumulant, demon.learner.gvf.continuation
                )[0]
            else:
                values[demon.name] = solve_gvf(model, demon.spec).v
        return values

    def _eval_states(self) -> List[int]:
        probes = self.builder.probe_states()
        if probes:
            return probes
        return self._model().nonterminal_states()

    def run_eval(self, model_dir: Optional[str] = None) -> pd.DataFrame:
        """Predictions at the probe states against the oracle, with an L∞ row per demon"""
        horde = self.load_models(self._new_horde(), model_dir)
        states = self._eval_states()
        oracle = self._oracle_values(horde)
        rows = []
        for demon in horde.demons:
            errors = []
            for s in states:
                prediction = demon.learner.predict(self.env.state_of(s))
                reference = float(oracle[demon.name][s]) if demon.name in oracle else float('nan')
                error = abs(prediction - reference)
                errors.append(error)
                rows.append({'demon': demon.name, 'state': s, 'prediction': prediction,
                             'oracle': reference, 'abs_error': error})
            linf = max(errors, default=0.0)
            rows.append({'demon': demon.name, 'state': 'linf', 'prediction': float('nan'),
                         'oracle': float('nan'), 'abs_error': linf})
            logger.info(f"Demon '{demon.name}' L-inf error {linf:.3e}")
        frame = pd.DataFrame(rows, columns=['demon', 'state', 'prediction', 'oracle', 'abs_error'])
        write_csv(frame, self.output_path(self.config.output.evaluation))
        return frame

    # -----------------------------------------------------------------------
    # Demos
    # -----------------------------------------------------------------------

    def trained_horde(self) -> Horde:
        """Train in-process when the run has steps, otherwise load saved models"""
        horde = self._new_horde()
        if self.config.run.steps > 0:
            return self.train(horde)
        return self.load_models(horde)

    def run_demo(self, which: str) -> pd.DataFrame:
        runners = {
            'pavlovian': self._demo_pavlovian,
            'chain': self._demo_chain,
            'psr': self._demo_psr,
            'whatif': self._demo_whatif,
        }
        if which not in runners:
            raise ConfigurationError(f"Unknown demo '{which}', expected one of {list(DEMOS)}")
        if getattr(self.config.control, which) is None:
            raise ConfigurationError(f"control.{which}: block required for the '{which}' demo")
        frame = runners[which]()
        write_csv(frame, self.output_path(self.config.output.demo))
        return frame

    def _demo_pavlovian(self) -> pd.DataFrame:
        settings = self.config.control.pavlovian
        horde = self.trained_horde()
        rules = RuleSet(
            [
                PavlovianRule(
                    action=self.builder.action(rule.action, f"control.pavlovian.rules.{i}.action"),
                    conditions=tuple(Condition(c.demon, c.op, c.threshold) for c in rule.conditions),
                    priority=rule.priority,
                )
                for i, rule in enumerate(settings.rules)
            ],
            demon_names=horde.names,
            n_actions=self.env.n_actions,
        )

        env = self.env
        state = env.reset(self.builder.seed_for('pavlovian'))
        rows, episode, episode_steps, in_lane, total_in_lane = [], 0, 0, 0, 0
        for t in tqdm(range(settings.steps), desc='pavlovian', disable=self.quiet):
            result = env.step(rules.act(horde.predict_vector(state)))
            episode_steps += 1
            if not result.terminal:
                in_lane += 1
            last = t == settings.steps - 1
            if result.terminal or result.truncated or last:
                ended = 'terminal' if result.terminal else ('truncated' if result.truncated else 'budget')
                rows.append({'episode': episode, 'steps': episode_steps, 'in_lane_steps': in_lane,
                             'in_lane_fraction': in_lane / episode_steps, 'ended': ended})
                total_in_lane += in_lane
                episode, episode_steps, in_lane = episode + 1, 0, 0
                if not last:
                    state = env.reset()
            else:
                state = result.next_state

        rows.append({'episode': 'summary', 'steps': settings.steps, 'in_lane_steps': total_in_lane,
                     'in_lane_fraction': total_in_lane / settings.steps, 'ended': ''})
        logger.info(f"Pavlovian control kept the agent in lane for {total_in_lane}/{settings.steps} steps")
        return pd.DataFrame(rows, columns=['episode', 'steps', 'in_lane_steps', 'in_lane_fraction', 'ended'])

    def _train_find(self, task, settings) -> ControlGavfLearner:
        config = settings.find_learner.model_copy(update={'seed': self.builder.seed_for('find')})
        spec = task.to_gvf('find', self.env.n_actions)
        learner = ControlGavfLearner(spec, self.env.feature_dim, self.env.n_actions, config)
        horde = Horde(self.builder.behavior(), master_seed=self.seed, demons=[Demon(spec, learner)])
        self._run_behavior(horde, settings.find_steps, self.builder.seed_for('find-stream'), desc='find')
        return learner

    def _demo_chain(self) -> pd.DataFrame:
        settings = self.config.control.chain
        horde = self.trained_horde()
        initiation = LearnedInitiationSet(horde.demon(settings.success_demon).learner, settings.threshold)
        task = build_find_option(initiation, self.env, settings.find_gamma)
        if settings.comfort_demon:
            task = value_refined_find(horde.demon(settings.comfort_demon).learner, task, self.env)
        find = self._train_find(task, settings)

        plan = ChainPlan(
            find_policy=find.greedy_policy(),
            target=self.builder.options()[settings.target_option],
            initiation=task.in_target,
            success_signal=settings.success_signal,
        )
        rows = []
        for episode in tqdm(range(settings.episodes), desc='chain', disable=self.quiet):
            outcome = execute_chain(plan, self.env, settings.max_steps,
                                    seed=self.builder.seed_for(f'chain-{episode}'))
            rows.append({'episode': episode, 'reached': outcome.reached, 'success': outcome.success,
                         'find_steps': outcome.find_steps, 'option_steps': outcome.option_steps,
                         'reason': outcome.reason})
        frame = pd.DataFrame(rows)
        summary = {
            'episode': 'summary',
            'reached': float(frame['reached'].mean()),
            'success': float(frame['success'].mean()),
            'find_steps': float(frame['find_steps'].mean()),
            'option_steps': float(frame['option_steps'].mean()),
            'reason': f"target_states={len(task.target)}",
        }
        logger.info(f"Chain success rate {summary['success']:.3f} over {settings.episodes} episodes")
        columns = ['episode', 'reached', 'success', 'find_steps', 'option_steps', 'reason']
        return pd.DataFrame(rows + [summary], columns=columns)

    def _demo_psr(self) -> pd.DataFrame:
        settings = self.config.control.psr
        horde = self.trained_horde()
        columns = [horde.names.index(name) for name in settings.demons]
        agent = PsrAgent(
            self.env.n_actions,
            bins=settings.bins,
            low=settings.low,
            high=settings.high,
            step_size=settings.step_size,
            gamma=settings.gamma,
            epsilon=settings.epsilon,
            seed=self.builder.seed_for('psr-agent'),
        )
        if settings.reward_signal not in self.env.signal_names:
            raise ConfigurationError(f"control.psr.reward_signal: unknown signal '{settings.reward_signal}'")

        def upsilon(state):
            return horde.predict_vector(state).values[columns]

        env = self.env
        # Finite environments expose the true state to the Markov check
        observed = env.n_states is not None
        rows, stream = [], []
        state = env.reset(self.builder.seed_for('psr'))
        for episode in tqdm(range(settings.episodes), desc='psr', disable=self.quiet):
            if episode:
                state = env.reset()
            rewards = []
            for _ in range(settings.max_steps):
                u = upsilon(state)
                action = agent.act(u)
                result = env.step(action)
                u_next = upsilon(result.next_state)
                reward = float(result.signals[settings.reward_signal])
                agent.step(u, action, reward, u_next, terminal=result.terminal)
                stream.append(MarkovSample(
                    u, action, u_next,
                    observation=state.index if observed else None,
                    next_observation=result.next_state.index if observed else None,
                    episode=episode,
                ))
                rewards.append(reward)
                if result.terminal or result.truncated:
                    break
                state = result.next_state
            rows.append({'episode': episode, 'steps': len(rewards), 'return': float(sum(rewards)),
                         'optimal_return': float('nan'), 'markov_discrepancy': float('nan'),
                         'clamped': agent.clamped})

        greedy = self._greedy_psr_return(agent, upsilon, settings)
        optimal = float('nan')
        try:
            model = self._model()
            v_star, _ = value_iteration(model, SignalCumulant(settings.reward_signal),
                                        ConstantContinuation(settings.gamma))
            optimal = float(v_star[model.start_state])
        except ModelNotAvailableError:
            logger.info("No finite model; PSR demo reports no optimal return")
        markov = markov_diagnostic(stream, agent.discretize, settings.min_support, settings.noise_threshold)
        rows.append({'episode': 'summary', 'steps': len(stream), 'return': greedy, 'optimal_return': optimal,
                     'markov_discrepancy': markov.max_discrepancy, 'clamped': agent.clamped})
        logger.info(f"PSR greedy return {greedy:.6f}, optimum {optimal:.6f}, Markov TV {markov.max_discrepancy:.3f}")
        return pd.DataFrame(rows, columns=['episode', 'steps', 'return', 'optimal_return',
                                           'markov_discrepancy', 'clamped'])

    def _greedy_psr_return(self, agent: PsrAgent, upsilon, settings) -> float:
        """Discounted return of one greedy episode from the start state"""
        env = self.env
        state = env.reset(self.builder.seed_for('psr-greedy'))
        cumulants, continuations = [], []
        for _ in range(settings.max_steps):
            result = env.step(agent.greedy_action(upsilon(state)))
            cumulants.append(float(result.signals[settings.reward_signal]))
            continuations.append(0.0 if result.terminal else settings.gamma)
            if result.terminal or result.truncated:
                break
            state = result.next_state
        return trajectory_return(cumulants, continuations)

    def _demo_whatif(self) -> pd.DataFrame:
        settings = self.config.control.whatif
        horde = self.trained_horde()
        gavfs = {}
        for name in settings.weights:
            learner = horde.demon(name).learner
            if not learner.vfa.is_action_value:
                raise ConfigurationError(f"control.whatif.weights: demon '{name}' is not a GAVF")
            gavfs[name] = learner
        candidates = None
        if settings.candidates is not None:
            candidates = [self.builder.action(a, "control.whatif.candidates") for a in settings.candidates]

        states = list(settings.states)
        if states:
            self.builder.state_set(states, "control.whatif.states")
        oracle_q = None
        try:
            model = self._model()
            oracle_q = sum(weight * solve_gvf(model, horde.demon(name).spec).q
                           for name, weight in settings.weights.items())
            states = states or model.nonterminal_states()
        except ModelNotAvailableError:
            if not states:
                raise ConfigurationError("control.whatif.states: required when the environment has no finite model")

        action_names = self.env.action_names
        rows, agreements = [], []
        for s in states:
            choice = what_if_select(gavfs, settings.weights, self.env.state_of(s).features, candidates)
            row = {'state': s, 'action': choice.action}
            row.update({f"score_{action_names[a]}": score for a, score in choice.scores.items()})
            if oracle_q is not None:
                allowed = sorted(choice.scores)
                oracle_action = allowed[int(np.argmax(oracle_q[s, allowed]))]
                row.update({'oracle_action': oracle_action, 'agree': oracle_action == choice.action})
                agreements.append(oracle_action == choice.action)
            rows.append(row)
        summary = {'state': 'summary', 'agree': float(np.mean(agreements)) if agreements else float('nan')}
        return pd.DataFrame(rows + [summary])
