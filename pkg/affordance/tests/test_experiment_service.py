"""
End-to-end tests of the experiment service on the shipped configs:
oracle tables, learning runs, evaluation and the control demos.
"""
import json
import os

import numpy as np
import pandas as pd
import pytest

from affordance.constants import FIXTURES_DIR
from affordance.constants.gvf_constants import LANE_DEMO_GAMMAS
from affordance.core.oracle import solve_gvf
from affordance.core.vfa import LinearVfa
from affordance.exceptions import ConfigurationError
from affordance.services.experiment import ExperimentService, load_experiment
from affordance.utils.helpers import model_path


def fixture(name):
    return os.path.join(FIXTURES_DIR, name)


def make_service(name, out, **run_updates):
    config = load_experiment(fixture(f"{name}.json"), out=str(out))
    if run_updates:
        config = config.model_copy(update={'run': config.run.model_copy(update=run_updates)})
    return ExperimentService(config, quiet=True)


def summary(frame):
    return frame[frame.iloc[:, 0].astype(str) == 'summary'].iloc[0]


def linf(frame):
    rows = frame[frame['state'].astype(str) == 'linf']
    return dict(zip(rows['demon'], rows['abs_error'].astype(float)))


class TestOracle:

    @pytest.mark.parametrize('name', ['chain-td', 'chain-offpolicy', 'grid-supervised', 'grid-chain', 'lane-horde'])
    def test_matches_reference_table(self, name, tmp_path):
        frame = make_service(name, tmp_path).run_oracle()
        reference = pd.read_csv(fixture(f"{name}.oracle.csv"))
        assert list(frame.columns) == list(reference.columns)
        assert list(frame['demon']) == list(reference['demon'])
        numeric = reference.columns[1:]
        np.testing.assert_allclose(
            frame[numeric].to_numpy(float), reference[numeric].to_numpy(float), rtol=1e-10, atol=1e-12,
        )

    def test_writes_csv(self, tmp_path):
        make_service('chain-td', tmp_path).run_oracle()
        written = pd.read_csv(os.path.join(tmp_path, 'oracle.csv'))
        assert written['v'].iloc[0] == pytest.approx(4.0951, abs=1e-12)

    def test_lane_model(self, tmp_path):
        frame = make_service('lane-horde', tmp_path).run_oracle()
        assert frame['demon'].nunique() == 8
        assert len(frame) == 8 * 20
        assert list(frame.columns[-3:]) == ['q_steer-', 'q_steer0', 'q_steer+']

    def test_lane_horizons(self, tmp_path):
        service = make_service('lane-horde', tmp_path)
        gammas = sorted({demon.continuation.gamma for demon in service.config.demons})
        assert gammas == LANE_DEMO_GAMMAS


class TestLearn:

    def test_on_policy_td(self, tmp_path):
        frame, paths = make_service('chain-td', tmp_path).run_learn()
        assert list(frame.columns) == [
            'step', 'demon', 'probe_2', 'probe_3', 'probe_4',
            'delta', 'rho', 'rho_bar', 'ude', 'episode', 'cumulant_observed',
        ]
        assert len(frame) == 2000 // 10
        last = frame.iloc[-1]
        assert last['step'] == 2000
        np.testing.assert_allclose(last[['probe_2', 'probe_3', 'probe_4']].to_numpy(float), [2.71, 1.9, 1.0], atol=1e-3)
        assert paths == [model_path(os.path.join(tmp_path, 'models'), 'steps-right')]
        assert os.path.exists(paths[0])

    def test_runlog_written(self, tmp_path):
        make_service('chain-td', tmp_path, steps=100).run_learn()
        written = pd.read_csv(os.path.join(tmp_path, 'runlog.csv'))
        assert len(written) == 10
        assert (written['rho'] == 1.0).all()

    def test_zero_steps(self, tmp_path):
        frame, paths = make_service('chain-td', tmp_path, steps=0).run_learn()
        assert frame.empty
        with open(os.path.join(tmp_path, 'runlog.csv')) as f:
            assert f.read() == 'step,demon,probe_2,probe_3,probe_4,delta,rho,rho_bar,ude,episode,cumulant_observed\n'
        assert not LinearVfa.load(paths[0]).weights.any()

    def test_same_seed_same_bytes(self, tmp_path):
        outputs = []
        for run in ('a', 'b'):
            out = os.path.join(tmp_path, run)
            make_service('chain-offpolicy', out, steps=400).run_learn()
            with open(os.path.join(out, 'runlog.csv'), 'rb') as f:
                runlog = f.read()
            with open(model_path(os.path.join(out, 'models'), 'goal-resampled'), 'rb') as f:
                outputs.append((runlog, f.read()))
        assert outputs[0] == outputs[1]

    def test_seed_changes_stream(self, tmp_path):
        first, _ = make_service('chain-offpolicy', os.path.join(tmp_path, 'a'), steps=400, seed=1).run_learn()
        second, _ = make_service('chain-offpolicy', os.path.join(tmp_path, 'b'), steps=400, seed=2).run_learn()
        assert not first.equals(second)

    def test_off_policy_demons_reach_oracle(self, tmp_path):
        service = make_service('chain-offpolicy', tmp_path)
        service.run_learn()
        errors = linf(service.run_eval())
        assert set(errors) == {'goal-is', 'goal-resampled', 'goal-gavf', 'cost-gavf'}
        for demon, error in errors.items():
            assert error <= 0.01, demon

    def test_supervised_success_probability(self, tmp_path):
        service = make_service('grid-supervised', tmp_path)
        service.run_learn()
        assert linf(service.run_eval())['success-mc'] <= 0.08


class TestEvaluate:

    def test_oracle_weights_have_no_error(self, tmp_path):
        service = make_service('chain-td', tmp_path, steps=0)
        model = service.env.model()
        spec = service.builder.horde().demon('steps-right').spec
        vfa = LinearVfa(model.feature_dim, name='steps-right')
        vfa.set_weights(solve_gvf(model, spec).v)
        vfa.save(model_path(service.model_dir, 'steps-right'))

        frame = service.run_eval()
        assert linf(frame)['steps-right'] == pytest.approx(0.0, abs=1e-12)
        assert list(frame.columns) == ['demon', 'state', 'prediction', 'oracle', 'abs_error']

    def test_zero_model_error_is_oracle_magnitude(self, tmp_path):
        service = make_service('chain-td', tmp_path, steps=0)
        service.run_learn()
        frame = service.run_eval()
        assert linf(frame)['steps-right'] == pytest.approx(2.71)
        assert os.path.exists(os.path.join(tmp_path, 'evaluation.csv'))

    def test_models_from_other_directory(self, tmp_path):
        trained = make_service('chain-td', os.path.join(tmp_path, 'train'))
        trained.run_learn()
        fresh = make_service('chain-td', os.path.join(tmp_path, 'eval'), steps=0)
        assert linf(fresh.run_eval(trained.model_dir))['steps-right'] <= 1e-3

    def test_missing_model(self, tmp_path):
        with pytest.raises(ConfigurationError, match="No trained model"):
            make_service('chain-td', tmp_path, steps=0).run_eval()

    def test_model_shape_mismatch(self, tmp_path):
        service = make_service('chain-td', tmp_path, steps=0)
        LinearVfa(3).save(model_path(service.model_dir, 'steps-right'))
        with pytest.raises(ConfigurationError, match="expected dim=7"):
            service.run_eval()


class TestDemos:

    def test_pavlovian_keeps_lane(self, tmp_path):
        frame = make_service('lane-pavlovian', tmp_path).run_demo('pavlovian')
        assert float(summary(frame)['in_lane_fraction']) >= 0.95
        assert os.path.exists(os.path.join(tmp_path, 'demo.csv'))

    def test_psr_reaches_optimum(self, tmp_path):
        frame = make_service('chain-psr', tmp_path).run_demo('psr')
        row = summary(frame)
        assert float(row['optimal_return']) == pytest.approx(0.81)
        assert float(row['return']) == pytest.approx(float(row['optimal_return']))
        assert int(row['clamped']) >= 0

    def test_psr_flags_aliased_predictions(self, tmp_path):
        # A constant-zero demon maps every chain state to the same prediction
        with open(fixture('chain-psr.json'), encoding='utf-8') as f:
            data = json.load(f)
        data['demons'][0]['cumulant'] = {'kind': 'constant', 'value': 0.0}
        path = tmp_path / 'aliased.json'
        path.write_text(json.dumps(data), encoding='utf-8')
        config = load_experiment(str(path), out=str(tmp_path / 'out'))

        row = summary(ExperimentService(config, quiet=True).run_demo('psr'))
        assert float(row['markov_discrepancy']) > config.control.psr.noise_threshold

    def test_whatif_agrees_with_oracle(self, tmp_path):
        frame = make_service('chain-offpolicy', tmp_path).run_demo('whatif')
        assert float(summary(frame)['agree']) == 1.0
        per_state = frame[frame['state'].astype(str) != 'summary']
        assert list(per_state['action'].astype(int)) == [1] * 5

    def test_chain_of_options(self, tmp_path):
        frame = make_service('grid-chain', tmp_path).run_demo('chain')
        row = summary(frame)
        assert float(row['reached']) >= 0.9
        assert float(row['success']) >= 0.9
        assert row['reason'].startswith('target_states=')

    def test_missing_control_block(self, tmp_path):
        with pytest.raises(ConfigurationError, match="control.pavlovian"):
            make_service('chain-td', tmp_path).run_demo('pavlovian')

    def test_unknown_demo(self, tmp_path):
        with pytest.raises(ConfigurationError, match="Unknown demo"):
            make_service('chain-td', tmp_path).run_demo('dance')

    def test_demo_uses_saved_models_without_steps(self, tmp_path):
        make_service('chain-offpolicy', tmp_path).run_learn()
        frame = make_service('chain-offpolicy', tmp_path, steps=0).run_demo('whatif')
        assert isinstance(frame, pd.DataFrame)
        assert float(summary(frame)['agree']) == 1.0
