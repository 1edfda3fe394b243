"""
Tests for experiment config loading, schema validation and the builder
that resolves a config against its environment.
"""
import copy
import glob
import json
import os

import pytest

from affordance.constants import FIXTURES_DIR
from affordance.exceptions import ConfigurationError
from affordance.models.gvf import AffordanceSpec, GvfSpec
from affordance.services.builder import ExperimentBuilder
from affordance.services.experiment import load_experiment

BASE = {
    "schema_version": 1,
    "environment": {"type": "chain", "n": 5},
    "cumulants": {"goal": {"kind": "signal", "signal": "goal"}},
    "options": {
        "right": {
            "policy": {"kind": "fixed-action", "action": "right"},
            "termination": {"kind": "state-set", "states": [4]},
        }
    },
    "demons": [
        {
            "name": "goal-right",
            "cumulant": "goal",
            "target_policy": {"kind": "fixed-action", "action": "right"},
            "continuation": {"kind": "constant", "gamma": 0.9},
            "learner": {"algorithm": "is", "step_size": 0.1},
        },
        {
            "name": "reach",
            "cumulant": {"kind": "signal", "signal": "step_cost"},
            "option": "right",
            "gamma": 0.9,
            "learner": {"algorithm": "gavf"},
        },
    ],
    "run": {"steps": 10, "seed": 1, "probe_states": [0, 2]},
}


def config_with(**changes):
    data = copy.deepcopy(BASE)
    data.update(changes)
    return data


@pytest.fixture
def write_config(tmp_path):
    def write(data, name='experiment.json'):
        path = os.path.join(tmp_path, name)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f)
        return path
    return write


class TestLoadExperiment:

    @pytest.mark.parametrize('path', sorted(glob.glob(os.path.join(FIXTURES_DIR, '*.json'))),
                             ids=os.path.basename)
    def test_shipped_configs_are_valid(self, path):
        config = load_experiment(path)
        ExperimentBuilder(config).horde()

    def test_overrides(self, write_config):
        config = load_experiment(write_config(BASE), seed=99, out='elsewhere')
        assert config.run.seed == 99
        assert config.output.dir == 'elsewhere'
        assert config.run.steps == 10

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="Cannot read config"):
            load_experiment(os.path.join(tmp_path, 'absent.json'))

    def test_invalid_json(self, tmp_path):
        path = os.path.join(tmp_path, 'broken.json')
        with open(path, 'w') as f:
            f.write('{"environment": ')
        with pytest.raises(ConfigurationError, match="invalid JSON"):
            load_experiment(path)

    def test_unknown_key(self, write_config):
        data = config_with(environment={"type": "chain", "n": 5, "bogus": 1})
        with pytest.raises(ConfigurationError) as excinfo:
            load_experiment(write_config(data))
        assert 'environment.chain.bogus' in str(excinfo.value)
        assert 'Extra inputs are not permitted' in str(excinfo.value)

    def test_gamma_out_of_range(self, write_config):
        data = config_with()
        data['demons'][0]['continuation']['gamma'] = 1.5
        with pytest.raises(ConfigurationError, match=r"demons\.0\.continuation"):
            load_experiment(write_config(data))

    def test_unknown_demon_in_control(self, write_config):
        data = config_with(control={"whatif": {"weights": {"nobody": 1.0}}})
        with pytest.raises(ConfigurationError, match=r"control\.whatif\.weights: unknown demons \['nobody'\]"):
            load_experiment(write_config(data))

    def test_duplicate_demon_names(self, write_config):
        data = config_with()
        data['demons'][1]['name'] = 'goal-right'
        with pytest.raises(ConfigurationError, match="duplicate names"):
            load_experiment(write_config(data))

    def test_demon_name_must_be_file_safe(self, write_config):
        data = config_with()
        data['demons'][0]['name'] = '../escape'
        with pytest.raises(ConfigurationError, match=r"demons\.0\.name"):
            load_experiment(write_config(data))

    def test_both_question_forms(self, write_config):
        data = config_with()
        data['demons'][0]['option'] = 'right'
        with pytest.raises(ConfigurationError, match="use either"):
            load_experiment(write_config(data))

    def test_unknown_named_cumulant(self, write_config):
        data = config_with()
        data['demons'][0]['cumulant'] = 'reward'
        with pytest.raises(ConfigurationError, match=r"demons\.0\.cumulant: unknown cumulant 'reward'"):
            load_experiment(write_config(data))

    def test_unsupported_schema_version(self, write_config):
        with pytest.raises(ConfigurationError, match="schema_version"):
            load_experiment(write_config(config_with(schema_version=2)))

    def test_chain_needs_known_option(self, write_config):
        data = config_with(control={"chain": {"target_option": "sit", "success_demon": "goal-right"}})
        with pytest.raises(ConfigurationError, match="unknown option 'sit'"):
            load_experiment(write_config(data))

    def test_minibatch_larger_than_buffer(self, write_config):
        data = config_with()
        data['demons'][0]['learner'] = {"algorithm": "resampled", "buffer_capacity": 4, "minibatch_size": 8}
        with pytest.raises(ConfigurationError, match="buffer_capacity"):
            load_experiment(write_config(data))


class TestBuilder:

    def builder(self, write_config, data=None):
        return ExperimentBuilder(load_experiment(write_config(data or BASE)))

    def test_actions_resolve_by_name_or_index(self, write_config):
        builder = self.builder(write_config)
        assert builder.action('right', 'x') == 1
        assert builder.action(0, 'x') == 0

    def test_unknown_action(self, write_config):
        with pytest.raises(ConfigurationError, match="behavior.action: unknown action 'up'"):
            self.builder(write_config, config_with(behavior={"kind": "fixed-action", "action": "up"})).behavior()

    def test_horde_keeps_declaration_order(self, write_config):
        horde = self.builder(write_config).horde()
        assert horde.names == ('goal-right', 'reach')
        assert isinstance(horde.demon('goal-right').spec, GvfSpec)
        assert isinstance(horde.demon('reach').spec, AffordanceSpec)
        assert horde.demon('reach').learner.vfa.is_action_value

    def test_unknown_signal(self, write_config):
        data = config_with()
        data['demons'][0]['cumulant'] = {"kind": "signal", "signal": "reward"}
        with pytest.raises(ConfigurationError, match=r"demons\.0\.cumulant\.signal: unknown signal 'reward'"):
            self.builder(write_config, data).horde()

    def test_state_out_of_range(self, write_config):
        data = config_with()
        data['options']['right']['termination']['states'] = [99]
        with pytest.raises(ConfigurationError, match=r"options\.right\.termination\.states: states \[99\]"):
            self.builder(write_config, data).horde()

    def test_table_length(self, write_config):
        data = config_with()
        data['demons'][0]['continuation'] = {"kind": "table", "table": [0.9, 0.9]}
        with pytest.raises(ConfigurationError, match="one entry per state"):
            self.builder(write_config, data).horde()

    def test_probe_states_checked(self, write_config):
        data = config_with(run={"probe_states": [7]})
        with pytest.raises(ConfigurationError, match="run.probe_states"):
            self.builder(write_config, data).probe_states()

    def test_bad_environment(self, write_config):
        data = config_with(environment={"type": "grid", "width": 2, "height": 2, "start": [0, 0], "goals": [[0, 0]]})
        with pytest.raises(ConfigurationError, match="terminal"):
            self.builder(write_config, data)

    def test_seeds_are_derived_per_purpose(self, write_config):
        builder = self.builder(write_config)
        assert builder.seed_for('behavior') != builder.seed_for('psr')
        assert builder.seed_for('behavior') == builder.seed_for('behavior', 1)
