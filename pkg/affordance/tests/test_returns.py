"""
Tests for generalized, option and trajectory-probability returns.
"""
import math

import numpy as np
import pytest

from affordance.core.returns import option_return, trajectory_probability, trajectory_return
from affordance.exceptions import InvalidArgumentError


class TestTrajectoryReturn:
    """Generalized return with state-dependent continuation"""

    def test_constant_discount(self):
        assert trajectory_return([1, 1, 1], [0.9, 0.9, 0.9]) == pytest.approx(2.71)

    def test_terminal_continuation_cuts_the_sum(self):
        assert trajectory_return([1, 5, 7], [0.0, 0.9, 0.9]) == pytest.approx(1.0)

    def test_state_dependent_continuation(self):
        # 1 + 0.5*2 + 0.5*0.25*4
        assert trajectory_return([1, 2, 4], [0.5, 0.25, 1.0]) == pytest.approx(2.5)

    def test_last_continuation_is_ignored(self):
        assert trajectory_return([3.0], [1.0]) == trajectory_return([3.0], [0.0]) == 3.0

    def test_empty_is_zero(self):
        assert trajectory_return([], []) == 0.0

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(InvalidArgumentError):
            trajectory_return([1, 2], [0.9])

    def test_rejects_out_of_range_continuation(self):
        with pytest.raises(InvalidArgumentError, match="Continuations"):
            trajectory_return([1, 2], [1.5, 0.5])


class TestOptionReturn:

    def test_matches_composed_continuation(self):
        rewards, betas = [1.0, 2.0, 3.0], [0.0, 0.5, 1.0]
        expected = trajectory_return(rewards, [0.9 * (1 - b) for b in betas])
        assert option_return(rewards, betas, 0.9) == pytest.approx(expected)

    def test_random_sequences_match_composed_continuation(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            length = int(rng.integers(0, 51))
            rewards = rng.uniform(-1.0, 1.0, length)
            betas = rng.uniform(0.0, 1.0, length)
            gamma = float(rng.uniform(0.0, 1.0))
            expected = trajectory_return(rewards, gamma * (1.0 - betas))
            assert abs(option_return(rewards, betas, gamma) - expected) <= 1e-12

    def test_immediate_termination(self):
        assert option_return([4.0, 10.0], [1.0, 0.0], 0.99) == pytest.approx(4.0)

    def test_rejects_bad_gamma(self):
        with pytest.raises(InvalidArgumentError, match="gamma_const"):
            option_return([1.0], [0.0], 1.2)

    def test_rejects_bad_beta(self):
        with pytest.raises(InvalidArgumentError):
            option_return([1.0, 1.0], [0.0, -0.1], 0.9)


class TestTrajectoryProbability:

    def test_product_of_factors(self):
        assert trajectory_probability([1.0, 0.5], [0.5, 0.5]) == pytest.approx(0.125)

    def test_relative_error_compounds_over_length(self):
        K, eps = 20, 1e-3
        exact = trajectory_probability([0.9] * K, [0.5] * K)
        perturbed = trajectory_probability([0.9 * (1 + eps)] * K, [0.5 * (1 + eps)] * K)
        assert perturbed / exact == pytest.approx((1 + eps) ** (2 * K), rel=1e-12)
        assert perturbed / exact - 1 > 2 * K * eps

    def test_rejects_probability_above_one(self):
        with pytest.raises(InvalidArgumentError):
            trajectory_probability([1.2], [0.5])

    def test_empty_path_has_probability_one(self):
        assert math.isclose(trajectory_probability([], []), 1.0)
