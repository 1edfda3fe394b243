# affordance/core/returns.py
"""
Return arithmetic over recorded trajectories.
"""
from typing import Sequence

import numpy as np

from affordance.exceptions import InvalidArgumentError


def _as_matching_arrays(first: Sequence[float], second: Sequence[float], names):
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError(f"{names[0]} and {names[1]} must be 1-D sequences of equal length")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidArgumentError("Return inputs must be finite")
    return a, b


def trajectory_return(cumulants: Sequence[float], continuations: Sequence[float]) -> float:
    """
    Generalized return Σ_k (Π_{i<k} γ_{t+i+1}) c_{t+k+1}.

    Args:
        cumulants: c_{t+1}, ..., c_{t+K}
        continuations: γ(s_{t+1}), ..., γ(s_{t+K})

    Returns:
        The discounted sum; 0.0 for empty input
    """
    c, gamma = _as_matching_arrays(cumulants, continuations, ('cumulants', 'continuations'))
    if np.any(gamma < 0) or np.any(gamma > 1):
        raise InvalidArgumentError("Continuations must be in [0, 1]")
    # Backward recursion G = c + γ·G'; the last γ multiplies nothing
    total = 0.0
    for k in range(len(c) - 1, -1, -1):
        total = c[k] + (gamma[k] * total if k < len(c) - 1 else 0.0)
    return float(total)


def option_return(rewards: Sequence[float], betas: Sequence[float], gamma_const: float) -> float:
    """
    Option return Σ_k (Π_{i<k} (1 − β_{t+i+1})) γ^k r_{t+k+1}.

    Args:
        rewards: r_{t+1}, ..., r_{t+K}
        betas: β(s_{t+1}), ..., β(s_{t+K})
        gamma_const: Discount constant

    Returns:
        The option's discounted return
    """
    r, beta = _as_matching_arrays(rewards, betas, ('rewards', 'betas'))
    if np.any(beta < 0) or np.any(beta > 1):
        raise InvalidArgumentError("Termination probabilities must be in [0, 1]")
    if not 0.0 <= gamma_const <= 1.0:
        raise InvalidArgumentError(f"gamma_const must be in [0, 1], got {gamma_const}")
    total, weight = 0.0, 1.0
    for k in range(len(r)):
        total += weight * r[k]
        weight *= gamma_const * (1.0 - beta[k])
    return float(total)


def trajectory_probability(transition_probs: Sequence[float], policy_probs: Sequence[float]) -> float:
    """
    Probability of a state-action sequence, Π_k p(s_{k+1}|s_k,a_k)·π(a_k|s_k).

    Any relative error in the per-step factors compounds multiplicatively
    over the length of the sequence.
    """
    p, pi = _as_matching_arrays(transition_probs, policy_probs, ('transition_probs', 'policy_probs'))
    if np.any(p < 0) or np.any(p > 1) or np.any(pi < 0) or np.any(pi > 1):
        raise InvalidArgumentError("Probabilities must be in [0, 1]")
    return float(np.prod(p * pi))
