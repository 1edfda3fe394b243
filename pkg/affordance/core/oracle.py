# affordance/core/oracle.py
"""
Exact ground truth for GVF and GAVF questions on finite models.

Every routine here is a pure function of an immutable FiniteModel and a
question, so it is safe to call from several threads.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from affordance.config import Config
from affordance.constants import RESIDUAL_TOLERANCE
from affordance.core.returns import trajectory_probability
from affordance.envs.base import FiniteModel
from affordance.exceptions import InvalidArgumentError, NoSolutionError, ResourceLimitError
from affordance.models.gvf import (
    ConstantContinuation,
    ContinuationFn,
    CumulantFn,
    FeatureCumulant,
    GvfSpec,
    OptionSpec,
    Policy,
    UniformRandomPolicy,
    as_gvf,
    compose_continuation,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExactSolution:
    v: np.ndarray          # (S,)
    q: np.ndarray          # (S, A)
    residual: float


@dataclass(frozen=True)
class EnumerationResult:
    value: float
    tail_bound: float
    alive_mass: float
    horizon: int


@dataclass(frozen=True, eq=False)
class ReductionReport:
    passed: bool
    max_abs_diff: float
    values: np.ndarray
    reference: np.ndarray


@dataclass(frozen=True, eq=False)
class EvaluationTables:
    """c, γ and τ evaluated on every reachable (s, a, s') of a model."""
    cumulants: np.ndarray       # (S, A, S)
    continuations: np.ndarray   # (S, A, S)
    policy: np.ndarray          # (S, A); zero rows at terminal states

    @property
    def gamma_max(self) -> float:
        return float(self.continuations.max(initial=0.0))

    @property
    def cumulant_max(self) -> float:
        return float(np.abs(self.cumulants).max(initial=0.0))


def evaluation_tables(model: FiniteModel, gvf: GvfSpec) -> EvaluationTables:
    S, A = model.n_states, model.n_actions
    C = np.zeros((S, A, S))
    G = np.zeros((S, A, S))
    tau = np.zeros((S, A))
    for s in model.nonterminal_states():
        tau[s] = gvf.target_policy.probs(model.state(s))
        for a in range(A):
            for s_next in model.successors(s, a):
                transition = model.transition(s, a, s_next)
                C[s, a, s_next] = gvf.cumulant_at(transition)
                G[s, a, s_next] = gvf.continuation_at(transition)
    if not np.all(np.isfinite(C)):
        raise InvalidArgumentError(f"Cumulant of '{gvf.name}' is not finite on every transition")
    return EvaluationTables(C, G, tau)


def _one_step(model: FiniteModel, tables: EvaluationTables):
    """Expected immediate cumulant r(s,a) and discounted transition operator M(s,a,s')."""
    P = model.transitions
    r = np.einsum('ijk,ijk->ij', P, tables.cumulants)
    M = P * tables.continuations
    return r, M


def solve_gvf(model: FiniteModel, gvf: GvfSpec) -> ExactSolution:
    """
    Solve V(s) = Σ_a τ(a|s) Σ_s' p(s'|s,a)[c + γ(s')V(s')] by dense LU
    factorization; terminal states are pinned to 0. Q follows from V.
    """
    gvf = as_gvf(gvf)
    tables = evaluation_tables(model, gvf)
    return _solve_tables(model, tables, gvf.name)


def _solve_tables(model: FiniteModel, tables: EvaluationTables, name: str) -> ExactSolution:
    S = model.n_states
    r, M = _one_step(model, tables)
    r_tau = np.einsum('ij,ij->i', tables.policy, r)
    M_tau = np.einsum('ij,ijk->ik', tables.policy, M)
    system = np.eye(S) - M_tau

    lu, piv = linalg.lu_factor(system, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-12 * max(1.0, pivots.max()):
        raise NoSolutionError(f"'{name}': evaluation system is singular (continuation never terminates)")
    v = linalg.lu_solve((lu, piv), r_tau)
    if not np.all(np.isfinite(v)):
        raise NoSolutionError(f"'{name}': solution is not finite")

    q = r + np.einsum('ijk,k->ij', M, v)
    residual = float(np.max(np.abs(v - np.einsum('ij,ij->i', tables.policy, q)), initial=0.0))
    if residual > RESIDUAL_TOLERANCE:
        raise NoSolutionError(f"'{name}': Bellman residual {residual:.3e} above tolerance")
    logger.debug(f"Solved '{name}' over {S} states, residual {residual:.3e}")
    return ExactSolution(v=v, q=q, residual=residual)


def _propagate(model: FiniteModel, tables: EvaluationTables, starts: np.ndarray, horizon: int):
    """
    Push discounted probability mass forward for `horizon` steps.

    `starts` is a (B, S) matrix of start distributions. Returns the expected
    truncated return per row and the discounted mass still alive per row.
    Merging trajectories that meet in the same state is exact because the
    expected return is linear in the trajectory weights.
    """
    r, M = _one_step(model, tables)
    r_tau = np.einsum('ij,ij->i', tables.policy, r)
    M_tau = np.einsum('ij,ijk->ik', tables.policy, M)
    weights = starts.astype(float).copy()
    total = np.zeros(starts.shape[0])
    for _ in range(horizon):
        total += weights @ r_tau
        weights = weights @ M_tau
    return total, weights.sum(axis=1)


def enumerate_return(
    model: FiniteModel,
    gvf: GvfSpec,
    start_state: int,
    horizon: int,
    exhaustive: bool = False,
    node_limit: Optional[int] = None,
) -> EnumerationResult:
    """
    Expected return truncated at `horizon`, summed over all trajectories.

    Args:
        model: Finite model
        gvf: Question to evaluate
        start_state: State the trajectories start in
        horizon: Number of steps H >= 1
        exhaustive: Expand every trajectory explicitly instead of merging
        node_limit: Size guard for exhaustive expansion

    Returns:
        EnumerationResult with the value, the tail bound
        max|c|·γ_max^H/(1−γ_max) (infinite when γ_max = 1) and the
        discounted probability mass still alive after H steps
    """
    if horizon < 1:
        raise InvalidArgumentError(f"horizon must be >= 1, got {horizon}")
    if horizon > Config.ENUMERATION_MAX_HORIZON:
        raise ResourceLimitError(f"horizon {horizon} exceeds {Config.ENUMERATION_MAX_HORIZON}")
    if not 0 <= start_state < model.n_states:
        raise InvalidArgumentError(f"start_state {start_state} out of range")

    tables = evaluation_tables(model, as_gvf(gvf))
    if exhaustive:
        value, alive = _expand_tree(model, tables, start_state, horizon, node_limit or Config.ENUMERATION_NODE_LIMIT)
    else:
        starts = np.zeros((1, model.n_states))
        starts[0, start_state] = 1.0
        values, alive_rows = _propagate(model, tables, starts, horizon)
        value, alive = float(values[0]), float(alive_rows[0])

    gamma_max = tables.gamma_max
    if gamma_max < 1.0:
        tail = tables.cumulant_max * gamma_max ** horizon / (1.0 - gamma_max)
    else:
        tail = math.inf
    return EnumerationResult(value=value, tail_bound=tail, alive_mass=alive, horizon=horizon)


def _expand_tree(model: FiniteModel, tables: EvaluationTables, start: int, horizon: int, node_limit: int):
    """Depth-first expansion of every state-action path up to `horizon` steps."""
    P = model.transitions
    value = 0.0
    alive = 0.0
    nodes = 0
    # (state, depth, transition factors, policy factors, discount so far)
    stack = [(start, 0, [], [], 1.0)]
    while stack:
        s, depth, p_factors, pi_factors, discount = stack.pop()
        if depth == horizon:
            alive += trajectory_probability(p_factors, pi_factors) * discount
            continue
        for a in np.flatnonzero(tables.policy[s] > 0):
            for s_next in model.successors(s, a):
                nodes += 1
                if nodes > node_limit:
                    raise ResourceLimitError(f"Trajectory expansion exceeded {node_limit} nodes")
                p_path = p_factors + [P[s, a, s_next]]
                pi_path = pi_factors + [tables.policy[s, a]]
                prob = trajectory_probability(p_path, pi_path)
                value += prob * discount * tables.cumulants[s, a, s_next]
                next_discount = discount * tables.continuations[s, a, s_next]
                if next_discount > 0.0:
                    stack.append((int(s_next), depth + 1, p_path, pi_path, next_discount))
    return value, alive


def _expected_until_absorbed(model: FiniteModel, tables: EvaluationTables, max_horizon: int, chunk: int = 256):
    """Propagate from every state until the alive mass vanishes."""
    S = model.n_states
    starts = np.eye(S)
    r, M = _one_step(model, tables)
    r_tau = np.einsum('ij,ij->i', tables.policy, r)
    M_tau = np.einsum('ij,ijk->ik', tables.policy, M)
    weights = starts
    total = np.zeros(S)
    steps = 0
    while steps < max_horizon:
        for _ in range(chunk):
            total += weights @ r_tau
            weights = weights @ M_tau
        steps += chunk
        if weights.sum(axis=1).max(initial=0.0) < 1e-14:
            return total
    raise NoSolutionError(f"Trajectories do not terminate within {max_horizon} steps")


def verify_supervised_reduction(model: FiniteModel, option: OptionSpec, outcome_cumulant: CumulantFn) -> ReductionReport:
    """
    Check that an undiscounted (γ ≡ 1) GVF with a final-outcome cumulant
    predicts the expected terminal label, by comparing the linear solve
    against enumeration to absorption.
    """
    gvf = GvfSpec(
        name='supervised-outcome',
        cumulant=outcome_cumulant,
        target_policy=option.policy,
        continuation=compose_continuation(1.0, option.termination),
    )
    tables = evaluation_tables(model, gvf)
    labelled_midway = (tables.cumulants != 0.0) & (tables.continuations != 0.0)
    if np.any(labelled_midway & (model.transitions > 0)):
        raise InvalidArgumentError("Outcome cumulant must be zero on non-terminating transitions")

    solution = _solve_tables(model, tables, gvf.name)
    reference = _expected_until_absorbed(model, tables, Config.ENUMERATION_MAX_HORIZON)
    states = model.nonterminal_states()
    diff = float(np.max(np.abs(solution.v[states] - reference[states]), initial=0.0))
    return ReductionReport(
        passed=diff <= RESIDUAL_TOLERANCE,
        max_abs_diff=diff,
        values=solution.v,
        reference=reference,
    )


@dataclass(frozen=True, eq=False)
class NextStepReport:
    passed: bool
    v_diff: float
    q_diff: float
    v: np.ndarray
    q: np.ndarray


def verify_nextstep_reduction(model: FiniteModel, feature_index: int, policy: Policy) -> NextStepReport:
    """
    Check that a myopic (γ ≡ 0) GVF whose cumulant is feature j of the
    arrival state reproduces the transition model: Q(s,a) = Σ_s' p(s'|s,a)x_j(s')
    and V(s) = Σ_a τ(a|s) Q(s,a).
    """
    if not 0 <= feature_index < model.feature_dim:
        raise InvalidArgumentError(f"feature_index {feature_index} out of range")
    gvf = GvfSpec(
        name=f'next-step-{feature_index}',
        cumulant=FeatureCumulant(feature_index),
        target_policy=policy,
        continuation=ConstantContinuation(0.0),
    )
    solution = solve_gvf(model, gvf)
    states = model.nonterminal_states()
    expected_q = model.transitions @ model.features[:, feature_index]
    tau = np.stack([policy.probs(model.state(s)) for s in states])
    expected_v = np.einsum('ij,ij->i', tau, expected_q[states])
    q_diff = float(np.max(np.abs(solution.q[states] - expected_q[states]), initial=0.0))
    v_diff = float(np.max(np.abs(solution.v[states] - expected_v), initial=0.0))
    return NextStepReport(
        passed=max(q_diff, v_diff) <= 1e-12,
        v_diff=v_diff,
        q_diff=q_diff,
        v=solution.v,
        q=solution.q,
    )


def option_value(
    model: FiniteModel,
    option: OptionSpec,
    reward: CumulantFn,
    gamma_const: float,
    tol: float = 1e-13,
    max_iter: int = 100_000,
) -> np.ndarray:
    """
    Option value by iterating the β-weighted recursion
    Q_o(s) = E_τ[r + γ(1 − β(s')) Q_o(s')] directly from the termination
    function, independently of the composed-continuation solve.
    """
    if not 0.0 <= gamma_const <= 1.0:
        raise InvalidArgumentError(f"gamma_const must be in [0, 1], got {gamma_const}")
    S, A = model.n_states, model.n_actions
    P = model.transitions
    r_tau = np.zeros(S)
    M_tau = np.zeros((S, S))
    for s in model.nonterminal_states():
        tau = option.policy.probs(model.state(s))
        for a in np.flatnonzero(tau > 0):
            for s_next in model.successors(s, a):
                transition = model.transition(s, a, s_next)
                weight = tau[a] * P[s, a, s_next]
                r_tau[s] += weight * reward(transition)
                if not transition.terminal:
                    keep = 1.0 - option.termination(model.state(s_next))
                    M_tau[s, s_next] += weight * gamma_const * keep

    values = np.zeros(S)
    for _ in range(max_iter):
        updated = r_tau + M_tau @ values
        if np.max(np.abs(updated - values), initial=0.0) < tol:
            return updated
        values = updated
    raise NoSolutionError("Option value iteration did not converge")


def value_iteration(
    model: FiniteModel,
    cumulant: CumulantFn,
    continuation: ContinuationFn,
    tol: float = 1e-12,
    max_iter: int = 100_000,
):
    """
    Control oracle: Q*(s,a) = Σ_s' p(s'|s,a)[c + γ(s') max_a' Q*(s',a')].

    Returns:
        (v*, q*) with v* = max_a q*
    """
    A = model.n_actions
    probe = GvfSpec('control', cumulant, UniformRandomPolicy(A), continuation)
    tables = evaluation_tables(model, probe)
    r, M = _one_step(model, tables)
    terminal = model.terminal
    q = np.zeros((model.n_states, A))
    for _ in range(max_iter):
        v = q.max(axis=1)
        v[terminal] = 0.0
        updated = r + np.einsum('ijk,k->ij', M, v)
        updated[terminal] = 0.0
        if np.max(np.abs(updated - q), initial=0.0) < tol:
            v = updated.max(axis=1)
            v[terminal] = 0.0
            return v, updated
        q = updated
    raise NoSolutionError("Value iteration did not converge")
