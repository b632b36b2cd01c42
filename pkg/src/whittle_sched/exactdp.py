"""Exact dynamic programming on small instances.

Two joint-chain formulations are implemented. The production chain keeps ages
truncated at tau and charges an indicator penalty whenever a client sits at
tau. The untruncated chain lets ages run past tau on an enlarged grid and
charges the age excess only when a delivery closes it out; it exists to verify
that truncating is harmless: shifting one coordinate above tau shifts the
value function by exactly that excess and leaves optimal actions unchanged.

Everything here enumerates the full joint state space, so instances are capped
and large fleets belong in the simulator instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import ClientClass, ClientStream, Scenario, client_layout
from .bandit import ThresholdPolicy

JointState = Tuple[int, ...]

DEFAULT_STATE_ACTION_CAP = 2_000_000
DEFAULT_SPAN_TOL = 1e-9
DEFAULT_MAX_ITERATIONS = 10 ** 6
# Self-loop weight of the aperiodicity transform used by value iteration.
# Leaves the average cost and argmin sets untouched; scales the bias by
# 1/(1-damping), which is undone before reporting.
RVI_DAMPING = 0.5


class StateSpaceCapError(RuntimeError):
    """Joint instance too large to enumerate; use the simulator instead."""


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, span_residual: float):
        super().__init__(
            f"value iteration span {span_residual:.3e} after {iterations} iterations"
        )
        self.iterations = iterations
        self.span_residual = span_residual


@dataclass(frozen=True)
class JointAction:
    """Set of clients scheduled this slot; at most L of them."""

    active: Tuple[int, ...]


# ======================================================================
# Client expansion and the shared DP engine
# ======================================================================

@dataclass(eq=False)
class _Clients:
    ps: np.ndarray
    taus: np.ndarray
    energies: np.ndarray
    eta: float
    budget: int
    n: int


def _expand(scenario: Scenario) -> _Clients:
    class_of, _ = client_layout(scenario)
    ps = np.array([scenario.classes[k].p for k in class_of], dtype=np.float64)
    taus = np.array([scenario.classes[k].tau for k in class_of], dtype=np.int64)
    energies = np.array([scenario.classes[k].energy for k in class_of], dtype=np.float64)
    return _Clients(
        ps=ps, taus=taus, energies=energies,
        eta=scenario.eta, budget=scenario.slots_per_step, n=len(class_of),
    )


def _enumerate_actions(n: int, budget: int) -> Tuple[Tuple[int, ...], ...]:
    """All subsets of clients with size <= budget, by size then lexicographic."""
    out: List[Tuple[int, ...]] = []
    for r in range(min(budget, n) + 1):
        out.extend(itertools.combinations(range(n), r))
    return tuple(out)


class _JointDP:
    """Vectorized Bellman sweeps over an enumerated joint age grid.

    bounds[i] is the largest age stored for client i; an advance saturates
    there. With bounds == taus this is the truncated chain. With larger
    bounds it hosts the untruncated recursion: values within T steps of the
    grid edge absorb saturation error, so callers read only states at least
    horizon steps below the edge.
    """

    def __init__(self, clients: _Clients, bounds: np.ndarray,
                 cap: int = DEFAULT_STATE_ACTION_CAP):
        self.cl = clients
        self.bounds = np.asarray(bounds, dtype=np.int64)
        sizes = self.bounds + 1
        # Count in Python ints before materializing anything: the product and
        # the subset count overflow or exhaust memory long before the arrays
        # would for large instances.
        n_states = 1
        for s in sizes:
            n_states *= int(s)
        n_actions = sum(
            math.comb(clients.n, r) for r in range(min(clients.budget, clients.n) + 1)
        )
        if n_states * n_actions > cap:
            raise StateSpaceCapError(
                f"{n_states} states x {n_actions} actions exceeds cap {cap}; "
                "use the Monte Carlo simulator for instances of this size"
            )
        self.actions = _enumerate_actions(clients.n, clients.budget)
        self.sizes = sizes
        self.n_states = n_states
        self.states = np.stack(
            np.unravel_index(np.arange(n_states), sizes), axis=1
        ).astype(np.int64)
        strides = np.ones(clients.n, dtype=np.int64)
        for i in range(clients.n - 2, -1, -1):
            strides[i] = strides[i + 1] * sizes[i + 1]
        self.strides = strides

        advanced = np.minimum(self.states + 1, self.bounds[None, :])
        # Index contribution of client i after an unsuccessful slot; a
        # delivery zeroes it, so outcome indices are subtractions.
        self.adv_contrib = advanced * strides[None, :]
        self.adv_index = self.adv_contrib.sum(axis=1)

        # Per action: energy cost and the success-pattern outcome table.
        self.energy_cost = np.array(
            [clients.eta * clients.energies[list(a)].sum() for a in self.actions]
        )
        self.outcomes: List[List[Tuple[float, np.ndarray]]] = []
        total_vecs = 0
        for a in self.actions:
            rows: List[Tuple[float, np.ndarray]] = []
            for pattern in itertools.product((False, True), repeat=len(a)):
                prob = 1.0
                cols = []
                for ok, i in zip(pattern, a):
                    prob *= self.cl.ps[i] if ok else 1.0 - self.cl.ps[i]
                    if ok:
                        cols.append(i)
                if prob == 0.0:
                    continue
                nxt = self.adv_index - self.adv_contrib[:, cols].sum(axis=1)
                rows.append((prob, nxt))
                total_vecs += 1
            if total_vecs * self.n_states > 8 * cap:
                raise StateSpaceCapError(
                    "outcome table too large to precompute; shrink the instance"
                )
            self.outcomes.append(rows)

    def encode(self, ages: Sequence[int]) -> int:
        ages = np.asarray(ages, dtype=np.int64)
        if ages.shape != (self.cl.n,) or np.any(ages < 0) or np.any(ages > self.bounds):
            raise ValueError(f"ages {ages!r} outside the joint grid")
        return int((ages * self.strides).sum())

    def decode(self, idx: int) -> JointState:
        return tuple(int(v) for v in self.states[idx])

    def q_sweep(self, values: np.ndarray, stage_cost: np.ndarray,
                damping: float = 0.0) -> np.ndarray:
        """One backup: Q[a, s] = cost[a, s] + E[values at successors]."""
        q = np.empty((len(self.actions), self.n_states))
        for ai, rows in enumerate(self.outcomes):
            ev = np.zeros(self.n_states)
            for prob, nxt in rows:
                ev += prob * values[nxt]
            if damping:
                ev = damping * values + (1.0 - damping) * ev
            q[ai] = stage_cost[ai] + ev
        return q


def _truncated_stage_cost(dp: _JointDP) -> np.ndarray:
    """cost[a, s] for the truncated chain: late indicator plus energy."""
    late = (dp.states == dp.cl.taus[None, :]).sum(axis=1).astype(np.float64)
    return dp.energy_cost[:, None] + late[None, :]


def _untruncated_stage_cost(dp: _JointDP) -> np.ndarray:
    """cost[a, s] for the untruncated chain.

    The age excess (x_i + 1 - tau_i)^+ is charged when a delivery closes the
    period, i.e. with probability p_i for each scheduled client.
    """
    excess = np.maximum(dp.states + 1 - dp.cl.taus[None, :], 0).astype(np.float64)
    cost = np.empty((len(dp.actions), dp.n_states))
    for ai, a in enumerate(dp.actions):
        charge = np.zeros(dp.n_states)
        for i in a:
            charge += dp.cl.ps[i] * excess[:, i]
        cost[ai] = dp.energy_cost[ai] + charge
    return cost


# ======================================================================
# Public single-step pieces
# ======================================================================

def kernel_step(client_class: ClientClass, age: int, active: bool,
                rng: Optional[ClientStream] = None):
    """One slot of a single client's truncated age chain.

    With a stream, samples and returns (next_age, delivered). Without one,
    returns the full outcome distribution as (next_age, probability,
    delivered) triples.
    """
    tau = client_class.tau
    if not 0 <= age <= tau:
        raise ValueError(f"age {age} outside [0, {tau}]")
    advanced = min(age + 1, tau)
    if rng is not None:
        delivered = bool(active) and rng.uniform() < client_class.p
        return (0 if delivered else advanced), delivered
    if not active:
        return ((advanced, 1.0, False),)
    p = client_class.p
    outcomes = []
    if p > 0.0:
        outcomes.append((0, p, True))
    if p < 1.0:
        outcomes.append((advanced, 1.0 - p, False))
    return tuple(outcomes)


def per_slot_cost(scenario: Scenario, ages: Sequence[int],
                  active_set: Iterable[int]) -> float:
    """Lateness indicators plus weighted energy for one slot."""
    cl = _expand(scenario)
    active = sorted(set(int(i) for i in active_set))
    if len(active) > cl.budget:
        raise ValueError(f"active set of size {len(active)} exceeds budget {cl.budget}")
    ages = np.asarray(ages, dtype=np.int64)
    if ages.shape != (cl.n,) or np.any(ages < 0) or np.any(ages > cl.taus):
        raise ValueError("ages outside [0, tau]")
    late = float((ages == cl.taus).sum())
    energy = float(cl.energies[active].sum()) if active else 0.0
    return late + cl.eta * energy


# ======================================================================
# Finite horizon
# ======================================================================

@dataclass(eq=False)
class FiniteHorizonDP:
    horizon: int
    bounds: np.ndarray
    actions: Tuple[Tuple[int, ...], ...]
    values: np.ndarray
    q_values: np.ndarray
    _dp: _JointDP

    def value_of(self, ages: Sequence[int]) -> float:
        return float(self.values[self._dp.encode(ages)])

    def optimal_actions(self, ages: Sequence[int], tol: float = 1e-12) -> Tuple[JointAction, ...]:
        """Every action within tol of the best first-step backup at ``ages``."""
        q = self.q_values[:, self._dp.encode(ages)]
        best = q.min()
        cut = best + tol * max(1.0, abs(best))
        return tuple(JointAction(self.actions[ai]) for ai in np.flatnonzero(q <= cut))


def finite_horizon_dp(scenario: Scenario, horizon: int,
                      cap: int = DEFAULT_STATE_ACTION_CAP) -> FiniteHorizonDP:
    """T-step minimal expected cost of the truncated joint chain.

    Terminal values are zero; each stage charges the per-slot cost of the
    pre-transition state. horizon == 0 returns the terminal table.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    cl = _expand(scenario)
    dp = _JointDP(cl, bounds=cl.taus, cap=cap)
    cost = _truncated_stage_cost(dp)
    values = np.zeros(dp.n_states)
    q = np.zeros((len(dp.actions), dp.n_states))
    for _ in range(horizon):
        q = dp.q_sweep(values, cost)
        values = q.min(axis=0)
    return FiniteHorizonDP(
        horizon=horizon, bounds=dp.bounds.copy(), actions=dp.actions,
        values=values, q_values=q, _dp=dp,
    )


# ======================================================================
# Truncation equivalence
# ======================================================================

@dataclass(eq=False)
class TruncationCheckResult:
    ok: bool
    horizon: int
    extension: int
    checked_states: int
    max_identity_gap: float
    max_truncated_gap: float
    action_mismatches: int
    counterexamples: Tuple[Tuple[JointState, float], ...]


def truncation_equivalence_check(scenario: Scenario, horizon: int, extension: int,
                                 tol: float = 1e-9,
                                 cap: int = DEFAULT_STATE_ACTION_CAP) -> TruncationCheckResult:
    """Verify that the truncated chain loses nothing.

    Runs the untruncated recursion on a grid reaching ``extension`` past each
    tau (padded by ``horizon`` so edge saturation cannot contaminate read
    states) and checks, for every state x in the extended box:

      V(x) == sum_i (x_i - tau_i)^+  +  V(min(x, tau))

    with identical optimal first actions, and that V agrees with the
    truncated-chain recursion on the box x <= tau.
    """
    if horizon < 0 or extension < 0:
        raise ValueError("horizon and extension must be >= 0")
    cl = _expand(scenario)
    read_bounds = cl.taus + extension
    dp = _JointDP(cl, bounds=read_bounds + horizon, cap=cap)
    cost = _untruncated_stage_cost(dp)
    # Terminal: ages reset at the horizon, charging any open excess.
    values = np.maximum(dp.states - cl.taus[None, :], 0).sum(axis=1).astype(np.float64)
    q = np.tile(values, (len(dp.actions), 1))
    for _ in range(horizon):
        q = dp.q_sweep(values, cost)
        values = q.min(axis=0)

    trunc = finite_horizon_dp(scenario, horizon, cap=cap)

    def action_set(qcol: np.ndarray) -> Tuple[int, ...]:
        best = qcol.min()
        cut = best + tol * max(1.0, abs(best))
        return tuple(np.flatnonzero(qcol <= cut))

    max_identity_gap = 0.0
    max_truncated_gap = 0.0
    mismatches = 0
    bad: List[Tuple[JointState, float]] = []
    checked = 0
    for ages in itertools.product(*(range(b + 1) for b in read_bounds)):
        checked += 1
        x = np.array(ages, dtype=np.int64)
        idx = dp.encode(x)
        base = np.minimum(x, cl.taus)
        base_idx = dp.encode(base)
        shift = float(np.maximum(x - cl.taus, 0).sum())
        gap = abs(values[idx] - (shift + values[base_idx]))
        if gap > max_identity_gap:
            max_identity_gap = gap
        if gap > tol and len(bad) < 10:
            bad.append((tuple(int(v) for v in x), gap))
        if horizon > 0 and action_set(q[:, idx]) != action_set(q[:, base_idx]):
            mismatches += 1
        tgap = abs(values[base_idx] - trunc.value_of(base))
        if tgap > max_truncated_gap:
            max_truncated_gap = tgap

    ok = max_identity_gap <= tol and max_truncated_gap <= tol and mismatches == 0
    return TruncationCheckResult(
        ok=ok, horizon=horizon, extension=extension, checked_states=checked,
        max_identity_gap=max_identity_gap, max_truncated_gap=max_truncated_gap,
        action_mismatches=mismatches, counterexamples=tuple(bad),
    )


# ======================================================================
# Average cost
# ======================================================================

@dataclass(eq=False)
class DPResult:
    average_cost: float
    bias: np.ndarray
    policy: np.ndarray
    actions: Tuple[Tuple[int, ...], ...]
    iterations: int
    span_residual: float
    _dp: _JointDP

    def action_for(self, ages: Sequence[int]) -> JointAction:
        return JointAction(self.actions[int(self.policy[self._dp.encode(ages)])])

    def bias_of(self, ages: Sequence[int]) -> float:
        return float(self.bias[self._dp.encode(ages)])


def average_cost_optimal(scenario: Scenario,
                         span_tol: float = DEFAULT_SPAN_TOL,
                         max_iterations: int = DEFAULT_MAX_ITERATIONS,
                         cap: int = DEFAULT_STATE_ACTION_CAP) -> DPResult:
    """Optimal long-run average cost of the joint truncated chain.

    Relative value iteration with a self-loop damping transform, so
    deterministic (periodic) instances converge too. The bias is anchored at
    the all-zero state and reported in undamped units.
    """
    cl = _expand(scenario)
    dp = _JointDP(cl, bounds=cl.taus, cap=cap)
    cost = _truncated_stage_cost(dp)
    h = np.zeros(dp.n_states)
    anchor = 0  # all ages zero
    span = math.inf
    iterations = 0
    q = None
    while iterations < max_iterations:
        q = dp.q_sweep(h, cost, damping=RVI_DAMPING)
        w = q.min(axis=0)
        diff = w - h
        span = float(diff.max() - diff.min())
        gain = 0.5 * float(diff.max() + diff.min())
        h = w - w[anchor]
        iterations += 1
        if span < span_tol:
            break
    else:
        raise ConvergenceError(iterations, span)
    policy = q.argmin(axis=0)
    return DPResult(
        average_cost=gain,
        bias=(1.0 - RVI_DAMPING) * h,
        policy=policy,
        actions=dp.actions,
        iterations=iterations,
        span_residual=span,
        _dp=dp,
    )


# ======================================================================
# Single-client chain oracle
# ======================================================================

def threshold_chain_matrix(client_class: ClientClass, policy: ThresholdPolicy):
    """Transition matrix and activity profile of one client under sigma(theta, rho)."""
    tau = client_class.tau
    if not 0 <= policy.theta <= tau:
        raise ValueError(f"theta {policy.theta} outside [0, {tau}]")
    if not 0.0 <= policy.rho <= 1.0:
        raise ValueError(f"rho {policy.rho} outside [0, 1]")
    p = client_class.p
    P = np.zeros((tau + 1, tau + 1))
    activity = np.empty(tau + 1)
    for i in range(tau + 1):
        a = policy.activity_probability(i)
        activity[i] = a
        advanced = min(i + 1, tau)
        P[i, 0] += a * p
        P[i, advanced] += 1.0 - a * p
    return P, activity


def threshold_chain_stationary(client_class: ClientClass, policy: ThresholdPolicy) -> np.ndarray:
    """Exact stationary distribution via a linear solve."""
    P, _ = threshold_chain_matrix(client_class, policy)
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def chain_reward_oracle(client_class: ClientClass, eta: float, omega: float,
                        policy: ThresholdPolicy) -> float:
    """Exact average reward of sigma(theta, rho) under subsidy omega.

    Independent of the renewal closed form: per-slot reward is
    -1{age == tau} - eta*energy*a(age) + omega*(1 - a(age)) averaged under the
    exact stationary distribution.
    """
    P, activity = threshold_chain_matrix(client_class, policy)
    pi = threshold_chain_stationary(client_class, policy)
    tau = client_class.tau
    reward = np.full(tau + 1, 0.0)
    reward -= eta * client_class.energy * activity
    reward += omega * (1.0 - activity)
    reward[tau] -= 1.0
    return float(pi @ reward)
