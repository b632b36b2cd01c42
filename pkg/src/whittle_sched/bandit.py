"""Single-client subsidy problem: closed-form index, threshold rewards, regions.

A client in isolation, offered a passivity subsidy ``omega``, is a restless
two-action chain on ages 0..tau. Threshold policies sigma(theta, rho) are
passive below theta, active above, and passive with probability rho at theta.
The index of age i is the subsidy that makes activation at i break even; the
closed form is

    W(i) = p * (i+1) * (1-p)^(tau-i-1) - eta * energy,   0 <= i <= tau-1,

with W(tau) = W(tau-1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import ClientClass

# Relative slack for "equal reward" when collecting co-optimal policies.
BOUNDARY_RTOL = 1e-12
# Exponent size beyond which (1-p)^m is evaluated in log space.
_LOG_POW_CUTOVER = 64
_SMALLEST_NORMAL = 2.2250738585072014e-308


class IndexabilityError(AssertionError):
    """Passive sets failed to grow monotonically; indicates an internal bug."""


@dataclass(frozen=True)
class ThresholdPolicy:
    """sigma(theta, rho): passive below theta, active above, rho-passive at theta."""

    theta: int
    rho: float = 0.0

    def activity_probability(self, age: int) -> float:
        if age < self.theta:
            return 0.0
        if age > self.theta:
            return 1.0
        return 1.0 - self.rho


@dataclass(eq=False)
class WhittleTable:
    """Index values for one class: values[i] for ages 0..tau, values[tau] stored
    equal to values[tau-1]."""

    client_class: ClientClass
    eta: float
    values: np.ndarray

    def value(self, age: int) -> float:
        return float(self.values[age])


@dataclass(frozen=True)
class SubsidySolution:
    """Best achievable average reward at a given subsidy, with every
    co-optimal deterministic threshold. At an exact indifference point the
    randomized family interpolating the listed policies is optimal too."""

    subsidy: float
    optimal_thetas: Tuple[int, ...]
    always_passive_optimal: bool
    reward: float


@dataclass(frozen=True)
class IndexabilityReport:
    breakpoints: Tuple[float, ...]
    passive_sets: Tuple[Tuple[int, ...], ...]
    ok: bool


# ======================================================================
# Closed forms
# ======================================================================

def decay_power(q: float, m: int) -> float:
    """q**m for q in [0, 1], m >= 0, evaluated in log space for large m.

    Results below the smallest positive normal float are clamped to zero so
    long passive runs cannot produce subnormal noise.
    """
    if m == 0:
        return 1.0
    if q <= 0.0:
        return 0.0
    if m <= _LOG_POW_CUTOVER:
        v = q ** m
    else:
        v = math.exp(m * math.log(q))
    return v if v >= _SMALLEST_NORMAL else 0.0


def whittle_index(client_class: ClientClass, eta: float, age: int) -> float:
    """Index of one age; the stored tau value duplicates tau-1."""
    tau = client_class.tau
    if not 0 <= age <= tau:
        raise ValueError(f"age {age} outside [0, {tau}]")
    i = min(age, tau - 1)
    p = client_class.p
    return p * (i + 1) * decay_power(1.0 - p, tau - i - 1) - eta * client_class.energy


def whittle_table(client_class: ClientClass, eta: float) -> WhittleTable:
    tau = client_class.tau
    values = np.empty(tau + 1, dtype=np.float64)
    for i in range(tau):
        values[i] = whittle_index(client_class, eta, i)
    values[tau] = values[tau - 1]
    return WhittleTable(client_class=client_class, eta=eta, values=values)


def avg_reward_threshold(client_class: ClientClass, eta: float, omega: float,
                         policy: ThresholdPolicy) -> float:
    """Long-run average reward of sigma(theta, 0) under subsidy omega.

    Renewal form: a cycle is theta subsidized slots followed by a geometric
    number of attempts, with the age-at-threshold penalty tail
    (1-p)^(tau-theta).
    """
    if policy.rho != 0.0:
        raise ValueError("closed form applies to rho=0 threshold policies only")
    theta = policy.theta
    tau = client_class.tau
    if not 0 <= theta <= tau:
        raise ValueError(f"theta {theta} outside [0, {tau}]")
    p = client_class.p
    num = p * theta * omega - eta * client_class.energy - decay_power(1.0 - p, tau - theta)
    return num / (1.0 + theta * p)


def avg_reward_always_passive(omega: float) -> float:
    """Never transmitting earns the subsidy every slot and one penalty unit."""
    return omega - 1.0


# ======================================================================
# Region structure
# ======================================================================

def reward_piece_lines(client_class: ClientClass, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    """All reward pieces as lines in omega: slopes, intercepts.

    Pieces 0..tau are the rho=0 threshold policies (slope theta*p/(1+theta*p),
    strictly below 1); piece tau+1 is always-passive (slope exactly 1).
    """
    tau = client_class.tau
    p = client_class.p
    thetas = np.arange(tau + 1, dtype=np.float64)
    denom = 1.0 + thetas * p
    slopes = np.empty(tau + 2, dtype=np.float64)
    intercepts = np.empty(tau + 2, dtype=np.float64)
    slopes[: tau + 1] = thetas * p / denom
    tails = np.array([decay_power(1.0 - p, tau - t) for t in range(tau + 1)])
    intercepts[: tau + 1] = (-eta * client_class.energy - tails) / denom
    slopes[tau + 1] = 1.0
    intercepts[tau + 1] = -1.0
    return slopes, intercepts


def subsidy_solve(client_class: ClientClass, eta: float, omega: float) -> SubsidySolution:
    """Maximize average reward at subsidy omega over all threshold policies.

    Every deterministic policy within BOUNDARY_RTOL of the maximum is
    reported, so exact indifference points list the whole co-optimal set.
    """
    slopes, intercepts = reward_piece_lines(client_class, eta)
    values = slopes * omega + intercepts
    reward = float(values.max())
    tol = BOUNDARY_RTOL * max(1.0, abs(reward))
    tau = client_class.tau
    thetas = tuple(int(t) for t in range(tau + 1) if values[t] >= reward - tol)
    passive_opt = bool(values[tau + 1] >= reward - tol)
    return SubsidySolution(
        subsidy=omega,
        optimal_thetas=thetas,
        always_passive_optimal=passive_opt,
        reward=reward,
    )


def indexability_report(client_class: ClientClass, eta: float) -> IndexabilityReport:
    """Breakpoints of the subsidy problem plus the passive-set chain.

    Probes one subsidy strictly inside each region and checks that the
    optimal passive set grows monotonically as the subsidy rises. A
    violation cannot happen with the closed-form index and is raised as an
    internal assertion failure.
    """
    if not 0.0 < client_class.p < 1.0:
        raise ValueError("indexability scan requires 0 < p < 1")
    table = whittle_table(client_class, eta)
    tau = client_class.tau
    breakpoints = tuple(float(v) for v in table.values[:tau])

    probes: List[float] = [breakpoints[0] - 1.0]
    for a, b in zip(breakpoints, breakpoints[1:]):
        probes.append(0.5 * (a + b))
    probes.append(breakpoints[-1] + 1.0)

    slopes, intercepts = reward_piece_lines(client_class, eta)
    values = slopes[:, None] * np.asarray(probes)[None, :] + intercepts[:, None]
    passive_sets: List[Tuple[int, ...]] = []
    for j in range(len(probes)):
        col = values[:, j]
        reward = col.max()
        tol = BOUNDARY_RTOL * max(1.0, abs(reward))
        # ties can occur when adjacent index values nearly coincide; the
        # smallest co-optimal threshold gives the smallest passive set
        winner = int(np.flatnonzero(col >= reward - tol)[0])
        if winner == tau + 1:
            passive_sets.append(tuple(range(tau + 1)))
        else:
            passive_sets.append(tuple(range(winner)))

    for prev, cur in zip(passive_sets, passive_sets[1:]):
        if not set(prev) <= set(cur):
            raise IndexabilityError(
                f"passive set shrank as subsidy rose: {prev} -> {cur}"
            )
    return IndexabilityReport(
        breakpoints=breakpoints,
        passive_sets=tuple(passive_sets),
        ok=True,
    )
