"""Lagrangian relaxation of the fleet problem and its computable lower bound.

Relaxing the per-slot budget to hold only on average decouples the fleet into
single-client subsidy problems. The dual

    d(omega) = sum_k count_k * R_k(omega) - omega * (1 - alpha) * N

is convex piecewise linear in the subsidy, so its minimum over omega >= 0 sits
at zero or at a nonnegative index value, and that minimum is a reward upper
bound, i.e. a cost lower bound for every admissible policy of the original
problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core import Scenario
from .bandit import SubsidySolution, reward_piece_lines, subsidy_solve, whittle_table

# Candidates closer than this (relative) are treated as one breakpoint.
BREAKPOINT_DEDUPE_RTOL = 1e-12


@dataclass(frozen=True)
class DualSolution:
    """Minimizing subsidy and the relaxed bound it certifies."""

    omega_star: float
    r_rel: float
    r_rel_per_client: float
    breakpoints: Tuple[float, ...]
    per_class_policy: Tuple[SubsidySolution, ...]

    @property
    def cost_lower_bound_per_client(self) -> float:
        return -self.r_rel_per_client


def dual_values(scenario: Scenario, omegas: Sequence[float]) -> np.ndarray:
    """Vectorized dual evaluation over a grid of subsidies."""
    om = np.asarray(omegas, dtype=np.float64)
    counts = scenario.class_counts()
    total = np.zeros_like(om)
    for k, cls in enumerate(scenario.classes):
        slopes, intercepts = reward_piece_lines(cls, scenario.eta)
        rk = (slopes[:, None] * om[None, :] + intercepts[:, None]).max(axis=0)
        total += counts[k] * rk
    return total - om * (1.0 - scenario.alpha) * scenario.n_clients


def dual_value(scenario: Scenario, omega: float) -> float:
    return float(dual_values(scenario, [omega])[0])


def candidate_subsidies(scenario: Scenario) -> Tuple[float, ...]:
    """Zero plus every nonnegative index value, deduplicated and sorted."""
    cand: List[float] = [0.0]
    for cls in scenario.classes:
        table = whittle_table(cls, scenario.eta)
        cand.extend(float(v) for v in table.values[: cls.tau] if v >= 0.0)
    cand.sort()
    kept: List[float] = [cand[0]]
    for v in cand[1:]:
        if abs(v - kept[-1]) > BREAKPOINT_DEDUPE_RTOL * max(1.0, abs(v)):
            kept.append(v)
    return tuple(kept)


def relaxed_bound(scenario: Scenario) -> DualSolution:
    """Minimize the dual over the candidate set.

    Convexity and piecewise linearity make the candidate scan exact; ties
    resolve to the smallest minimizing subsidy.
    """
    cand = candidate_subsidies(scenario)
    values = dual_values(scenario, cand)
    best = int(np.argmin(values))
    omega_star = float(cand[best])
    r_rel = float(values[best])
    return DualSolution(
        omega_star=omega_star,
        r_rel=r_rel,
        r_rel_per_client=r_rel / scenario.n_clients,
        breakpoints=cand,
        per_class_policy=tuple(
            subsidy_solve(cls, scenario.eta, omega_star) for cls in scenario.classes
        ),
    )
