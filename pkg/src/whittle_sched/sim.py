"""Monte Carlo simulator for fleet scheduling policies.

Per slot: charge lateness on pre-transition ages, let the policy pick at most
L clients, charge their energy, then draw deliveries and advance ages. Cost
is assembled from integer lateness/attempt counts as penalty + eta * energy,
so the accounting identity holds exactly by construction.

Delivery draws are keyed by (master_seed, replication, client) and slot
number only, never by policy or eta, which gives common random numbers across
policy and eta comparisons for free.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernel
from .core import (
    POLICY_STREAM_CLIENT,
    ClientStream,
    Scenario,
    client_layout,
    client_stream_keys,
    scenario_to_dict,
    spawn_rng,
)
from .bandit import WhittleTable, whittle_table


class PolicyViolationError(RuntimeError):
    """A policy scheduled more clients than the per-slot budget allows."""


# ======================================================================
# Policies
# ======================================================================

@dataclass(eq=False)
class ReplicationContext:
    scenario: Scenario
    replication: int
    class_of: np.ndarray
    tau_of: np.ndarray       # per client
    budget: int
    policy_stream: ClientStream


class Policy(ABC):
    """Scheduling rule: map (slot, ages) to a set of client ids, size <= L.

    Policies must be deterministic given the replication context; any
    randomness comes from the reserved policy stream handed to
    start_replication.
    """

    name: str = "policy"

    def start_replication(self, ctx: ReplicationContext) -> None:
        self._ctx = ctx

    @abstractmethod
    def select(self, slot: int, ages: np.ndarray) -> np.ndarray:
        """Return the active client ids for this slot."""

    def kernel_spec(self, scenario: Scenario) -> Optional[dict]:
        """Parameters for the compiled loop, or None to run the generic path."""
        return None


def _select_top(scores: np.ndarray, positive_only: bool, budget: int,
                tie_keys: Optional[np.ndarray] = None) -> np.ndarray:
    """Pure-python mirror of the compiled top-L selection (same tie rules)."""
    eligible = scores > 0.0 if positive_only else np.ones(scores.shape[0], dtype=bool)
    ids = np.flatnonzero(eligible)
    if ids.size <= budget:
        return ids
    cut = np.sort(scores[ids])[ids.size - budget]
    above = ids[scores[ids] > cut]
    equal = ids[scores[ids] == cut]
    need = budget - above.size
    if tie_keys is None:
        fill = equal[:need]
    else:
        order = np.argsort(tie_keys[equal], kind="stable")
        fill = equal[order[:need]]
    return np.sort(np.concatenate([above, fill]))


class WhittlePolicy(Policy):
    """Schedule the strictly-positive-index clients with the largest indices.

    Ties go to the lowest client id unless tie_break="random", which breaks
    them with the replication's policy stream instead.
    """

    def __init__(self, tables: Sequence[WhittleTable], tie_break: str = "id"):
        if tie_break not in ("id", "random"):
            raise ValueError(f"unknown tie_break {tie_break!r}")
        self.tables = tuple(tables)
        self.tie_break = tie_break
        self.name = "whittle"
        width = max(t.values.shape[0] for t in self.tables)
        flat = np.full((len(self.tables), width), -np.inf)
        for k, t in enumerate(self.tables):
            flat[k, : t.values.shape[0]] = t.values
        self._flat = flat

    def _flat_table(self) -> np.ndarray:
        return self._flat

    def select(self, slot: int, ages: np.ndarray) -> np.ndarray:
        ctx = self._ctx
        scores = self._flat_table()[ctx.class_of, ages]
        keys = None
        if self.tie_break == "random":
            n = ages.shape[0]
            keys = ctx.policy_stream.uniforms_at(slot * n, n)
        return _select_top(scores, True, ctx.budget, keys)

    def kernel_spec(self, scenario: Scenario) -> Optional[dict]:
        return {
            "kind": _kernel.KIND_INDEX,
            "index_table": self._flat_table(),
            "tie_mode": _kernel.TIE_BY_KEY if self.tie_break == "random" else _kernel.TIE_BY_ID,
        }


class RandomSubsetPolicy(Policy):
    """Uniformly random subset of exactly L clients each slot."""

    def __init__(self):
        self.name = "random"

    def select(self, slot: int, ages: np.ndarray) -> np.ndarray:
        ctx = self._ctx
        n = ages.shape[0]
        draws = ctx.policy_stream.uniforms_at(slot * n, n)
        return _select_top(-draws, False, ctx.budget)

    def kernel_spec(self, scenario: Scenario) -> Optional[dict]:
        return {"kind": _kernel.KIND_RANDOM}


class GreedyAgePolicy(Policy):
    """Schedule the L clients with the largest age/tau ratio, ties by id."""

    def __init__(self):
        self.name = "greedy"

    def select(self, slot: int, ages: np.ndarray) -> np.ndarray:
        ctx = self._ctx
        return _select_top(ages / ctx.tau_of, False, ctx.budget)

    def kernel_spec(self, scenario: Scenario) -> Optional[dict]:
        return {"kind": _kernel.KIND_GREEDY}


class FixedThresholdPolicy(Policy):
    """Activate clients whose age reached a threshold, lowest ids first.

    theta may be one integer for the whole fleet or one per class. A theta
    above tau means the class is never scheduled.
    """

    def __init__(self, theta):
        self.theta = theta
        self.name = f"threshold:{theta}"

    def _thetas(self, n_classes: int) -> np.ndarray:
        if np.isscalar(self.theta):
            return np.full(n_classes, int(self.theta), dtype=np.int64)
        arr = np.asarray(self.theta, dtype=np.int64)
        if arr.shape != (n_classes,):
            raise ValueError(f"expected {n_classes} thresholds, got {arr.shape}")
        return arr

    def select(self, slot: int, ages: np.ndarray) -> np.ndarray:
        ctx = self._ctx
        thetas = self._thetas(ctx.scenario.n_classes)[ctx.class_of]
        due = np.flatnonzero(ages >= thetas)
        return due[: ctx.budget]

    def kernel_spec(self, scenario: Scenario) -> Optional[dict]:
        return {
            "kind": _kernel.KIND_THRESHOLD,
            "theta_of_class": self._thetas(scenario.n_classes),
        }


def whittle_policy(tables: Sequence[WhittleTable], tie_break: str = "id") -> WhittlePolicy:
    return WhittlePolicy(tables, tie_break=tie_break)


def whittle_policy_for(scenario: Scenario, tie_break: str = "id") -> WhittlePolicy:
    tables = [whittle_table(c, scenario.eta) for c in scenario.classes]
    return WhittlePolicy(tables, tie_break=tie_break)


def baseline_policies() -> Dict[str, Policy]:
    """The two reference policies, keyed by their CLI names."""
    return {"random": RandomSubsetPolicy(), "greedy": GreedyAgePolicy()}


# ======================================================================
# Single replications
# ======================================================================

@dataclass(frozen=True)
class ReplicationMetrics:
    """Integer accumulators of one replication's measured window."""

    replication: int
    measured_slots: int
    penalty_counts: Tuple[int, ...]
    attempt_counts: Tuple[int, ...]
    snapshot_slots: Tuple[int, ...] = ()
    snapshot_penalty: Tuple[int, ...] = ()
    snapshot_attempts: Tuple[Tuple[int, ...], ...] = ()


def default_burn_in(horizon: int) -> int:
    return horizon // 10


def simulate(scenario: Scenario, policy: Policy, replication: int,
             horizon: Optional[int] = None, burn_in: Optional[int] = None,
             start_at_tau: bool = False, stride: int = 0,
             force_generic: bool = False) -> ReplicationMetrics:
    """Run one replication and return its integer accumulators.

    horizon defaults to the scenario's horizon_slots, burn_in to a tenth of
    the horizon. The compiled loop is used whenever the policy provides a
    kernel spec; force_generic exists so tests can compare the two paths.
    """
    horizon = scenario.horizon_slots if horizon is None else horizon
    burn_in = default_burn_in(horizon) if burn_in is None else burn_in
    if not 0 <= burn_in < horizon:
        raise ValueError(f"burn_in {burn_in} outside [0, horizon)")
    if stride < 0:
        raise ValueError("stride must be >= 0")

    class_of, counts = client_layout(scenario)
    tau_of_class = np.array([c.tau for c in scenario.classes], dtype=np.int64)
    p_of_class = np.array([c.p for c in scenario.classes], dtype=np.float64)
    budget = scenario.slots_per_step
    n = scenario.n_clients
    k = scenario.n_classes
    init_ages = tau_of_class[class_of] if start_at_tau else np.zeros(n, dtype=np.int64)
    init_ages = init_ages.astype(np.int64)

    n_snap = horizon // stride if stride > 0 else 0
    snap_slots = tuple(int(s) * stride for s in range(1, n_snap + 1))
    snap_penalty = np.zeros(n_snap, dtype=np.int64)
    snap_attempts = np.zeros((n_snap, k), dtype=np.int64)
    penalty_out = np.zeros(k, dtype=np.int64)
    attempt_out = np.zeros(k, dtype=np.int64)

    spec = None if force_generic else policy.kernel_spec(scenario)
    if spec is not None:
        client_keys = client_stream_keys(scenario, replication)
        policy_key = np.uint64(
            spawn_rng(scenario.master_seed, replication, POLICY_STREAM_CLIENT).key
        )
        _kernel.run_replication(
            horizon, burn_in, budget,
            class_of, tau_of_class, p_of_class,
            spec.get("index_table", np.zeros((k, 1))),
            spec.get("theta_of_class", np.zeros(k, dtype=np.int64)),
            spec["kind"], spec.get("tie_mode", _kernel.TIE_BY_ID),
            client_keys, policy_key,
            init_ages,
            stride, snap_penalty, snap_attempts,
            penalty_out, attempt_out,
        )
    else:
        _run_generic(scenario, policy, replication, horizon, burn_in,
                     class_of, tau_of_class, p_of_class, budget, init_ages,
                     stride, snap_penalty, snap_attempts, penalty_out, attempt_out)

    return ReplicationMetrics(
        replication=replication,
        measured_slots=horizon - burn_in,
        penalty_counts=tuple(int(v) for v in penalty_out),
        attempt_counts=tuple(int(v) for v in attempt_out),
        snapshot_slots=snap_slots,
        snapshot_penalty=tuple(int(v) for v in snap_penalty),
        snapshot_attempts=tuple(tuple(int(v) for v in row) for row in snap_attempts),
    )


def _run_generic(scenario, policy, replication, horizon, burn_in,
                 class_of, tau_of_class, p_of_class, budget, init_ages,
                 stride, snap_penalty, snap_attempts, penalty_out, attempt_out):
    n = scenario.n_clients
    streams = [spawn_rng(scenario.master_seed, replication, i) for i in range(n)]
    ctx = ReplicationContext(
        scenario=scenario, replication=replication,
        class_of=class_of, tau_of=tau_of_class[class_of].astype(np.float64),
        budget=budget,
        policy_stream=spawn_rng(scenario.master_seed, replication, POLICY_STREAM_CLIENT),
    )
    policy.start_replication(ctx)
    ages = init_ages.copy()
    taus = tau_of_class[class_of]
    for t in range(horizon):
        measured = t >= burn_in
        if measured:
            late = np.flatnonzero(ages == taus)
            for c in class_of[late]:
                penalty_out[c] += 1
        active = np.asarray(policy.select(t, ages.copy()), dtype=np.int64)
        if active.size > budget:
            raise PolicyViolationError(
                f"{policy.name} scheduled {active.size} clients, budget is {budget}"
            )
        if np.unique(active).size != active.size:
            raise PolicyViolationError(f"{policy.name} returned duplicate client ids")
        is_active = np.zeros(n, dtype=bool)
        is_active[active] = True
        for i in range(n):
            c = class_of[i]
            if is_active[i]:
                if measured:
                    attempt_out[c] += 1
                if streams[i].uniform_at(t) < p_of_class[c]:
                    ages[i] = 0
                    continue
            ages[i] = min(ages[i] + 1, taus[i])
        if stride > 0 and (t + 1) % stride == 0:
            j = (t + 1) // stride - 1
            snap_penalty[j] = penalty_out.sum()
            snap_attempts[j] = attempt_out


# ======================================================================
# Replication batches and reporting
# ======================================================================

@dataclass(frozen=True)
class ClassSummary:
    class_index: int
    clients: int
    avg_cost_per_client: float
    avg_penalty_per_client: float
    avg_energy_per_client: float
    se_cost: Optional[float]
    se_penalty: Optional[float]
    se_energy: Optional[float]


@dataclass(frozen=True)
class SimReport:
    """Pooled simulation estimates; all rates are per client per slot."""

    scenario: Scenario
    policy_name: str
    horizon: int
    burn_in: int
    replications: Tuple[ReplicationMetrics, ...]
    avg_cost_per_client: float
    avg_penalty_per_client: float
    avg_energy_per_client: float
    se_cost: Optional[float]
    se_penalty: Optional[float]
    se_energy: Optional[float]
    per_class: Tuple[ClassSummary, ...]

    def to_dict(self) -> dict:
        return {
            "scenario": scenario_to_dict(self.scenario),
            "policy": self.policy_name,
            "horizon": self.horizon,
            "burn_in": self.burn_in,
            "avg_cost_per_client": self.avg_cost_per_client,
            "avg_penalty_per_client": self.avg_penalty_per_client,
            "avg_energy_per_client": self.avg_energy_per_client,
            "se_cost": self.se_cost,
            "se_penalty": self.se_penalty,
            "se_energy": self.se_energy,
            "per_class": [
                {
                    "class_index": c.class_index,
                    "clients": c.clients,
                    "avg_cost_per_client": c.avg_cost_per_client,
                    "avg_penalty_per_client": c.avg_penalty_per_client,
                    "avg_energy_per_client": c.avg_energy_per_client,
                    "se_cost": c.se_cost,
                    "se_penalty": c.se_penalty,
                    "se_energy": c.se_energy,
                }
                for c in self.per_class
            ],
            "replications": [
                {
                    "replication": r.replication,
                    "measured_slots": r.measured_slots,
                    "penalty_counts": list(r.penalty_counts),
                    "attempt_counts": list(r.attempt_counts),
                }
                for r in self.replications
            ],
        }


def _mean_se(values: np.ndarray) -> Tuple[float, Optional[float]]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, None
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def summarize(scenario: Scenario, policy_name: str, horizon: int, burn_in: int,
              metrics: Sequence[ReplicationMetrics]) -> SimReport:
    """Pool per-replication counts into per-client per-slot rates."""
    counts = scenario.class_counts()
    energies = np.array([c.energy for c in scenario.classes])
    eta = scenario.eta
    n = scenario.n_clients
    reps = len(metrics)

    pen = np.array([m.penalty_counts for m in metrics], dtype=np.float64)
    att = np.array([m.attempt_counts for m in metrics], dtype=np.float64)
    slots = np.array([m.measured_slots for m in metrics], dtype=np.float64)

    pen_rate = pen.sum(axis=1) / (slots * n)
    energy_rate = (att * energies[None, :]).sum(axis=1) / (slots * n)
    cost_rate = pen_rate + eta * energy_rate

    cost_mean, cost_se = _mean_se(cost_rate)
    pen_mean, pen_se = _mean_se(pen_rate)
    en_mean, en_se = _mean_se(energy_rate)

    per_class: List[ClassSummary] = []
    for k in range(scenario.n_classes):
        nk = counts[k]
        pk = pen[:, k] / (slots * nk)
        ek = att[:, k] * energies[k] / (slots * nk)
        ck = pk + eta * ek
        cm, cs = _mean_se(ck)
        pm, ps = _mean_se(pk)
        em, es = _mean_se(ek)
        per_class.append(ClassSummary(
            class_index=k, clients=nk,
            avg_cost_per_client=cm, avg_penalty_per_client=pm, avg_energy_per_client=em,
            se_cost=cs, se_penalty=ps, se_energy=es,
        ))

    return SimReport(
        scenario=scenario, policy_name=policy_name, horizon=horizon, burn_in=burn_in,
        replications=tuple(metrics),
        avg_cost_per_client=cost_mean, avg_penalty_per_client=pen_mean,
        avg_energy_per_client=en_mean,
        se_cost=cost_se, se_penalty=pen_se, se_energy=en_se,
        per_class=tuple(per_class),
    )


def _replication_job(args) -> ReplicationMetrics:
    scenario, policy, rep, horizon, burn_in, start_at_tau, stride = args
    return simulate(scenario, policy, rep, horizon=horizon, burn_in=burn_in,
                    start_at_tau=start_at_tau, stride=stride)


def replicate(scenario: Scenario, policy: Policy,
              horizon: Optional[int] = None, burn_in: Optional[int] = None,
              start_at_tau: bool = False, stride: int = 0,
              threads: int = 1) -> SimReport:
    """Run every replication of the scenario and pool the results.

    Replications are independent (their streams are keyed by replication
    index), so parallel workers merge deterministically in index order.
    """
    horizon = scenario.horizon_slots if horizon is None else horizon
    burn_in = default_burn_in(horizon) if burn_in is None else burn_in
    jobs = [
        (scenario, policy, rep, horizon, burn_in, start_at_tau, stride)
        for rep in range(scenario.replications)
    ]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            metrics = list(pool.map(_replication_job, jobs))
    else:
        metrics = [_replication_job(j) for j in jobs]
    return summarize(scenario, policy.name, horizon, burn_in, metrics)
