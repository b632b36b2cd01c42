"""Command line front end.

Subcommands: index, bound, dp, simulate, fig1, fig2, oracle-suite. Outputs
are deterministic for a fixed config and seed: floats are emitted with 17
significant digits, files are written atomically, and every CSV ends with a
scenario-hash comment binding it to the inputs that produced it.

Exit codes: 0 success, 2 validation/config error, 3 oracle-suite failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import bandit, exactdp, relaxation, sim
from .core import (
    ClientClass,
    Scenario,
    ScenarioError,
    load_scenario,
    scenario_to_dict,
    validate_scenario,
)

DEFAULT_FIG1_SWEEP = (10, 20, 50, 100, 200)
FIG2_ETA_RANGE = (0.01, 2.0)
FIG2_ETA_POINTS = 10


class CliError(ValueError):
    """Config or flag problem; maps to exit code 2."""


# ======================================================================
# Formatting and output plumbing
# ======================================================================

def _fmt(x) -> str:
    if x is None:
        return "nan"
    return format(float(x), ".17g")


def scenario_hash(scenario: Scenario, command: str, params: dict) -> str:
    payload = json.dumps(
        {"command": command, "params": params, "scenario": scenario_to_dict(scenario)},
        sort_keys=True, separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _write_out(path: Optional[str], text: str) -> None:
    """Write to stdout, or atomically (write-then-rename) to a file."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: str, rows: Sequence[Sequence], hash_hex: str) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    lines.append(f"# scenario_hash={hash_hex}")
    return "\n".join(lines) + "\n"


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _load(args) -> Scenario:
    if not args.config:
        raise CliError("--config is required for this command")
    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario = validate_scenario(
            dataclasses.replace(scenario, master_seed=args.seed)
        )
    return scenario


# ======================================================================
# Subcommands
# ======================================================================

def cmd_index(args) -> int:
    scenario = _load(args)
    rows = []
    for k, cls in enumerate(scenario.classes):
        table = bandit.whittle_table(cls, scenario.eta)
        for state in range(cls.tau + 1):
            rows.append((str(k), str(state), table.values[state]))
    hh = scenario_hash(scenario, "index", {})
    _write_out(args.out, _csv_text("class,state,index", rows, hh))
    return 0


def cmd_bound(args) -> int:
    scenario = _load(args)
    sol = relaxation.relaxed_bound(scenario)
    payload = {
        "omega_star": sol.omega_star,
        "r_rel": sol.r_rel,
        "r_rel_per_client": sol.r_rel_per_client,
        "cost_lower_bound_per_client": sol.cost_lower_bound_per_client,
        "breakpoints": list(sol.breakpoints),
        "scenario_hash": scenario_hash(scenario, "bound", {}),
    }
    _write_out(args.out, _json_text(payload))
    return 0


def cmd_dp(args) -> int:
    scenario = _load(args)
    try:
        result = exactdp.average_cost_optimal(scenario)
    except exactdp.StateSpaceCapError as exc:
        raise CliError(str(exc)) from exc
    payload = {
        "average_cost_per_client": result.average_cost / scenario.n_clients,
        "average_cost": result.average_cost,
        "iterations": result.iterations,
        "span_residual": result.span_residual,
        "scenario_hash": scenario_hash(scenario, "dp", {}),
    }
    if args.dump_policy:
        rows = []
        dp = result._dp
        for s in range(dp.n_states):
            ages = " ".join(str(v) for v in dp.decode(s))
            action = " ".join(str(i) for i in result.actions[int(result.policy[s])])
            rows.append((ages, action))
        hh = scenario_hash(scenario, "dp-policy", {})
        _write_out(args.dump_policy, _csv_text("state_vector,action_set", rows, hh))
    _write_out(args.out, _json_text(payload))
    return 0


def _parse_policy(scenario: Scenario, text: str, tie_break: str) -> sim.Policy:
    if text == "whittle":
        return sim.whittle_policy_for(scenario, tie_break=tie_break)
    if text == "random":
        return sim.RandomSubsetPolicy()
    if text == "greedy":
        return sim.GreedyAgePolicy()
    if text.startswith("threshold:"):
        try:
            theta = int(text.split(":", 1)[1])
        except ValueError as exc:
            raise CliError(f"bad threshold policy spec {text!r}") from exc
        return sim.FixedThresholdPolicy(theta)
    raise CliError(f"unknown policy {text!r}")


def cmd_simulate(args) -> int:
    scenario = _load(args)
    policy = _parse_policy(scenario, args.policy, args.tie_break)
    stride = args.stride if args.csv else 0
    report = sim.replicate(
        scenario, policy,
        horizon=args.horizon, burn_in=args.burn_in,
        start_at_tau=args.start_at_tau, stride=stride,
        threads=args.threads,
    )
    params = {
        "policy": args.policy, "horizon": report.horizon,
        "burn_in": report.burn_in, "start_at_tau": args.start_at_tau,
    }
    hh = scenario_hash(scenario, "simulate", params)
    payload = report.to_dict()
    payload["scenario_hash"] = hh
    if args.csv:
        rows = _timeseries_rows(report)
        _write_out(args.csv, _csv_text("slot,cost,penalty,energy", rows, hh))
    _write_out(args.out, _json_text(payload))
    return 0


def _timeseries_rows(report: sim.SimReport) -> List[Tuple]:
    """Running per-client per-slot averages at every snapshot slot, pooled."""
    scenario = report.scenario
    energies = [c.energy for c in scenario.classes]
    n = scenario.n_clients
    reps = report.replications
    if not reps or not reps[0].snapshot_slots:
        return []
    rows = []
    for j, slot in enumerate(reps[0].snapshot_slots):
        measured = max(0, slot - report.burn_in)
        if measured == 0:
            rows.append((str(slot), 0.0, 0.0, 0.0))
            continue
        pen_vals, cost_vals, en_vals = [], [], []
        for r in reps:
            pen = r.snapshot_penalty[j] / (measured * n)
            en = sum(a * e for a, e in zip(r.snapshot_attempts[j], energies)) / (measured * n)
            pen_vals.append(pen)
            en_vals.append(en)
            cost_vals.append(pen + scenario.eta * en)
        k = len(reps)
        rows.append((str(slot), sum(cost_vals) / k, sum(pen_vals) / k, sum(en_vals) / k))
    return rows


# ======================================================================
# Figure experiments
# ======================================================================

@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: the base scenario plus the axis values to replace."""

    scenario: Scenario
    sweep: Tuple[float, ...]
    threads: int = 1


def run_fig1(spec: ExperimentSpec) -> str:
    """Cost-vs-fleet-size sweep: relaxed bound and simulated index policy.

    Returns CSV text with header N,bound,whittle_mean,whittle_se.
    """
    sizes = [int(v) for v in spec.sweep]
    if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise CliError("fig1 sweep must be a nonempty strictly increasing list of sizes")
    rows = []
    for n in sizes:
        scenario = validate_scenario(
            dataclasses.replace(spec.scenario, n_clients=n)
        )
        bound = relaxation.relaxed_bound(scenario).cost_lower_bound_per_client
        report = sim.replicate(
            scenario, sim.whittle_policy_for(scenario), threads=spec.threads
        )
        rows.append((str(n), bound, report.avg_cost_per_client, report.se_cost))
    hh = scenario_hash(spec.scenario, "fig1", {"sweep": sizes})
    return _csv_text("N,bound,whittle_mean,whittle_se", rows, hh)


def run_fig2(spec: ExperimentSpec) -> str:
    """Penalty/energy trade-off across an eta sweep under the index policy.

    Same seeds at every eta (common random numbers), so the trade-off curve
    is smooth in the sweep. Returns CSV text with header
    eta,penalty_mean,penalty_se,energy_mean,energy_se.
    """
    etas = [float(v) for v in spec.sweep]
    if not etas or any(b <= a for a, b in zip(etas, etas[1:])) or etas[0] < 0:
        raise CliError("fig2 sweep must be a nonempty strictly increasing list of etas >= 0")
    rows = []
    for eta in etas:
        scenario = validate_scenario(dataclasses.replace(spec.scenario, eta=eta))
        report = sim.replicate(
            scenario, sim.whittle_policy_for(scenario), threads=spec.threads
        )
        rows.append((
            eta,
            report.avg_penalty_per_client, report.se_penalty,
            report.avg_energy_per_client, report.se_energy,
        ))
    hh = scenario_hash(spec.scenario, "fig2", {"sweep": etas})
    return _csv_text("eta,penalty_mean,penalty_se,energy_mean,energy_se", rows, hh)


def default_fig2_etas() -> Tuple[float, ...]:
    lo, hi = FIG2_ETA_RANGE
    return tuple(float(v) for v in np.geomspace(lo, hi, FIG2_ETA_POINTS))


def _parse_sweep(text: str, kind: type) -> Tuple:
    try:
        return tuple(kind(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise CliError(f"bad sweep list {text!r}") from exc


def cmd_fig1(args) -> int:
    scenario = _load(args)
    sweep = _parse_sweep(args.sweep, int) if args.sweep else DEFAULT_FIG1_SWEEP
    text = run_fig1(ExperimentSpec(scenario, tuple(float(v) for v in sweep), args.threads))
    _write_out(args.out, text)
    return 0


def cmd_fig2(args) -> int:
    scenario = _load(args)
    sweep = _parse_sweep(args.etas, float) if args.etas else default_fig2_etas()
    text = run_fig2(ExperimentSpec(scenario, sweep, args.threads))
    _write_out(args.out, text)
    return 0


# ======================================================================
# Oracle suite
# ======================================================================

def _suite_scenario() -> Scenario:
    return validate_scenario(Scenario(
        classes=(
            ClientClass(p=0.5, tau=2, energy=1.0, proportion=0.5),
            ClientClass(p=0.7, tau=3, energy=1.0, proportion=0.5),
        ),
        n_clients=2, alpha=0.5, eta=0.1,
        horizon_slots=200_000, replications=20, master_seed=20240817,
    ))


def _check_indifference(n_draws: int = 200, tol: float = 1e-12) -> dict:
    rng = np.random.default_rng(987654321)
    worst = 0.0
    for _ in range(n_draws):
        cls = ClientClass(
            p=float(rng.uniform(0.05, 0.95)), tau=int(rng.integers(1, 13)),
            energy=float(rng.uniform(0.0, 3.0)), proportion=1.0,
        )
        eta = float(rng.uniform(0.0, 1.0))
        for theta in range(cls.tau - 1):
            w = bandit.whittle_index(cls, eta, theta)
            lhs = bandit.avg_reward_threshold(cls, eta, w, bandit.ThresholdPolicy(theta))
            rhs = bandit.avg_reward_threshold(cls, eta, w, bandit.ThresholdPolicy(theta + 1))
            worst = max(worst, abs(lhs - rhs))
        w_last = bandit.whittle_index(cls, eta, cls.tau - 1)
        tail = bandit.avg_reward_threshold(cls, eta, w_last, bandit.ThresholdPolicy(cls.tau))
        worst = max(worst, abs(tail - bandit.avg_reward_always_passive(w_last)))
    return {"passed": bool(worst <= tol), "max_residual": worst, "tolerance": tol}


def _check_closed_form_vs_chain(tol: float = 1e-10) -> dict:
    worst = 0.0
    for p in (0.1, 0.3, 0.5, 0.7, 0.9):
        for tau in range(1, 7):
            cls = ClientClass(p=p, tau=tau, energy=1.0, proportion=1.0)
            for eta in (0.0, 0.2, 1.0):
                for omega in (0.0, 0.3, 1.0, 5.0):
                    for theta in range(tau + 1):
                        pol = bandit.ThresholdPolicy(theta)
                        a = bandit.avg_reward_threshold(cls, eta, omega, pol)
                        b = exactdp.chain_reward_oracle(cls, eta, omega, pol)
                        worst = max(worst, abs(a - b))
    return {"passed": bool(worst <= tol), "max_residual": worst, "tolerance": tol}


def _check_truncation(scenario: Scenario) -> dict:
    res = exactdp.truncation_equivalence_check(scenario, horizon=5, extension=2)
    return {
        "passed": bool(res.ok),
        "max_identity_gap": res.max_identity_gap,
        "max_truncated_gap": res.max_truncated_gap,
        "action_mismatches": res.action_mismatches,
        "checked_states": res.checked_states,
    }


def _check_sandwich(scenario: Scenario, threads: int = 1) -> dict:
    bound = relaxation.relaxed_bound(scenario).cost_lower_bound_per_client
    dp = exactdp.average_cost_optimal(scenario).average_cost / scenario.n_clients
    report = sim.replicate(scenario, sim.whittle_policy_for(scenario), threads=threads)
    se = report.se_cost or 0.0
    upper = report.avg_cost_per_client + 3.0 * se
    slack = 1e-9
    passed = bound <= dp + slack and dp <= upper + slack
    return {
        "passed": bool(passed),
        "bound_per_client": bound,
        "dp_per_client": dp,
        "whittle_mean": report.avg_cost_per_client,
        "whittle_se": report.se_cost,
        "upper_with_3se": upper,
    }


def _check_permutation(tol: float = 1e-9) -> dict:
    base = validate_scenario(Scenario(
        classes=(
            ClientClass(p=0.5, tau=2, energy=1.0, proportion=0.5),
            ClientClass(p=0.5, tau=2, energy=1.0, proportion=0.5),
        ),
        n_clients=2, alpha=0.5, eta=0.1,
        horizon_slots=1000, replications=1, master_seed=7,
    ))
    cost = exactdp.average_cost_optimal(base).average_cost
    swapped = validate_scenario(dataclasses.replace(
        base, classes=(base.classes[1], base.classes[0])
    ))
    cost_swapped = exactdp.average_cost_optimal(swapped).average_cost
    gap = abs(cost - cost_swapped)
    return {"passed": bool(gap <= tol), "gap": gap, "tolerance": tol}


def run_small_oracle_suite(scenario: Optional[Scenario] = None, threads: int = 1) -> dict:
    """Cross-check the analytic formulas against independent computations."""
    scenario = scenario or _suite_scenario()
    checks = {
        "indifference_identities": _check_indifference(),
        "closed_form_vs_chain": _check_closed_form_vs_chain(),
        "truncation_equivalence": _check_truncation(scenario),
        "dp_sandwich": _check_sandwich(scenario, threads=threads),
        "permutation_invariance": _check_permutation(),
    }
    return {"passed": all(c["passed"] for c in checks.values()), "checks": checks}


def cmd_oracle_suite(args) -> int:
    scenario = _load(args) if args.config else None
    result = run_small_oracle_suite(scenario, threads=args.threads)
    result["scenario_hash"] = scenario_hash(
        scenario or _suite_scenario(), "oracle-suite", {}
    )
    _write_out(args.out, _json_text(result))
    return 0 if result["passed"] else 3


# ======================================================================
# Parser
# ======================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="whittle-sched",
        description="Index scheduling for energy-aware regular packet delivery",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--seed", type=int, help="override the scenario master seed")
    common.add_argument("--threads", type=int, default=1,
                        help="parallel replication workers")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common],
                       help="per-class index table as CSV")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("bound", parents=[common],
                       help="relaxed cost lower bound as JSON")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("dp", parents=[common],
                       help="exact optimal average cost of a small instance")
    p.add_argument("--dump-policy", help="also write the optimal policy table CSV")
    p.set_defaults(func=cmd_dp)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run")
    p.add_argument("--policy", default="whittle",
                   help="whittle | random | greedy | threshold:<theta>")
    p.add_argument("--tie-break", default="id", choices=("id", "random"))
    p.add_argument("--horizon", type=int, help="override scenario horizon")
    p.add_argument("--burn-in", type=int, help="override the horizon/10 default")
    p.add_argument("--start-at-tau", action="store_true",
                   help="start every client at its threshold age instead of 0")
    p.add_argument("--csv", help="also write a timeseries CSV")
    p.add_argument("--stride", type=int, default=1000,
                   help="slots between timeseries rows")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fig1", parents=[common],
                       help="bound vs simulated cost across fleet sizes")
    p.add_argument("--sweep", help="comma-separated client counts")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", parents=[common],
                       help="penalty/energy trade-off across eta values")
    p.add_argument("--etas", help="comma-separated eta values")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("oracle-suite", parents=[common],
                       help="self-check suite; exit 3 on any failure")
    p.set_defaults(func=cmd_oracle_suite)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, CliError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
