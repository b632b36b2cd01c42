"""Shared builders for the test suite."""

from __future__ import annotations

from typing import List, Sequence, Tuple

from whittle_sched.core import ClientClass, Scenario

_ACCEPTANCE_LINES: List[str] = []


def record_acceptance(line: str) -> None:
    """Queue a criterion verdict for the end-of-run summary."""
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_scenario(
    classes: Sequence[Tuple[float, int, float, float]],
    n_clients: int,
    alpha: float,
    eta: float,
    *,
    horizon_slots: int = 1000,
    replications: int = 1,
    master_seed: int = 1,
) -> Scenario:
    """Build a scenario from (p, tau, energy, proportion) tuples."""
    built = tuple(
        ClientClass(p=p, tau=tau, energy=energy, proportion=prop)
        for p, tau, energy, prop in classes
    )
    return Scenario(
        classes=built,
        n_clients=n_clients,
        alpha=alpha,
        eta=eta,
        horizon_slots=horizon_slots,
        replications=replications,
        master_seed=master_seed,
    )


def headline_scenario(n_clients: int = 100, **overrides) -> Scenario:
    """The two-class setup used throughout the docs and figures."""
    kwargs = dict(
        horizon_slots=200_000,
        replications=20,
        master_seed=20240817,
    )
    kwargs.update(overrides)
    return make_scenario(
        [(0.6, 10, 2.0, 0.5), (0.8, 5, 3.0, 0.5)],
        n_clients,
        0.3,
        0.1,
        **kwargs,
    )
