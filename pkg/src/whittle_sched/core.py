"""Shared model types, scenario validation, and reproducible random streams.

A scenario describes a fleet of clients grouped into classes. Class k has a
delivery success probability ``p``, a regularity threshold ``tau`` (slots), a
per-attempt energy cost ``energy``, and a population ``proportion``. At most
``L = floor(alpha * n_clients)`` clients may be scheduled per slot.

Randomness is counter-based: every (master_seed, replication, client) triple
owns an independent SplitMix64 stream, so draws are reproducible and
collision-free without shared generator state.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

# Relative slack when deciding whether alpha*N or proportion*N is an integer.
INTEGRALITY_RTOL = 1e-9
# Proportions must sum to one within this absolute tolerance.
PROPORTION_ATOL = 1e-12

# Reserved client index for policy-internal randomness (never a real client).
POLICY_STREAM_CLIENT = 0xFFFFFFFF

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


# ======================================================================
# Model types
# ======================================================================

@dataclass(frozen=True)
class ClientClass:
    """One homogeneous group of clients.

    Attributes:
        p: per-attempt delivery success probability, 0 < p < 1 (p == 1 only
            for degenerate test instances).
        tau: regularity threshold in slots, >= 1. A client whose age reaches
            tau incurs one penalty unit per slot until the next delivery.
        energy: energy units consumed by one transmission attempt, >= 0.
        proportion: fraction of the fleet in this class, in (0, 1].
    """

    p: float
    tau: int
    energy: float
    proportion: float


@dataclass(frozen=True)
class Scenario:
    """A full experiment description. Immutable once validated."""

    classes: Tuple[ClientClass, ...]
    n_clients: int
    alpha: float
    eta: float
    horizon_slots: int
    replications: int
    master_seed: int

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def slots_per_step(self) -> int:
        """Per-slot scheduling budget L = floor(alpha * n_clients)."""
        return snap_floor(self.alpha * self.n_clients)

    def class_counts(self) -> Tuple[int, ...]:
        """Client count per class (proportion * n_clients, exact integers)."""
        counts = []
        for c in self.classes:
            k = _snap_int(c.proportion * self.n_clients)
            counts.append(k if k is not None else math.floor(c.proportion * self.n_clients))
        return tuple(counts)


@dataclass
class ClientState:
    """Mutable per-client simulation state."""

    client_id: int
    class_index: int
    age: int


class ScenarioError(ValueError):
    """Scenario validation failure; ``errors`` lists every violation found."""

    def __init__(self, errors: Sequence[str]):
        super().__init__("; ".join(errors))
        self.errors: List[str] = list(errors)


# ======================================================================
# Validation
# ======================================================================

def _snap_int(x: float) -> Optional[int]:
    """Return round(x) when x sits within INTEGRALITY_RTOL of an integer."""
    r = round(x)
    if abs(x - r) <= INTEGRALITY_RTOL * max(1.0, abs(x)):
        return int(r)
    return None


def snap_floor(x: float) -> int:
    """floor(x), robust to x landing a hair below an exact integer."""
    r = _snap_int(x)
    return r if r is not None else math.floor(x)


def validate_scenario(scenario: Scenario, *, degenerate_ok: bool = False) -> Scenario:
    """Check every scenario invariant; raise ScenarioError listing all failures.

    Args:
        scenario: candidate scenario.
        degenerate_ok: permit p == 1 classes (deterministic delivery), used by
            small hand-checkable instances.

    Returns:
        The same scenario object once all checks pass.
    """
    errors: List[str] = []
    if not scenario.classes:
        errors.append("at least one client class is required")
    for i, c in enumerate(scenario.classes):
        hi_ok = (c.p <= 1.0) if degenerate_ok else (c.p < 1.0)
        if not (0.0 < c.p and hi_ok):
            bound = "(0, 1]" if degenerate_ok else "(0, 1)"
            errors.append(f"class {i}: p={c.p!r} outside {bound}")
        if not (isinstance(c.tau, int) and c.tau >= 1):
            errors.append(f"class {i}: tau={c.tau!r} must be an integer >= 1")
        if not (c.energy >= 0.0 and math.isfinite(c.energy)):
            errors.append(f"class {i}: energy={c.energy!r} must be finite and >= 0")
        if not (0.0 < c.proportion <= 1.0):
            errors.append(f"class {i}: proportion={c.proportion!r} outside (0, 1]")

    if not (isinstance(scenario.n_clients, int) and scenario.n_clients >= 1):
        errors.append(f"n_clients={scenario.n_clients!r} must be an integer >= 1")
    if not (0.0 < scenario.alpha <= 1.0):
        errors.append(f"alpha={scenario.alpha!r} outside (0, 1]")
    if not (scenario.eta >= 0.0 and math.isfinite(scenario.eta)):
        errors.append(f"eta={scenario.eta!r} must be finite and >= 0")
    if not (isinstance(scenario.horizon_slots, int) and scenario.horizon_slots >= 1):
        errors.append(f"horizon_slots={scenario.horizon_slots!r} must be an integer >= 1")
    if not (isinstance(scenario.replications, int) and scenario.replications >= 1):
        errors.append(f"replications={scenario.replications!r} must be an integer >= 1")
    if not (isinstance(scenario.master_seed, int) and 0 <= scenario.master_seed < 2 ** 64):
        errors.append(f"master_seed={scenario.master_seed!r} must be an integer in [0, 2^64)")

    if scenario.classes and not errors:
        total = math.fsum(c.proportion for c in scenario.classes)
        if abs(total - 1.0) > PROPORTION_ATOL:
            errors.append(f"class proportions sum to {total!r}, expected 1 within {PROPORTION_ATOL}")
        for i, c in enumerate(scenario.classes):
            if _snap_int(c.proportion * scenario.n_clients) is None:
                errors.append(
                    f"class {i}: proportion*n_clients = {c.proportion * scenario.n_clients!r} is not an integer"
                )
        if scenario.n_clients >= 2 ** 32:
            errors.append("n_clients must be < 2^32 to keep client stream keys collision-free")
        L = snap_floor(scenario.alpha * scenario.n_clients)
        if L < 1:
            errors.append(f"per-slot budget floor(alpha*n_clients) = {L} must be >= 1")

    if errors:
        raise ScenarioError(errors)
    return scenario


def client_layout(scenario: Scenario) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Class index of every client, clients laid out class-by-class.

    Client ids 0..N-1 are assigned in class declaration order so a given id
    always refers to the same class across runs.

    Returns:
        (class_of, counts): class_of[i] is the class index of client i;
        counts[k] is the number of clients in class k.
    """
    counts = scenario.class_counts()
    class_of = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    return class_of, counts


# ======================================================================
# Scenario (de)serialization
# ======================================================================

_CLASS_KEYS = {"p", "tau", "energy", "proportion"}
_SCENARIO_KEYS = {
    "classes", "n_clients", "alpha", "eta",
    "horizon_slots", "replications", "master_seed",
}


def scenario_from_dict(data: dict) -> Scenario:
    """Build a Scenario from parsed JSON; unknown keys are rejected."""
    errors: List[str] = []
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        errors.append(f"unknown scenario keys: {sorted(unknown)}")
    missing = _SCENARIO_KEYS - set(data)
    if missing:
        errors.append(f"missing scenario keys: {sorted(missing)}")
    classes = []
    for i, cd in enumerate(data.get("classes", ())):
        if not isinstance(cd, dict):
            errors.append(f"class {i}: expected an object")
            continue
        bad = set(cd) - _CLASS_KEYS
        if bad:
            errors.append(f"class {i}: unknown keys {sorted(bad)}")
        lack = _CLASS_KEYS - set(cd)
        if lack:
            errors.append(f"class {i}: missing keys {sorted(lack)}")
        if not bad and not lack:
            classes.append(ClientClass(
                p=float(cd["p"]), tau=int(cd["tau"]),
                energy=float(cd["energy"]), proportion=float(cd["proportion"]),
            ))
    if errors:
        raise ScenarioError(errors)
    return Scenario(
        classes=tuple(classes),
        n_clients=int(data["n_clients"]),
        alpha=float(data["alpha"]),
        eta=float(data["eta"]),
        horizon_slots=int(data["horizon_slots"]),
        replications=int(data["replications"]),
        master_seed=int(data["master_seed"]),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "classes": [dataclasses.asdict(c) for c in scenario.classes],
        "n_clients": scenario.n_clients,
        "alpha": scenario.alpha,
        "eta": scenario.eta,
        "horizon_slots": scenario.horizon_slots,
        "replications": scenario.replications,
        "master_seed": scenario.master_seed,
    }


def load_scenario(path: str, *, degenerate_ok: bool = False) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"invalid JSON in {path}: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ScenarioError([f"{path}: top-level JSON value must be an object"])
    return validate_scenario(scenario_from_dict(data), degenerate_ok=degenerate_ok)


# ======================================================================
# Counter-based random streams
# ======================================================================

def _mix64(z: int) -> int:
    """SplitMix64 finalizer; bijective on 64-bit integers."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def stream_key(master_seed: int, replication: int, client: int) -> int:
    """64-bit stream key for one (seed, replication, client) triple.

    (replication, client) packs into one 64-bit word, so for a fixed master
    seed distinct triples are guaranteed distinct keys (the finalizer is a
    bijection composed with xor).
    """
    if not (0 <= replication < 2 ** 32):
        raise ValueError(f"replication index {replication} outside [0, 2^32)")
    if not (0 <= client < 2 ** 32):
        raise ValueError(f"client index {client} outside [0, 2^32)")
    w = (replication << 32) | client
    return _mix64(_mix64(master_seed & _MASK64) ^ w)


class ClientStream:
    """Counter-based uniform stream: value_at(j) is a pure function of (key, j).

    Sequential use (uniform / uniforms) advances an internal counter; indexed
    use (uniform_at) leaves it untouched, which is what the simulator relies
    on to key delivery draws by slot number.
    """

    __slots__ = ("key", "_counter")

    def __init__(self, key: int):
        self.key = key & _MASK64
        self._counter = 0

    def uniform_at(self, index: int) -> float:
        """Uniform in [0, 1) at stream position ``index`` (stateless)."""
        z = _mix64((self.key + _GOLDEN * (index + 1)) & _MASK64)
        return (z >> 11) * 2.0 ** -53

    def uniform(self) -> float:
        u = self.uniform_at(self._counter)
        self._counter += 1
        return u

    def uniforms(self, n: int) -> np.ndarray:
        out = self.uniforms_at(self._counter, n)
        self._counter += n
        return out

    def uniforms_at(self, start: int, n: int) -> np.ndarray:
        """Vectorized uniform_at over positions start..start+n-1 (stateless)."""
        idx = np.arange(start, start + n, dtype=np.uint64)
        z = np.uint64(self.key) + np.uint64(_GOLDEN) * (idx + np.uint64(1))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        return (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def spawn_rng(master_seed: int, replication: int, client: int) -> ClientStream:
    """Independent reproducible stream for one (seed, replication, client)."""
    return ClientStream(stream_key(master_seed, replication, client))


def client_stream_keys(scenario: Scenario, replication: int) -> np.ndarray:
    """uint64 stream keys for all clients of one replication, id order."""
    n = scenario.n_clients
    keys = np.empty(n, dtype=np.uint64)
    for i in range(n):
        keys[i] = stream_key(scenario.master_seed, replication, i)
    return keys
