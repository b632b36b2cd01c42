import dataclasses
import json

import numpy as np
import pytest

from whittle_sched.core import (
    ClientClass,
    ClientStream,
    Scenario,
    ScenarioError,
    client_layout,
    client_stream_keys,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    snap_floor,
    spawn_rng,
    stream_key,
    validate_scenario,
)

from conftest import headline_scenario, make_scenario


# === scenario validation ===


def test_budget_from_alpha():
    sc = headline_scenario(100)
    validate_scenario(sc)
    assert sc.slots_per_step == 30


def test_budget_snap_beats_float_floor():
    # 0.29 * 100 is 28.999... in binary; the budget must still be 29
    sc = make_scenario([(0.5, 5, 1.0, 1.0)], 100, 0.29, 0.1)
    assert sc.slots_per_step == 29


def test_budget_truncates_genuine_fraction():
    sc = make_scenario([(0.5, 5, 1.0, 1.0)], 10, 0.33, 0.1)
    assert sc.slots_per_step == 3


def test_snap_floor_plain():
    assert snap_floor(3.7) == 3
    assert snap_floor(4.0) == 4


def test_single_client_full_budget():
    sc = make_scenario([(0.5, 3, 1.0, 1.0)], 1, 1.0, 0.2)
    validate_scenario(sc)
    assert sc.slots_per_step == 1


def test_zero_budget_rejected():
    sc = make_scenario([(0.5, 5, 1.0, 1.0)], 10, 0.05, 0.1)
    with pytest.raises(ScenarioError, match="budget"):
        validate_scenario(sc)


def test_class_counts_integral():
    sc = headline_scenario(100)
    assert sc.class_counts() == (50, 50)


def test_fractional_class_count_rejected():
    sc = make_scenario([(0.5, 5, 1.0, 0.5), (0.6, 4, 1.0, 0.5)], 7, 0.5, 0.1)
    with pytest.raises(ScenarioError, match="not an integer"):
        validate_scenario(sc)


def test_proportions_must_sum_to_one():
    sc = make_scenario([(0.5, 5, 1.0, 0.4), (0.6, 4, 1.0, 0.4)], 10, 0.5, 0.1)
    with pytest.raises(ScenarioError, match="sum"):
        validate_scenario(sc)


def test_probability_bounds():
    sc = make_scenario([(0.0, 5, 1.0, 1.0)], 4, 0.5, 0.1)
    with pytest.raises(ScenarioError):
        validate_scenario(sc)
    # p == 1 is allowed only when degenerate cases are opted into
    sc2 = make_scenario([(1.0, 5, 1.0, 1.0)], 4, 0.5, 0.1)
    with pytest.raises(ScenarioError):
        validate_scenario(sc2)
    validate_scenario(sc2, degenerate_ok=True)


def test_bad_deadline_and_energy():
    with pytest.raises(ScenarioError):
        validate_scenario(make_scenario([(0.5, 0, 1.0, 1.0)], 4, 0.5, 0.1))
    with pytest.raises(ScenarioError):
        validate_scenario(make_scenario([(0.5, 3, -1.0, 1.0)], 4, 0.5, 0.1))


def test_error_lists_every_problem():
    sc = make_scenario([(0.5, 0, -1.0, 1.0)], 4, 0.5, 0.1)
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(sc)
    assert len(exc.value.errors) == 2
    joined = " ".join(exc.value.errors)
    assert "tau" in joined and "energy" in joined


def test_client_layout_blocks():
    sc = headline_scenario(10)
    class_of, counts = client_layout(sc)
    assert counts == (5, 5)
    assert class_of.tolist() == [0] * 5 + [1] * 5


# === dict round trips ===


def test_round_trip_dict():
    sc = headline_scenario(100)
    assert scenario_from_dict(scenario_to_dict(sc)) == sc


def test_unknown_key_rejected():
    d = scenario_to_dict(headline_scenario(100))
    d["extra"] = 1
    with pytest.raises(ScenarioError, match="extra"):
        scenario_from_dict(d)


def test_unknown_class_key_rejected():
    d = scenario_to_dict(headline_scenario(100))
    d["classes"][0]["typo"] = 1
    with pytest.raises(ScenarioError, match="typo"):
        scenario_from_dict(d)


def test_missing_key_rejected():
    d = scenario_to_dict(headline_scenario(100))
    del d["alpha"]
    with pytest.raises(ScenarioError, match="alpha"):
        scenario_from_dict(d)


def test_load_scenario_file(tmp_path):
    path = tmp_path / "sc.json"
    sc = headline_scenario(100)
    path.write_text(json.dumps(scenario_to_dict(sc)))
    assert load_scenario(path) == sc


# === deterministic stream ===


def test_stream_repeatable():
    a = spawn_rng(42, 0, 0)
    b = spawn_rng(42, 0, 0)
    assert [a.uniform() for _ in range(100)] == [b.uniform() for _ in range(100)]


def test_stream_distinct_axes():
    base = [spawn_rng(42, 0, 0).uniform() for _ in range(4)]
    for other in (spawn_rng(42, 0, 1), spawn_rng(42, 1, 0), spawn_rng(43, 0, 0)):
        assert [other.uniform() for _ in range(4)] != base


def test_stream_keys_distinct():
    keys = {stream_key(9, r, c) for r in range(8) for c in range(64)}
    assert len(keys) == 8 * 64


def test_stateless_indexing_matches_sequential():
    s = spawn_rng(7, 3, 5)
    seq = [s.uniform() for _ in range(16)]
    t = spawn_rng(7, 3, 5)
    assert [t.uniform_at(j) for j in range(16)] == seq


def test_vectorized_matches_scalar():
    s = spawn_rng(11, 2, 9)
    vec = s.uniforms_at(5, 12)
    assert vec.tolist() == [s.uniform_at(5 + j) for j in range(12)]


def test_uniform_range_and_spread():
    s = spawn_rng(1, 0, 0)
    draws = s.uniforms_at(0, 10_000)
    assert draws.min() >= 0.0 and draws.max() < 1.0
    assert abs(draws.mean() - 0.5) < 0.02


def test_client_stream_keys_cover_population():
    sc = headline_scenario(10)
    keys = client_stream_keys(sc, replication=3)
    assert len(keys) == 10
    assert len(set(keys.tolist())) == 10


def test_stream_key_range_checks():
    with pytest.raises(ValueError):
        stream_key(0, -1, 0)
    with pytest.raises(ValueError):
        stream_key(0, 0, 2**32)


def test_frozen_dataclasses():
    sc = headline_scenario(4)
    with pytest.raises(dataclasses.FrozenInstanceError):
        sc.alpha = 0.5
    with pytest.raises(dataclasses.FrozenInstanceError):
        sc.classes[0].p = 0.1
