import json

import pytest

from whittle_sched import bandit, cli
from whittle_sched.core import scenario_to_dict
from whittle_sched.exactdp import average_cost_optimal

from conftest import headline_scenario, make_scenario


def write_config(tmp_path, scenario, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(scenario_to_dict(scenario)))
    return str(path)


def small_config(tmp_path):
    sc = headline_scenario(10, horizon_slots=2000, replications=2)
    return write_config(tmp_path, sc)


def suite_config(tmp_path):
    sc = make_scenario(
        [(0.5, 2, 1.0, 0.5), (0.7, 3, 1.0, 0.5)], 2, 0.5, 0.1,
        horizon_slots=5000, replications=2, master_seed=20240817,
    )
    return write_config(tmp_path, sc)


def read_lines(path):
    return path.read_text().splitlines()


# === formatting ===


def test_fmt_17_digits():
    assert cli._fmt(1 / 3) == "0.33333333333333331"
    assert cli._fmt(0.5) == "0.5"
    assert cli._fmt(None) == "nan"


def test_scenario_hash_sensitivity():
    sc = headline_scenario(10)
    base = cli.scenario_hash(sc, "index", {})
    assert len(base) == 64 and int(base, 16) >= 0
    assert cli.scenario_hash(sc, "bound", {}) != base
    assert cli.scenario_hash(headline_scenario(20), "index", {}) != base


# === index command ===


def test_index_csv(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "index.csv"
    assert cli.main(["index", "--config", cfg, "--out", str(out)]) == 0
    lines = read_lines(out)
    assert lines[0] == "class,state,index"
    assert lines[-1].startswith("# scenario_hash=")
    assert len(lines) == 1 + (11 + 6) + 1
    row = next(l for l in lines if l.startswith("1,4,"))
    assert abs(float(row.split(",")[2]) - 3.7) < 1e-12


def test_index_stdout(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert cli.main(["index", "--config", cfg]) == 0
    assert capsys.readouterr().out.startswith("class,state,index")


# === bound command ===


def test_bound_headline(tmp_path):
    cfg = write_config(tmp_path, headline_scenario(100))
    out = tmp_path / "bound.json"
    assert cli.main(["bound", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["omega_star"] == 0.0
    assert abs(payload["cost_lower_bound_per_client"] - 0.07452173913043479) < 1e-12
    assert len(payload["breakpoints"]) == 7
    assert abs(payload["r_rel_per_client"] + payload["cost_lower_bound_per_client"]) < 1e-15
    assert len(payload["scenario_hash"]) == 64


# === dp command ===


def test_dp_json_and_policy_dump(tmp_path):
    cfg = suite_config(tmp_path)
    out = tmp_path / "dp.json"
    dump = tmp_path / "policy.csv"
    rc = cli.main(["dp", "--config", cfg, "--out", str(out),
                   "--dump-policy", str(dump)])
    assert rc == 0
    payload = json.loads(out.read_text())
    sc = make_scenario(
        [(0.5, 2, 1.0, 0.5), (0.7, 3, 1.0, 0.5)], 2, 0.5, 0.1,
        horizon_slots=5000, replications=2, master_seed=20240817,
    )
    direct = average_cost_optimal(sc)
    assert abs(payload["average_cost"] - direct.average_cost) < 1e-12
    assert abs(payload["average_cost_per_client"] - direct.average_cost / 2) < 1e-12
    lines = read_lines(dump)
    assert lines[0] == "state_vector,action_set"
    assert len(lines) == 1 + 12 + 1  # 3*4 joint states


def test_dp_too_large_is_clean_error(tmp_path, capsys):
    cfg = write_config(tmp_path, headline_scenario(100))
    assert cli.main(["dp", "--config", cfg]) == 2
    assert "error:" in capsys.readouterr().err


# === simulate command ===


def test_simulate_json(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "sim.json"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["policy"] == "whittle"
    assert payload["horizon"] == 2000 and payload["burn_in"] == 200
    assert len(payload["replications"]) == 2
    want = payload["avg_penalty_per_client"] + 0.1 * payload["avg_energy_per_client"]
    assert abs(payload["avg_cost_per_client"] - want) < 1e-14
    assert payload["se_cost"] is not None


def test_simulate_policies_and_flags(tmp_path):
    cfg = small_config(tmp_path)
    for policy in ("random", "greedy", "threshold:3"):
        out = tmp_path / f"{policy.replace(':', '-')}.json"
        rc = cli.main(["simulate", "--config", cfg, "--policy", policy,
                       "--out", str(out), "--horizon", "500", "--burn-in", "100"])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["policy"] == policy
        assert payload["horizon"] == 500 and payload["burn_in"] == 100


def test_simulate_timeseries_csv(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "sim.json"
    csv_path = tmp_path / "series.csv"
    rc = cli.main(["simulate", "--config", cfg, "--out", str(out),
                   "--csv", str(csv_path), "--stride", "500"])
    assert rc == 0
    lines = read_lines(csv_path)
    assert lines[0] == "slot,cost,penalty,energy"
    assert len(lines) == 1 + 4 + 1  # horizon 2000 / stride 500
    first = lines[1].split(",")
    assert first[0] == "500" and float(first[1]) > 0.0


def test_simulate_bad_policy(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert cli.main(["simulate", "--config", cfg, "--policy", "magic"]) == 2
    assert "unknown policy" in capsys.readouterr().err


def test_seed_override_changes_results(tmp_path):
    cfg = small_config(tmp_path)
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    c = tmp_path / "c.json"
    cli.main(["simulate", "--config", cfg, "--out", str(a), "--seed", "1"])
    cli.main(["simulate", "--config", cfg, "--out", str(b), "--seed", "2"])
    cli.main(["simulate", "--config", cfg, "--out", str(c), "--seed", "1"])
    assert a.read_bytes() == c.read_bytes()
    assert a.read_bytes() != b.read_bytes()


# === figure sweeps ===


def test_fig1_csv_and_determinism(tmp_path):
    cfg = small_config(tmp_path)
    a = tmp_path / "fig1a.csv"
    b = tmp_path / "fig1b.csv"
    assert cli.main(["fig1", "--config", cfg, "--sweep", "4,8", "--out", str(a)]) == 0
    assert cli.main(["fig1", "--config", cfg, "--sweep", "4,8", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = read_lines(a)
    assert lines[0] == "N,bound,whittle_mean,whittle_se"
    assert len(lines) == 1 + 2 + 1
    # the per-client bound does not depend on the fleet size
    b2 = float(lines[1].split(",")[1])
    b4 = float(lines[2].split(",")[1])
    assert abs(b2 - b4) < 1e-12


def test_fig1_rejects_bad_sweeps(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert cli.main(["fig1", "--config", cfg, "--sweep", "4,2"]) == 2
    # odd sizes break the 50/50 class split
    assert cli.main(["fig1", "--config", cfg, "--sweep", "3,5"]) == 2
    capsys.readouterr()


def test_fig2_csv_and_determinism(tmp_path):
    cfg = small_config(tmp_path)
    a = tmp_path / "fig2a.csv"
    b = tmp_path / "fig2b.csv"
    assert cli.main(["fig2", "--config", cfg, "--etas", "0.05,0.5", "--out", str(a)]) == 0
    assert cli.main(["fig2", "--config", cfg, "--etas", "0.05,0.5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = read_lines(a)
    assert lines[0] == "eta,penalty_mean,penalty_se,energy_mean,energy_se"
    assert len(lines) == 1 + 2 + 1


def test_fig2_rejects_unsorted(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert cli.main(["fig2", "--config", cfg, "--etas", "0.5,0.05"]) == 2
    capsys.readouterr()


def test_default_fig2_grid():
    etas = cli.default_fig2_etas()
    assert len(etas) == 10
    assert etas[0] == 0.01 and abs(etas[-1] - 2.0) < 1e-12
    assert all(a < b for a, b in zip(etas, etas[1:]))


# === config errors ===


def test_missing_config(capsys):
    assert cli.main(["bound"]) == 2
    assert "config" in capsys.readouterr().err


def test_nonexistent_config(tmp_path, capsys):
    assert cli.main(["bound", "--config", str(tmp_path / "nope.json")]) == 2
    capsys.readouterr()


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["bound", "--config", str(bad)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_unknown_scenario_key(tmp_path, capsys):
    sc = headline_scenario(10)
    d = scenario_to_dict(sc)
    d["surprise"] = 1
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(d))
    assert cli.main(["bound", "--config", str(path)]) == 2
    assert "surprise" in capsys.readouterr().err


# === oracle suite ===


def test_oracle_suite_passes_on_reduced_scenario(tmp_path):
    sc = make_scenario(
        [(0.5, 2, 1.0, 0.5), (0.7, 3, 1.0, 0.5)], 2, 0.5, 0.1,
        horizon_slots=20_000, replications=5, master_seed=20240817,
    )
    result = cli.run_small_oracle_suite(sc)
    assert result["passed"]
    for name in ("indifference_identities", "closed_form_vs_chain",
                 "truncation_equivalence", "dp_sandwich", "permutation_invariance"):
        assert result["checks"][name]["passed"], name


def test_oracle_suite_cli_exit_zero(tmp_path):
    cfg = suite_config(tmp_path)
    out = tmp_path / "suite.json"
    assert cli.main(["oracle-suite", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["passed"] is True


def test_oracle_suite_detects_corruption(tmp_path, monkeypatch):
    # a deliberately wrong index formula must trip the indifference check
    true_index = bandit.whittle_index

    def crooked(cls, eta, age):
        return true_index(cls, eta, age) + 0.01

    monkeypatch.setattr(bandit, "whittle_index", crooked)
    check = cli._check_indifference()
    assert not check["passed"]
    assert check["max_residual"] > 1e-6


def test_oracle_suite_cli_exit_three(tmp_path, monkeypatch):
    cfg = suite_config(tmp_path)

    def rigged(*args, **kwargs):
        return {"passed": False, "max_residual": 1.0, "tolerance": 0.0}

    monkeypatch.setattr(cli, "_check_indifference", rigged)
    out = tmp_path / "suite.json"
    assert cli.main(["oracle-suite", "--config", cfg, "--out", str(out)]) == 3
    assert json.loads(out.read_text())["passed"] is False
