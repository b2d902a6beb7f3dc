import json
import math
import os
import pathlib

import pytest

import fedsim_sim as fs


def test_tau_round_trip_and_published_value():
    tau = fs.tau_from_sigma(0.4, 21178.86)
    assert abs(tau - 5.1e-5) / 5.1e-5 < 0.02
    assert fs.sigma_from_tau(tau, 21178.86) == pytest.approx(0.4, rel=1e-6)
    assert fs.tau_from_sigma(1.0, 1.0) == pytest.approx(math.erf(0.5), abs=1e-12)


def test_infeasible_budget_raises():
    with pytest.raises(fs.InfeasibleBudgetError):
        fs.sigma_from_tau(fs.tau_floor(1.0) * 0.5, 1.0)
    with pytest.raises(fs.FedSimError):
        fs.tau_from_sigma(0.0, 1.0)


def test_per_pair_success_inside_ci():
    rate, lo, hi = fs.per_pair_distance_success(20000, 0.4, 2.0, 3)
    assert lo <= rate <= hi
    tau = fs.tau_from_sigma(0.4, 2.0)
    assert abs(rate - tau) < 4 * math.sqrt(tau * (1 - tau) / 20000)


def test_encoding_and_distances():
    a = fs.encode_string("smith", seed=5)
    assert len(a) == 64 and set(a) <= {"0", "1"}
    assert fs.hamming_distance(a, a) == 0
    assert fs.hamming_distance("1010", "0110") == 2
    assert fs.levenshtein_distance("kitten", "sitting") == 3


def test_top_k_matches_brute_force():
    a = [[0.0, 0.0], [5.0, 5.0]]
    b = [[4.0, 4.0], [0.1, 0.0], [9.0, 9.0], [0.0, 1.0]]
    t = fs.top_k_numeric(a, b, 2)
    assert t["k"] == 2
    assert t["neighbors"] == [1, 3, 0, 2]
    s = fs.top_k_strings(["smith"], ["smyth", "jones", "smith"], 1)
    assert s["neighbors"] == [2]
    assert s["distances"] == [0.0]


def test_run_experiment_is_deterministic(tmp_path):
    config_dir = pathlib.Path(os.environ.get("FEDSIM_CONFIG_DIR", pathlib.Path(__file__).parents[2] / "configs"))
    cfg = json.loads((config_dir / "quick.json").read_text())
    cfg["epochs"] = 2
    cfg["seeds"] = [0]
    cfg["output_dir"] = str(tmp_path / "a")
    r1 = fs.run_experiment(cfg)
    cfg["output_dir"] = str(tmp_path / "b")
    r2 = fs.run_experiment(cfg)
    assert r1 == r2
    assert r1["algorithm"] == "fedsim"
    assert 0.0 <= r1["seeds"][0]["test"]["accuracy"] <= 1.0


def test_bad_config_raises():
    with pytest.raises(fs.ConfigError):
        fs.run_experiment({"algorithm": "fedsim", "bogus": 1})
