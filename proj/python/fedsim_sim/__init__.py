"""Python bindings for the fedsim simulator core."""

import json

from ._core import (
    ConfigError,
    FedSimError,
    InfeasibleBudgetError,
    InputError,
    ProtocolError,
    StageError,
    attack_success,
    encode_string,
    expected_disclosures,
    hamming_distance,
    levenshtein_distance,
    per_pair_distance_success,
    run_experiment_json as _run_experiment_json,
    sigma_from_tau,
    tau_floor,
    tau_from_sigma,
    top_k_numeric,
    top_k_strings,
)


def run_experiment(config):
    """Run one experiment from a config dict; returns the metrics report as a dict."""
    return json.loads(_run_experiment_json(json.dumps(config)))


__all__ = [
    "ConfigError",
    "FedSimError",
    "InfeasibleBudgetError",
    "InputError",
    "ProtocolError",
    "StageError",
    "attack_success",
    "encode_string",
    "expected_disclosures",
    "hamming_distance",
    "levenshtein_distance",
    "per_pair_distance_success",
    "run_experiment",
    "sigma_from_tau",
    "tau_floor",
    "tau_from_sigma",
    "top_k_numeric",
    "top_k_strings",
]
