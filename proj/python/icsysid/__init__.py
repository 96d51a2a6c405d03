"""Federated LTI system-identification laboratory.

Thin Python surface over the C++ core: model/trajectory primitives, the
training and clustering operations, fit metrics, and the JSON-driven
experiment runners (`run_suite_json`, `check_scenario_json`).
"""

from ._core import (
    LtiParams,
    MatrixNorm2,
    Rollout,
    SimulationResult,
    StabilityReport,
    aggregate_clusters,
    assign_identity,
    best_match_error,
    builtin_ground_truth,
    check_scenario_json,
    cluster_merge,
    delta_min,
    fit_per_state,
    generate_dataset,
    generate_rollout,
    least_squares_update,
    loss_gradient,
    misclassified_pct,
    mse_loss,
    param_error,
    predict_rollout,
    regularized_loss,
    render_report,
    run_suite_json,
    scaled_glorot_init,
    score_worker,
    simulate_rollout,
    stability_report,
    unstable_cluster_pct,
    warm_init,
)

__all__ = [
    "LtiParams",
    "MatrixNorm2",
    "Rollout",
    "SimulationResult",
    "StabilityReport",
    "aggregate_clusters",
    "assign_identity",
    "best_match_error",
    "builtin_ground_truth",
    "check_scenario_json",
    "cluster_merge",
    "delta_min",
    "fit_per_state",
    "generate_dataset",
    "generate_rollout",
    "least_squares_update",
    "loss_gradient",
    "misclassified_pct",
    "mse_loss",
    "param_error",
    "predict_rollout",
    "regularized_loss",
    "render_report",
    "run_suite_json",
    "scaled_glorot_init",
    "score_worker",
    "simulate_rollout",
    "stability_report",
    "unstable_cluster_pct",
    "warm_init",
]
