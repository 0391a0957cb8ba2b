"""Experiment orchestration, reporting and the command line interface."""

from .experiment import (
    ExperimentSpec,
    RetrievalOutcome,
    RunRecord,
    RunStore,
    aggregate,
    pose_error,
    read_records_csv,
    report,
    run_ablation,
    run_iou_sweep,
    run_retrieval_experiment,
    run_seed,
    success_rate,
    write_records_csv,
)

__all__ = [
    "ExperimentSpec", "RetrievalOutcome", "RunRecord", "RunStore", "aggregate", "pose_error",
    "read_records_csv", "report", "run_ablation", "run_iou_sweep", "run_retrieval_experiment",
    "run_seed", "success_rate", "write_records_csv",
]
