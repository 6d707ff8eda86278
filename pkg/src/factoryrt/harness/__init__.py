"""Batch runs, model comparison, material tuning and the command line."""

from .analysis import (COARSE_GRID, DEFAULT_WEIGHTS, METRICS, ComparisonReport, DistributionSummary,
                       TuningGrid, TuningResult, compare_rmse, envelope_material, summarize_distribution,
                       tune_material, tune_material_full)
from .io import CSV_HEADER, read_results_csv, write_json, write_results_csv
from .models import ENVELOPE_ID, PRESET_NAMES, HarnessError, ModelSpec, paper_models
from .runner import LinkTrace, RunResult, evaluate_traces, factory_scene, run_p2mp
from .study import StudyResult, link_mask, run_study, write_study

__all__ = [
    "COARSE_GRID", "DEFAULT_WEIGHTS", "METRICS", "ComparisonReport", "DistributionSummary",
    "TuningGrid", "TuningResult", "compare_rmse", "envelope_material", "summarize_distribution",
    "tune_material", "tune_material_full", "CSV_HEADER", "read_results_csv", "write_json",
    "write_results_csv", "ENVELOPE_ID", "PRESET_NAMES", "HarnessError", "ModelSpec", "paper_models",
    "LinkTrace", "RunResult", "evaluate_traces", "factory_scene", "run_p2mp", "StudyResult",
    "link_mask", "run_study", "write_study",
]
