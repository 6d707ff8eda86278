"""Multipath search and per-path field evaluation."""

from .antenna import DIPOLE, DIPOLE_PEAK_GAIN, ISOTROPIC, Antenna, dipole_gain
from .field import evaluate_path, evaluate_paths
from .finder import PathFinder, find_paths
from .model import (SPEED_OF_LIGHT, BudgetError, Diffraction, InteractionBudget, PropagationPath,
                    Reflection, Transmission, dump_paths_jsonl, interaction_key)
from .utd import EdgePolarization, fermat_diffraction_point, transition_function, utd_coefficient

__all__ = [
    "Antenna", "DIPOLE", "ISOTROPIC", "DIPOLE_PEAK_GAIN", "dipole_gain",
    "evaluate_path", "evaluate_paths", "PathFinder", "find_paths",
    "SPEED_OF_LIGHT", "BudgetError", "InteractionBudget", "PropagationPath",
    "Reflection", "Diffraction", "Transmission", "dump_paths_jsonl", "interaction_key",
    "EdgePolarization", "fermat_diffraction_point", "transition_function", "utd_coefficient",
]
