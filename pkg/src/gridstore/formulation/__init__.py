from .builder import (
    ExtractionError,
    add_market_participation,
    add_market_participation_fixed_grid,
    add_no_load_shedding,
    build_experiment_model,
    build_full_model,
    compute_bigM,
    effective_specs,
    extract_solution,
    fix_investments,
)
from .config import CAPACITY_PRICE, BigMConstants, ExperimentConfig, default_experiments
from .milp import MilpModel

__all__ = [
    "BigMConstants", "CAPACITY_PRICE", "ExperimentConfig", "ExtractionError", "MilpModel",
    "add_market_participation", "add_market_participation_fixed_grid", "add_no_load_shedding",
    "build_experiment_model", "build_full_model", "compute_bigM", "default_experiments",
    "effective_specs", "extract_solution", "fix_investments",
]
