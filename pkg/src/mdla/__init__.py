"""Exact simulation and analytics for multi-particle diffusion limited aggregation."""

from .barrier import Barrier, PermissiveProfile, barrier_eval, barrier_gap, permissive_check
from .core import (
    LeakageWarning,
    RunRecord,
    SimConfig,
    WindowBudgetError,
    detect_regenerations,
    s_estimate,
    s_lower_bound,
    simulate_1d,
)
from .field import FieldConfig, SiteOccupancy, materialize_window, site_count
from .fitting import FitResult, fit_exponent, fit_speed
from .front import FrontPath, speed_event, y_query
from .highdim import AggregateSet, RaceResult, conforming_count, race_monte_carlo, race_stats, simulate_d, speed_threshold
from .runner import ExperimentConfig, run_experiment
from .walk import (
    HorizonError,
    SurvivalEstimate,
    WalkLaw,
    barrier_survival,
    conditioned_endpoint,
    max_tail,
    max_zero_prob,
    psi,
    theta_root,
    walk_pmf,
)

__version__ = "0.1.0"
