"""Two-pass day-ahead market simulation with flexible ramping products.

Pipeline: sample intra-hourly net-load scenarios, solve a stochastic unit
commitment, derive hourly up/down ramping requirements from its served
net load, clear the hourly day-ahead market (several procurement
variants) with dual-based energy and ramping prices, then evaluate each
variant out of sample through a rolling fifteen-minute market with
two-settlement accounting.
"""

from .damc import (CI95, NF, PROPOSED, VARIANTS, WITHOUT, build_damc,
                   solve_and_price)
from .fmm import run_fmm_sequence
from .frp import compute_ci95_requirements, compute_frp_requirements
from .instance import (Dg, HourlyBidDemand, Line, SystemInstance, TimeGrid,
                       compute_hourly_bid_demand, load_instance, save_instance)
from .network import compute_isf, line_flows
from .pipeline import RunConfig, emit_report, run_experiment, sweep_sample_size
from .scenario import hourly_system_ci, sample_scenarios
from .settlement import aggregate, settle
from .suc import build_suc, solve_suc

__version__ = "0.1.0"
