"""Hourly flexible-ramping requirement derivation.

Requirements come from the *served* net load of the optimal stochastic
commitment: curtailed load is excluded, so a spike the first pass chose
not to serve does not inflate the ramping requirement.  The worst
subperiod-to-subperiod change within an hour, across all scenarios, is
scaled by the number of subperiods per hour to express it at hourly
granularity.  Negative requirements are kept as-is; the procurement
constraints remain valid and clamping would alter prices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import hourly_system_ci

SUC_BASED = "suc_based"
CI95 = "ci95"


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True, eq=False)
class FrpRequirements:
    rho_up: np.ndarray  # (24,) MW
    rho_down: np.ndarray  # (24,) MW
    source: str

    def __post_init__(self):
        if self.rho_up.shape != self.rho_down.shape or self.rho_up.ndim != 1:
            raise DimensionMismatch("up/down requirements must be aligned hourly vectors")
        if not (np.all(np.isfinite(self.rho_up)) and np.all(np.isfinite(self.rho_down))):
            raise DimensionMismatch("requirements must be finite")


def served_net_load(scenarios, suc_solution):
    """System served net load per (scenario, subperiod): realized minus curtailed."""
    xi = scenarios.realizations  # (I, N, T)
    if suc_solution.pc.shape != xi.shape:
        raise DimensionMismatch(
            f"curtailment {suc_solution.pc.shape} vs scenarios {xi.shape}")
    return (xi - suc_solution.pc).sum(axis=1)


def compute_frp_requirements(scenarios, suc_solution, k_per_hour):
    """Worst served-net-load deltas per hour, scaled to hourly granularity.

    For hours 1..23 every subperiod in the hour contributes its forward
    delta, including the one crossing into the next hour.  Hour 24's last
    subperiod has no successor and is excluded.
    """
    served = served_net_load(scenarios, suc_solution)  # (I, T)
    t_total = served.shape[1]
    if t_total % k_per_hour:
        raise DimensionMismatch("scenario horizon is not a whole number of hours")
    hours = t_total // k_per_hour
    deltas = served[:, 1:] - served[:, :-1]  # delta at k is served[k+1]-served[k]
    rho_up = np.empty(hours)
    rho_down = np.empty(hours)
    for h in range(hours):
        lo = h * k_per_hour
        hi = min((h + 1) * k_per_hour, t_total - 1)
        window = deltas[:, lo:hi]
        if window.size == 0:  # K=1 final hour: no forward delta exists
            rho_up[h] = rho_down[h] = 0.0
            continue
        rho_up[h] = k_per_hour * window.max()
        rho_down[h] = -k_per_hour * window.min()
    return FrpRequirements(rho_up=rho_up, rho_down=rho_down, source=SUC_BASED)


def compute_ci95_requirements(instance, d_hat, confidence=0.95):
    """Benchmark requirements from the hourly net-load confidence interval."""
    lower, upper = hourly_system_ci(instance, confidence)
    total = d_hat.system_total
    return FrpRequirements(
        rho_up=upper - total, rho_down=total - lower, source=CI95)
