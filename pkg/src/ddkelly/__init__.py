"""Drawdown-constrained growth-optimal portfolios.

The Azema-Yor transform turns any wealth path into one that never falls
below a fixed fraction of its running maximum; applied to the numeraire
(Kelly) portfolio it yields the optimal drawdown-constrained investment.
The package simulates Ito markets, builds these portfolios and checks their
properties by exact pathwise identities and Monte Carlo experiments.
"""

from .errors import (
    ConstraintViolationError, InvalidInputError, NoNumeraireError, SimulationError,
)
from .horizon import (
    CycleTimes, ZetaSample, cycle_times, drawdown_race, finite_horizon_numeraire,
    growth_rate_experiment, horizon_ratio_oscillation, ks_test, oscillation_stats,
    turnpike_experiment, zeta_analytic_cdf, zeta_pareto_cdf, zeta_samples,
)
from .market import (
    MarketModel, SimBatch, dds_preset, gbm_preset, numeraire_path,
    pseudo_inverse_drift_solve, simulate_batch, wealth_from_proportions,
)
from .paths import (
    INFINITY, SampledPath, TimeGrid, first_drawdown_hit, first_hit_level,
    is_time_of_maximum, relative_drawdown, running_max,
)
from .relative import (
    MCEstimate, err_mc, maxima_supermartingale_check, phi_process, rr_at,
    rr_inequality_check,
)
from .rng import seed_for_path
from .transform import (
    az_forward, az_inverse, constrained_wealth_direct, kelly_fraction, verify_drawdown,
)

__version__ = "0.1.0"
