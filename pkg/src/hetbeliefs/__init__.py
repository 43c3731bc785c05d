"""Heterogeneous-beliefs dividend economy with a partially observed state.

Core layers: model (parameters and beliefs), filtering (covariance ODE and
steady-state filter), simulate (seeded path generation), economy (stacked
dynamics and pricing kernel), pricing (exponential-quadratic ODE system,
quadrature, and Monte Carlo oracles).  A FastAPI service wraps the core;
the CLI is a thin client of the service.
"""

__version__ = "0.1.0"

from .errors import ConfigError, HetBeliefsError, NumericalError, ValidationError
from .model import (AgentBelief, BlockDecomposition, MarketParams, StabilityReport,
                    decompose_belief, load_config, parse_config, validate_stability)
from .filtering import (CovarianceState, FilterState, cov_rhs, filter_step,
                        innovation_increment, integrate_covariance, prepare_beliefs,
                        stationary_covariance, stationary_residual)
from .simulate import PathBundle, SimConfig, lambda_hat_path, simulate_truth
from .economy import (EconomyCoefficients, assemble_economy, log_spd_increment,
                      market_price_of_risk, riskless_rate, stacked_step)
from .pricing import (PriceQuote, RiccatiSolution, eval_dVT_dtheta, eval_VT,
                      mc_oracle_VT, mc_price_oracle, ode_rhs, solve_riccati,
                      stock_price)

__all__ = [
    "__version__",
    "ConfigError", "HetBeliefsError", "NumericalError", "ValidationError",
    "AgentBelief", "BlockDecomposition", "MarketParams", "StabilityReport",
    "decompose_belief", "load_config", "parse_config", "validate_stability",
    "CovarianceState", "FilterState", "cov_rhs", "filter_step",
    "innovation_increment", "integrate_covariance", "prepare_beliefs",
    "stationary_covariance", "stationary_residual",
    "PathBundle", "SimConfig", "lambda_hat_path", "simulate_truth",
    "EconomyCoefficients", "assemble_economy", "log_spd_increment",
    "market_price_of_risk", "riskless_rate", "stacked_step",
    "PriceQuote", "RiccatiSolution", "eval_dVT_dtheta", "eval_VT",
    "mc_oracle_VT", "mc_price_oracle", "ode_rhs", "solve_riccati", "stock_price",
]
