"""Currency-option pricing with Garman-Kohlhagen and variance gamma models.

Modules: specfun (special functions and quadrature), vgcore (VG law),
pricing, calibration, marketdata, evaluation and cli.
"""
from .calibration import CalibrationResult, SimplexConfig, fit_historical, fit_weekly_risk_neutral, nelder_mead
from .pricing import OptionSpec, price, price_gk, price_vg, price_vg_closed, price_vg_mc, price_vg_mixing
from .specfun import QuadratureSpec
from .vgcore import DensityParams, DomainError, GkParams, MarketEnv, VgParams

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult", "DensityParams", "DomainError", "GkParams", "MarketEnv", "OptionSpec",
    "QuadratureSpec", "SimplexConfig", "VgParams", "fit_historical", "fit_weekly_risk_neutral",
    "nelder_mead", "price", "price_gk", "price_vg", "price_vg_closed", "price_vg_mc",
    "price_vg_mixing",
]
