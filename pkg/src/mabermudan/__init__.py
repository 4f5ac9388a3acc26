"""Bermudan moving-average call pricing by GPR-GHQ, a binomial chain and Longstaff-Schwartz."""
from .bench import evaluate_policy, paths_for_ci
from .engine_bc import price_bc
from .engine_gprghq import ContinuationSurrogate, GprGhqConfig, export_surrogate
from .engine_gprghq import price as price_gprghq
from .engine_ls import LsConfig, price_ls
from .errors import DomainError, EngineError, NumericalError, ResourceGuardError
from .models import BlackScholesParams, ClewlowStricklandParams, RoughBergomiParams
from .results import PriceResult
from .state import OptionSpec

__all__ = [
    "BlackScholesParams", "ClewlowStricklandParams", "ContinuationSurrogate", "DomainError",
    "EngineError", "GprGhqConfig", "LsConfig", "NumericalError", "OptionSpec", "PriceResult",
    "ResourceGuardError", "RoughBergomiParams", "evaluate_policy", "export_surrogate",
    "paths_for_ci", "price_bc", "price_gprghq", "price_ls",
]
