"""Consumption factor (capacity per consumed watt) of multihop AF/DF relay
chains over Nakagami-m fading, with power-allocation strategies."""

from .channel import HopProfile, PowerModel, Protocol, RelayChain, uniform_chain
from .errors import ConfigError, DomainError, NumericalError, RelayCFError
from .metrics import CfResult, SeriesControl, average_cf, cf_af, cf_df, cf_df_rayleigh, ergodic_capacity
from .montecarlo import McConfig, McEstimate, estimate_capacity, estimate_cf, estimate_outage
from .optimizer import STRATEGIES, Allocation, SolverOptions, allocate, cfopa, cfso_upa, cfsopa, copa, upa
from .scenario import Scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "HopProfile",
    "PowerModel",
    "Protocol",
    "RelayChain",
    "uniform_chain",
    "RelayCFError",
    "ConfigError",
    "DomainError",
    "NumericalError",
    "CfResult",
    "SeriesControl",
    "average_cf",
    "cf_af",
    "cf_df",
    "cf_df_rayleigh",
    "ergodic_capacity",
    "McConfig",
    "McEstimate",
    "estimate_capacity",
    "estimate_cf",
    "estimate_outage",
    "STRATEGIES",
    "Allocation",
    "SolverOptions",
    "allocate",
    "cfopa",
    "cfso_upa",
    "cfsopa",
    "copa",
    "upa",
    "Scenario",
    "load_scenario",
    "parse_scenario",
]
