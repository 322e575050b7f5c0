"""Monte Carlo pricing of vanilla options under a Dupire local volatility
surface, with pathwise adjoint sensitivities to every surface node."""

__version__ = "0.1.0"

from .adjoint import SensitivityReport, greeks
from .bump import bump_all, bump_node, bump_spot, bump_uniform
from .engine import Payoff, PayoffKind, PriceEstimate, Scheme, SimConfig, black_scholes_call, price
from .numerics import PrecisionMode, Welford, round_bf16
from .rng import RngKey
from .surface import InterpBackend, VolSurface, new_surface, synthetic_surface

__all__ = [
    "InterpBackend",
    "Payoff",
    "PayoffKind",
    "PrecisionMode",
    "PriceEstimate",
    "RngKey",
    "Scheme",
    "SensitivityReport",
    "SimConfig",
    "VolSurface",
    "Welford",
    "black_scholes_call",
    "bump_all",
    "bump_node",
    "bump_spot",
    "bump_uniform",
    "greeks",
    "new_surface",
    "price",
    "round_bf16",
    "synthetic_surface",
]
