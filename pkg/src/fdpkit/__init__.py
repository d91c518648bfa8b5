"""Differential privacy accounting on trade-off curves."""
from .curve import (DiscreteDistribution, DominanceOrder, SymmetrizeMode, TradeoffCurve,
                    compare, conjugate, evaluate, from_distribution_pair, identity, invert,
                    make_eps_delta, make_gaussian, max_divergence, renyi, symmetrize,
                    total_variation, zero_curve)
from .duality import delta_at_eps, eps_at_delta, hockey_stick, privacy_profile
from .errors import (AccountingError, ConstructionError, DomainError, ResourceError,
                     SearchExhaustedError)

__version__ = "0.1.0"
