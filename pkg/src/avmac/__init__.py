"""Arbitrarily varying multiple-access channels with conferencing encoders."""

__version__ = "0.1.0"

from .channel import ChannelSpec, builtin_channel, mixture_channel, product_probability, validate_channel
from .errors import AvmacError, ComputationError, InputError
from .infotheory import InputPolicy, MiTerms, joint_distribution, mi_terms
from .region import (RatePolytope, RegionApproximation, capacity_region, cooperation_thresholds,
                     deterministic_capacity, nonconferencing_verdict, rate_region, robust_bounds)
from .symmetrizability import SymmetrizerCertificate, check_symmetrizable, verify_certificate

__all__ = [
    "AvmacError", "ChannelSpec", "ComputationError", "InputError", "InputPolicy", "MiTerms", "RatePolytope",
    "RegionApproximation", "SymmetrizerCertificate", "builtin_channel", "capacity_region",
    "check_symmetrizable", "cooperation_thresholds", "deterministic_capacity", "joint_distribution",
    "mi_terms", "mixture_channel", "nonconferencing_verdict", "product_probability", "rate_region",
    "robust_bounds", "validate_channel", "verify_certificate",
]
