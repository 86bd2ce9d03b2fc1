"""Capacity regions for Gaussian multiple access channels with energy-harvesting nodes."""

from .types import (
    ConstraintSpec,
    DiscreteInput,
    GaussianMixture,
    HarvestProcess,
    JointHarvest,
    Pentagon,
    RatePair,
    RateRegion,
    convex_hull,
    convolve,
    second_moment,
    sum_independent,
)
from .mi import (
    QuadratureError,
    QuadratureSpec,
    gaussian_entropy,
    mac_mi_triple,
    marginal_information_density,
    mixture_entropy,
    mutual_information,
)

__all__ = [
    "ConstraintSpec",
    "DiscreteInput",
    "GaussianMixture",
    "HarvestProcess",
    "JointHarvest",
    "Pentagon",
    "QuadratureError",
    "QuadratureSpec",
    "RatePair",
    "RateRegion",
    "convex_hull",
    "convolve",
    "gaussian_entropy",
    "mac_mi_triple",
    "marginal_information_density",
    "mixture_entropy",
    "mutual_information",
    "second_moment",
    "sum_independent",
]

__version__ = "0.1.0"
