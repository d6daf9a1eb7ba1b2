"""Matroid toolkit and solvers for packing and covering with transversal bases."""

from .core import (
    ColouredInstance,
    GraphicMatroid,
    LinearMatroid,
    Matroid,
    UniformMatroid,
    build_instance,
    format_instance,
    instance_digest,
    load_instance,
    parse_instance,
)
from .cover import CoverConfig, cover
from .errors import ContractError, InstanceError, ParseError, RotaError, SizeCapError
from .pack import PackConfig, ReservoirConfig, pack
from .partition import decompose, deadlock, union_rank

__version__ = "0.1.0"

__all__ = [
    "ColouredInstance",
    "ContractError",
    "CoverConfig",
    "GraphicMatroid",
    "InstanceError",
    "LinearMatroid",
    "Matroid",
    "PackConfig",
    "ParseError",
    "ReservoirConfig",
    "RotaError",
    "SizeCapError",
    "UniformMatroid",
    "build_instance",
    "cover",
    "deadlock",
    "decompose",
    "format_instance",
    "instance_digest",
    "load_instance",
    "pack",
    "parse_instance",
    "union_rank",
]
