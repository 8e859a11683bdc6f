"""Numerical laboratory for maximal directional operators along lacunary direction sets."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    CellIndex,
    DirectionSet,
    GeometryError,
    cell_index,
    cone_membership,
    generate_equispaced,
    generate_nested_lacunary,
    generate_planar_lacunary,
    generate_product_lacunary,
    lacunarity_order,
    sector_index,
    wedge_membership,
)
from .kernels import BACKEND  # noqa: E402
from .operators import OperatorSpec  # noqa: E402
from .spectral import GridFunction, SymbolField, TorusGrid  # noqa: E402
from .weights import Weight, a2_constant, weighted_norm  # noqa: E402

__all__ = [
    "BACKEND",
    "CellIndex",
    "DirectionSet",
    "GeometryError",
    "GridFunction",
    "OperatorSpec",
    "SymbolField",
    "TorusGrid",
    "Weight",
    "a2_constant",
    "cell_index",
    "cone_membership",
    "generate_equispaced",
    "generate_nested_lacunary",
    "generate_planar_lacunary",
    "generate_product_lacunary",
    "lacunarity_order",
    "sector_index",
    "weighted_norm",
    "wedge_membership",
]
