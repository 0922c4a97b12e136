"""Generalized Ornstein rank-one transformations and their Riesz-product spectra."""

__version__ = "0.1.0"

from .construction import (
    OrnsteinParams,
    SpacerRealization,
    StageGeometry,
    heights,
    make_params,
    sample_realization,
    spacers_from_realization,
    stage_geometry,
    validate_params,
)
from .distributions import TablePmf, UniformPmf
from .trigpoly import PhiFunction, SparseTrigPoly, build_pk, modulus_squared, phi_of_distribution, split_polys
