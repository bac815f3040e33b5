"""Counting and equidistribution experiments for integer matrix orbits on
boundary circles and projective spaces."""

from latorbit.group import (
    BorelCoords,
    GroupElement,
    IwasawaCoords,
    borel_matrix,
    borel_norm_sq,
    delta,
    frobenius_norm,
    iwasawa_decompose,
    squared_exp_sum,
)

__all__ = [
    "BorelCoords",
    "GroupElement",
    "IwasawaCoords",
    "borel_matrix",
    "borel_norm_sq",
    "delta",
    "frobenius_norm",
    "iwasawa_decompose",
    "squared_exp_sum",
]

__version__ = "0.1.0"
