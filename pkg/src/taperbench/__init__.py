"""Sparse linear solver benchmark over tapered and conventional machine
number formats.

Scalar codecs and arithmetic live in the kernel layer (compiled extension
with a pure-Python fallback); everything above it (matrix ingestion,
fill-reducing orderings, LU/QR, GMRES, mixed-precision refinement, the
experiment harness and CLI) is format-generic.
"""

from .formats import (
    ALL_FORMATS,
    BFLOAT16,
    FLOAT16,
    FLOAT32,
    FLOAT64,
    FLOAT8_E4M3,
    POSIT16,
    POSIT32,
    POSIT64,
    POSIT8,
    TAKUM16,
    TAKUM32,
    TAKUM64,
    TAKUM8,
    FormatId,
    parse_format,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "ALL_FORMATS", "BACKEND", "FormatId", "parse_format", "__version__",
    "FLOAT16", "FLOAT32", "FLOAT64", "BFLOAT16", "FLOAT8_E4M3",
    "POSIT8", "POSIT16", "POSIT32", "POSIT64",
    "TAKUM8", "TAKUM16", "TAKUM32", "TAKUM64",
]
