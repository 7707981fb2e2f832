"""Lawler QAP solvers: learned association-graph matchers, spectral and random-walk baselines."""

from ._core import (
    ConvergenceError,
    InvalidArgument,
    Model,
    NumericalError,
    ParseError,
    SizeLimitError,
    SynthConfig,
    __version__,
    affinity_matrix,
    delaunay,
    hungarian,
    kb_objective,
    kb_to_lawler,
    lawler_objective,
    parse_qaplib,
    qaplib_objective,
    rrwm,
    sinkhorn,
    spectral_match,
    synchronize,
    synthetic_pair,
)

__all__ = [
    "ConvergenceError",
    "InvalidArgument",
    "Model",
    "NumericalError",
    "ParseError",
    "SizeLimitError",
    "SynthConfig",
    "__version__",
    "affinity_matrix",
    "delaunay",
    "hungarian",
    "kb_objective",
    "kb_to_lawler",
    "lawler_objective",
    "parse_qaplib",
    "qaplib_objective",
    "rrwm",
    "sinkhorn",
    "spectral_match",
    "synchronize",
    "synthetic_pair",
]
