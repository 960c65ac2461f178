"""Numerical verification of gradient Ricci solitons in dimension four."""
from .expr import Expr, parse, to_string, eval_jet
from .jets import Jet
from .geometry import MetricField, TensorValue, CurvatureStack

__all__ = ["Expr", "parse", "to_string", "eval_jet", "Jet", "MetricField", "TensorValue", "CurvatureStack"]
__version__ = "0.1.0"
