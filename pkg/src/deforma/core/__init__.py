from .diffops import DiffOp, diffop_compose, diffop_exp
from .jets import EXACT, Jet, VarSet, jet_arith, jet_transcend
from .nu import POLY, NuObject
from .scalar import I, GaussianRational, as_scalar, parse_rational, scalar_str

__all__ = [
    "DiffOp", "diffop_compose", "diffop_exp",
    "EXACT", "Jet", "VarSet", "jet_arith", "jet_transcend",
    "POLY", "NuObject",
    "I", "GaussianRational", "as_scalar", "parse_rational", "scalar_str",
]
