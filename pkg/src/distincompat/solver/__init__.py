"""Dense conic interior-point solver and a small Hermitian modeling layer."""
from .ipm import SolverResult, SolverTolerances, solve
from .model import HExpr, Model, SExpr, Solution, hsum, scaled_identity
from .program import (ConicProgram, IllPosedProgram, NonnegBlock, PsdBlock,
                      dualize, dump_triplets, load_triplets)

__all__ = [
    "ConicProgram", "IllPosedProgram", "NonnegBlock", "PsdBlock", "dualize",
    "dump_triplets", "load_triplets", "SolverResult", "SolverTolerances", "solve",
    "HExpr", "Model", "SExpr", "Solution", "hsum", "scaled_identity",
]
