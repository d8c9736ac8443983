"""Exact, jet-level verification of dynamical r-matrices and their quantization."""

__version__ = "0.1.0"

from .coeff import JetScalar, PolyContext, RationalFunction, TruncationConfig
from .dynamical_r import (
    DynamicalRMatrix,
    cdybe_residual,
    compose_classical,
    dr_apply,
    nondegeneracy_certificate,
    splitting_r_matrix,
)
from .errors import *  # noqa: F401,F403
from .fedosov import FedosovEngine, lemma_tech_compare
from .lie import EnvTensor, LieAlgebraData, PolyVectorField, jacobi_check, pbw_star, schouten_bracket, sl2, so3
from .twist import CompatibleStar, extract_twist, twist_equation_residual

__all__ = [
    "__version__",
    "JetScalar",
    "PolyContext",
    "RationalFunction",
    "TruncationConfig",
    "DynamicalRMatrix",
    "cdybe_residual",
    "compose_classical",
    "dr_apply",
    "nondegeneracy_certificate",
    "splitting_r_matrix",
    "FedosovEngine",
    "lemma_tech_compare",
    "EnvTensor",
    "LieAlgebraData",
    "PolyVectorField",
    "jacobi_check",
    "pbw_star",
    "schouten_bracket",
    "sl2",
    "so3",
    "CompatibleStar",
    "extract_twist",
    "twist_equation_residual",
]
