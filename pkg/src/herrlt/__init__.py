"""Herr complexes for Lubin-Tate extensions over finite quotients O_E / pi^n."""

from .cohomlinalg import (CohomologyResult, complex_cohomology, h0_exact, psi_fixed_and_coker, snf,
                          window_restrict)
from .complexes import build_complex, herr_FT, herr_LT, herr_psi_FT, herr_psi_LT, iwasawa_complex
from .formalgroup import FormalGroup, build_group_law, endomorphism, invariant_dlog
from .frobpsi import OperatorContext
from .okring import BaseField, OKElem
from .phigamma import EtaleModule, ModuleElem, module_from_text, module_to_text, validate
from .series import LaurentElem, MultiSeries

__version__ = "0.1.0"

__all__ = [
    "BaseField", "OKElem", "LaurentElem", "MultiSeries", "FormalGroup", "build_group_law", "endomorphism",
    "invariant_dlog", "OperatorContext", "EtaleModule", "ModuleElem", "module_from_text", "module_to_text",
    "validate", "build_complex", "herr_LT", "herr_psi_LT", "herr_FT", "herr_psi_FT", "iwasawa_complex",
    "snf", "window_restrict", "h0_exact", "complex_cohomology", "psi_fixed_and_coker", "CohomologyResult",
]
