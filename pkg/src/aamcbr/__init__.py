"""Abstract argumentation for case-based reasoning, with language-model agents
standing in for case factorization."""

from .agents import run_aam_cbr
from .argumentation import AAFramework, GroundedExtension, grounded, is_in_grounded
from .backends import CachingBackend, HttpBackend, NoisyOracleBackend, OracleBackend
from .domain import (
    CREDIT_DOMAIN,
    Case,
    CaseBase,
    ConsistencyViolation,
    Factor,
    FactorDomain,
    check_consistency,
    complement,
)
from .estimators import AACBRClassifier, AAMCBRClassifier
from .reasoner import aacbr_outcome, build_framework, case_attacks, dispute_tree, is_irrelevant

__all__ = [
    "AAFramework",
    "AACBRClassifier",
    "AAMCBRClassifier",
    "CREDIT_DOMAIN",
    "CachingBackend",
    "Case",
    "CaseBase",
    "ConsistencyViolation",
    "Factor",
    "FactorDomain",
    "GroundedExtension",
    "HttpBackend",
    "NoisyOracleBackend",
    "OracleBackend",
    "aacbr_outcome",
    "build_framework",
    "case_attacks",
    "check_consistency",
    "complement",
    "dispute_tree",
    "grounded",
    "is_in_grounded",
    "is_irrelevant",
    "run_aam_cbr",
]

__version__ = "0.1.0"
