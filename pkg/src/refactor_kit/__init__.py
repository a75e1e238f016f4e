"""Proof-tree tooling for Metamath databases.

Parse and verify .mm databases, view proofs as trees, inline assertion
applications to build node-labeled training graphs, extract new theorems
from selected proof regions, and rewrite a library against a set of
extracted theorems.
"""

from refactor_kit.database import (
    Assertion,
    ConclusionMismatchError,
    Database,
    DisjointnessError,
    Expr,
    Hypothesis,
    IncompleteProofError,
    MMError,
    MMSyntaxError,
    MMVerifyError,
    ReplayFrame,
    StackUnderflowError,
    UnificationError,
    UnknownLabelError,
    apply_subst,
    dv_pair,
    parse_database,
    parse_file,
    truncate_after,
    verify_assertion,
    verify_proof,
    write_mm,
)

__version__ = "0.1.0"

__all__ = [
    "Assertion",
    "ConclusionMismatchError",
    "Database",
    "DisjointnessError",
    "Expr",
    "Hypothesis",
    "IncompleteProofError",
    "MMError",
    "MMSyntaxError",
    "MMVerifyError",
    "ReplayFrame",
    "StackUnderflowError",
    "UnificationError",
    "UnknownLabelError",
    "apply_subst",
    "dv_pair",
    "parse_database",
    "parse_file",
    "truncate_after",
    "verify_assertion",
    "verify_proof",
    "write_mm",
    "__version__",
]
