"""Restricted formula language: parsing, sandbox validation and structural analysis."""

from factor_forge.dsl.analysis import (
    ComplexityProfile,
    canonical_text,
    canonicalize,
    formula_similarity,
    measure_complexity,
)
from factor_forge.dsl.family import THEMES, Family, classify_family, infer_family, parse_family
from factor_forge.dsl.nodes import FormulaAst
from factor_forge.dsl.parser import FormulaSyntaxError, from_python_ast, parse_formula
from factor_forge.dsl.registry import (
    FIELDS,
    OperatorKind,
    OperatorRegistry,
    OperatorSpec,
    RegistryError,
    default_registry,
    load_registry,
    register_operators,
)
from factor_forge.dsl.render import render
from factor_forge.dsl.sandbox import (
    Layer,
    SandboxPolicy,
    ValidationReport,
    validate,
    validate_complexity,
    validate_semantics,
    validate_structure,
)

__all__ = [
    "FIELDS",
    "THEMES",
    "ComplexityProfile",
    "Family",
    "FormulaAst",
    "FormulaSyntaxError",
    "Layer",
    "OperatorKind",
    "OperatorRegistry",
    "OperatorSpec",
    "RegistryError",
    "SandboxPolicy",
    "ValidationReport",
    "canonical_text",
    "canonicalize",
    "classify_family",
    "default_registry",
    "formula_similarity",
    "from_python_ast",
    "infer_family",
    "load_registry",
    "measure_complexity",
    "parse_family",
    "parse_formula",
    "register_operators",
    "render",
    "validate",
    "validate_complexity",
    "validate_semantics",
    "validate_structure",
]
