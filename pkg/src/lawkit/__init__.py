"""Symbolic model discovery with axiom-based auditing.

The package enumerates small expression trees (gentrees) whose leaves are
constant-times-monomial slots, fits each tree against a dataset, and audits
the resulting candidates against an axiom system: numerical error cells,
reasoning errors relative to the axiom-implied function, generalization
behaviour over boxes, variable-dependence flags, physical-constraint
tallies, and isotherm template matching.
"""

from .dataio import DataError, Dataset, add_extra_point, load_dataset
from .dims import dim_feasible, leaf_unit, parse_unit_spec
from .expr import (
    Div,
    DomainError,
    Formula,
    GenTree,
    Leaf,
    LMonomial,
    ParseError,
    Prod,
    Sum,
    Unary,
    bind,
    complexity,
    depth,
    eval_masked,
    evaluate,
    leaf_slots,
    parse,
    serialize,
)
from .fit import (
    FitResult,
    PowerAssignment,
    SearchConfig,
    fit_gentree,
    inner_fit_constants,
    validate_result,
)
from .gentrees import OperatorSet, enumerate_gentrees
from .reason import (
    AuditReport,
    AxiomError,
    AxiomSystem,
    CounterExample,
    DomainVerdict,
    NoConvergence,
    NumericalErrors,
    TemplateMatch,
    ThermoReport,
    audit_candidate,
    counterexample_search,
    dependence_analysis,
    generalization_error,
    numerical_errors,
    parse_axiom_file,
    pointwise_errors,
    reference_values,
    solve_axioms,
    template_match,
    thermo_check,
    verify_domain,
)
from .search import pareto_of_run, run_search
from .select import ParetoPoint, knee_point

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "AxiomError",
    "AxiomSystem",
    "CounterExample",
    "DataError",
    "Dataset",
    "Div",
    "DomainError",
    "DomainVerdict",
    "FitResult",
    "Formula",
    "GenTree",
    "Leaf",
    "LMonomial",
    "NoConvergence",
    "NumericalErrors",
    "OperatorSet",
    "ParetoPoint",
    "ParseError",
    "PowerAssignment",
    "Prod",
    "SearchConfig",
    "Sum",
    "TemplateMatch",
    "ThermoReport",
    "Unary",
    "add_extra_point",
    "audit_candidate",
    "bind",
    "complexity",
    "counterexample_search",
    "dependence_analysis",
    "depth",
    "dim_feasible",
    "enumerate_gentrees",
    "eval_masked",
    "evaluate",
    "fit_gentree",
    "generalization_error",
    "inner_fit_constants",
    "knee_point",
    "leaf_slots",
    "leaf_unit",
    "load_dataset",
    "numerical_errors",
    "pareto_of_run",
    "parse",
    "parse_axiom_file",
    "parse_unit_spec",
    "pointwise_errors",
    "reference_values",
    "run_search",
    "serialize",
    "solve_axioms",
    "template_match",
    "thermo_check",
    "validate_result",
    "verify_domain",
]
