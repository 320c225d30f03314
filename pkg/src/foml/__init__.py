"""Satisfiability, model extraction, and model checking for the bundled
exists-box / box-exists fragment of first-order modal logic, interpreted
over increasing-domain Kripke models.
"""

from .extraction import (
    RESIDUAL,
    SATISFIED,
    ExtensionStep,
    ExtensionTrace,
    extend_tableau,
    extract_model,
    find_leaf_violations,
    iterate_extensions,
    trace_to_ndjson,
)
from .forest import (
    EMPTY_TREE,
    NOT_INIT,
    ForestNode,
    SkolemForest,
    dump_forest,
    enumerate_forests,
    expand_forest,
    extend_forest,
    find_nested_forall,
    forest_size_bound,
    is_minimal_forest,
    validate_forest,
)
from .formulas import (
    EBBE,
    FMP_DECIDABLE,
    NOT_BUNDLED,
    UNDECIDABLE,
    And,
    ArityError,
    Atom,
    Box,
    Diamond,
    Exists,
    FomlError,
    Forall,
    FragmentClass,
    FragmentError,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    ResourceLimit,
    check_arities,
    classify_fragment,
    clean_rename,
    components,
    enumerate_atoms,
    free_vars,
    is_clean,
    is_literal,
    is_module,
    is_nested_forall,
    is_nnf,
    nnf_complement,
    outer_ex_vars,
    substitute,
    to_nnf,
)
from .kripke import (
    KripkeModel,
    RelevanceError,
    bounded_model_search,
    check,
    model_from_json,
    model_to_json,
    validate_model,
)
from .parser import ParseError, parse_formula, print_formula
from .tableau import (
    EXHAUSTED,
    SAT,
    UNSAT,
    Guidance,
    SearchLimits,
    SearchResult,
    Tableau,
    TableauNode,
    certificate_from_json,
    certificate_to_json,
    dump_tableau,
    init_root,
    search,
    verify_tableau,
)
from .testgen import GenConfig, differential_run, gen_formula, report_to_jsonl

__version__ = "0.1.0"

__all__ = [
    "And",
    "ArityError",
    "Atom",
    "Box",
    "Diamond",
    "EBBE",
    "EMPTY_TREE",
    "EXHAUSTED",
    "Exists",
    "ExtensionStep",
    "ExtensionTrace",
    "FMP_DECIDABLE",
    "FomlError",
    "Forall",
    "ForestNode",
    "FragmentClass",
    "FragmentError",
    "GenConfig",
    "Guidance",
    "Iff",
    "Implies",
    "KripkeModel",
    "NOT_BUNDLED",
    "NOT_INIT",
    "Not",
    "Or",
    "ParseError",
    "Pred",
    "RESIDUAL",
    "RelevanceError",
    "ResourceLimit",
    "SAT",
    "SATISFIED",
    "SearchLimits",
    "SearchResult",
    "SkolemForest",
    "Tableau",
    "TableauNode",
    "UNDECIDABLE",
    "UNSAT",
    "bounded_model_search",
    "certificate_from_json",
    "certificate_to_json",
    "check",
    "check_arities",
    "classify_fragment",
    "clean_rename",
    "components",
    "differential_run",
    "dump_forest",
    "dump_tableau",
    "enumerate_atoms",
    "enumerate_forests",
    "expand_forest",
    "extend_forest",
    "extend_tableau",
    "extract_model",
    "find_leaf_violations",
    "find_nested_forall",
    "forest_size_bound",
    "free_vars",
    "gen_formula",
    "init_root",
    "is_clean",
    "is_literal",
    "is_minimal_forest",
    "is_module",
    "is_nested_forall",
    "is_nnf",
    "iterate_extensions",
    "model_from_json",
    "model_to_json",
    "nnf_complement",
    "outer_ex_vars",
    "parse_formula",
    "print_formula",
    "report_to_jsonl",
    "search",
    "substitute",
    "to_nnf",
    "trace_to_ndjson",
    "validate_forest",
    "validate_model",
    "verify_tableau",
]
