"""Mutation testing for block-diagram models.

Parse Simulink-style models into a canonical text form, generate
mutants either by masked-value prediction or a rule catalog, simulate
original and mutant behavior with a fixed-step interpreter, and judge
kills under classical and requirements-aware notions.
"""

__version__ = "0.1.0"

from .errors import (
    BlockmutError,
    EmptyCorpusError,
    InvalidModelError,
    MaskRequestError,
    ParseError,
    PredictorUnavailable,
    ProtocolError,
    SchemaError,
    UnknownSignalError,
    UnknownSiteError,
)
from .ir import Block, Connection, ModelIR, PropertyValue, ValidityReport, validate
from .ingest import CorpusRecord, build_corpus, load_model_file, parse_model, read_corpus, write_corpus
from .masking import MaskedSequence, MaskSite, enumerate_sites, mask, unmask
from .predictor import OfflinePredictor, Prediction, RemotePredictor
from .mutgen import (
    ALL_PATTERNS,
    Mutant,
    MutantSet,
    classify,
    classify_delta,
    generate_mlm,
    generate_operators,
)
from .reqmon import Pred, Requirement, RequirementSet, Verdict, check, load_requirements
from .harness import (
    ComparisonReport,
    KillMatrix,
    compare_approaches,
    compute_kill_matrix,
    generate_reference_suite,
    mutation_score,
    select_minimal_tests,
)
from .sim import (
    ConstantSignal,
    PiecewiseConstantSignal,
    RampSignal,
    RuntimeFault,
    SignalTrace,
    StepSignal,
    TestCase,
    available_kernels,
    simulate,
)

__all__ = [
    "__version__",
    "BlockmutError", "EmptyCorpusError", "InvalidModelError", "MaskRequestError",
    "ParseError", "PredictorUnavailable", "ProtocolError", "SchemaError",
    "UnknownSignalError", "UnknownSiteError",
    "Block", "Connection", "ModelIR", "PropertyValue", "ValidityReport", "validate",
    "CorpusRecord", "build_corpus", "load_model_file", "parse_model",
    "read_corpus", "write_corpus",
    "MaskedSequence", "MaskSite", "enumerate_sites", "mask", "unmask",
    "OfflinePredictor", "Prediction", "RemotePredictor",
    "ALL_PATTERNS", "Mutant", "MutantSet", "classify", "classify_delta",
    "generate_mlm", "generate_operators",
    "Pred", "Requirement", "RequirementSet", "Verdict", "check", "load_requirements",
    "ComparisonReport", "KillMatrix", "compare_approaches", "compute_kill_matrix",
    "generate_reference_suite", "mutation_score", "select_minimal_tests",
    "ConstantSignal", "PiecewiseConstantSignal", "RampSignal", "RuntimeFault",
    "SignalTrace", "StepSignal", "TestCase", "available_kernels", "simulate",
]
