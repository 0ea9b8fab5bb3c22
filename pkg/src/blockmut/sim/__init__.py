"""Simulation subpackage: program compiler plus execution kernels."""

from .program import (
    FAULT_MULTIPLE_GOTO,
    FAULT_NON_FINITE,
    FAULT_UNRESOLVED_FROM,
    KERNEL_KIND,
    ConstantSignal,
    PiecewiseConstantSignal,
    Program,
    RampSignal,
    RuntimeFault,
    SignalTrace,
    StepSignal,
    TestCase,
    compile_program,
    export_trace_csv,
    gen_from_json,
    gen_to_json,
    load_suite,
    save_suite,
    simulate,
    simulate_program,
    single_round_trip,
)


def available_kernels() -> dict[str, object]:
    """Importable kernels by name; 'compiled' is absent without the extension."""
    from . import _kernel_py

    kernels: dict[str, object] = {"python": _kernel_py}
    try:
        from . import _kernel

        kernels["compiled"] = _kernel
    except ImportError:
        pass
    return kernels


__all__ = [
    "FAULT_MULTIPLE_GOTO",
    "FAULT_NON_FINITE",
    "FAULT_UNRESOLVED_FROM",
    "KERNEL_KIND",
    "ConstantSignal",
    "PiecewiseConstantSignal",
    "Program",
    "RampSignal",
    "RuntimeFault",
    "SignalTrace",
    "StepSignal",
    "TestCase",
    "available_kernels",
    "compile_program",
    "export_trace_csv",
    "gen_from_json",
    "gen_to_json",
    "load_suite",
    "save_suite",
    "simulate",
    "simulate_program",
    "single_round_trip",
]
