"""A typed DSL for quantum programs with a state-vector runtime.

The package compiles namespaced source files (operations with adjoint and
controlled specializations, functions, newtypes, generics) against a bundled
prelude, and executes them on a dense state-vector simulator with strict
qubit accounting.
"""

from .compiler import (
    CompileResult,
    compile_files,
    compile_snippet,
    compile_units,
    resolve_entry,
    wrap_statement_snippet,
)
from .diagnostics import Diagnostic, Severity
from .runtime import (
    Interpreter,
    QdslFailure,
    RunOptions,
    RunStats,
    ShotResult,
    run_shots,
)
from .simulator import SimulationError, StateVectorSimulator

__version__ = "0.1.0"

__all__ = [
    "CompileResult",
    "Diagnostic",
    "Interpreter",
    "QdslFailure",
    "RunOptions",
    "RunStats",
    "Severity",
    "ShotResult",
    "SimulationError",
    "StateVectorSimulator",
    "compile_files",
    "compile_snippet",
    "compile_units",
    "resolve_entry",
    "run_shots",
    "wrap_statement_snippet",
    "__version__",
]
