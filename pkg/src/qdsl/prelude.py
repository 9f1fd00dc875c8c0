"""Intrinsic registry and prelude source loading.

The primitive namespace is half intrinsic, half source: the elementary
single-qubit gates, Measure, the assertion/message functions and a few
array/range utilities are implemented here as Python handlers, while CNOT,
CCNOT, SWAP and the reset helpers are ordinary source operations shipped as
package data (``prelude/*.qds``) along with the canon namespace.
"""

from __future__ import annotations

from importlib import resources
from typing import Any

from . import types as ty
from .checker import CallableSymbol, SymbolTable
from .simulator import GATE_MATRICES, SimulationError, r1frac_matrix
from .values import Pauli, QubitRef, RangeValue, Result, UNIT

PRIMITIVE_NAMESPACE = "Microsoft.Quantum.Primitive"
CANON_NAMESPACE = "Microsoft.Quantum.Canon"

_T = ty.Param("`T", None)

_QUBIT_TO_UNIT = ty.QUBIT
_PAULIS = ty.Array(ty.PAULI)
_QUBITS = ty.Array(ty.QUBIT)


def _sym(
    name: str,
    is_operation: bool,
    input_t: ty.Type,
    output_t: ty.Type,
    variants: frozenset[str] = frozenset(),
    type_params: tuple[str, ...] = (),
) -> CallableSymbol:
    return CallableSymbol(
        PRIMITIVE_NAMESPACE,
        name,
        is_operation,
        list(type_params),
        input_t,
        output_t,
        variants,
        decl=None,
        intrinsic=name,
    )


def intrinsic_symbols() -> list[CallableSymbol]:
    gates = [
        _sym(name, True, ty.QUBIT, ty.UNIT, ty.BOTH_VARIANTS)
        for name in ("H", "X", "Y", "Z", "I", "T")
    ]
    return gates + [
        _sym(
            "R1Frac",
            True,
            ty.Tuple((ty.INT, ty.INT, ty.QUBIT)),
            ty.UNIT,
            ty.BOTH_VARIANTS,
        ),
        _sym("Measure", True, ty.Tuple((_PAULIS, _QUBITS)), ty.RESULT),
        _sym(
            "Assert",
            False,
            ty.Tuple((_PAULIS, _QUBITS, ty.RESULT)),
            ty.UNIT,
        ),
        _sym(
            "AssertProb",
            False,
            ty.Tuple((_PAULIS, _QUBITS, ty.RESULT, ty.DOUBLE, ty.DOUBLE)),
            ty.UNIT,
        ),
        _sym("Message", False, ty.STRING, ty.UNIT),
        _sym("Length", False, ty.Array(_T), ty.INT, type_params=("`T",)),
        _sym("ReversedRange", False, ty.RANGE, ty.RANGE),
        _sym(
            "Updated",
            False,
            ty.Tuple((ty.Array(_T), ty.INT, _T)),
            ty.Array(_T),
            type_params=("`T",),
        ),
    ]


def seed_table(table: SymbolTable) -> None:
    for sym in intrinsic_symbols():
        table.define(sym)


# ── Handlers ─────────────────────────────────────────────────────────────────


def _gate_handler(name: str):
    matrix = GATE_MATRICES[name]

    def handler(interp, arg, adjoint, controls):
        interp.apply_gate(name, matrix, arg, adjoint, controls)
        return UNIT

    return handler


def _r1frac(interp, arg, adjoint, controls):
    numerator, power, target = arg
    if adjoint:
        numerator = -numerator
    matrix = r1frac_matrix(numerator, power)
    interp.apply_gate(f"R1Frac({numerator},{power})", matrix, target, False, controls)
    return UNIT


def _measurement_args(interp, bases, qubits):
    if len(bases) != len(qubits):
        interp.fail(
            f"Measure needs one Pauli basis per qubit, got {len(bases)} "
            f"bases for {len(qubits)} qubits"
        )
    return [p.name for p in bases], [q.id for q in qubits]


def _measure(interp, arg, adjoint, controls):
    bases, qubits = arg
    letters, ids = _measurement_args(interp, bases, qubits)
    if all(letter == "I" for letter in letters):
        # The identity has the whole space as its +1 eigenspace.
        outcome = Result.Zero
    else:
        try:
            bit = interp.simulator.measure(letters, ids, interp.rng)
        except SimulationError as exc:
            interp.fail(str(exc))
        outcome = Result.One if bit else Result.Zero
    interp.stats.measurements += 1
    basis_text = " ".join(letters) or "-"
    target_text = " ".join(f"q{q}" for q in ids) or "-"
    interp.trace(f"measure [{basis_text}] [{target_text}] -> {outcome.name}")
    return outcome


def _probe(interp, bases, qubits) -> float:
    letters, ids = _measurement_args(interp, bases, qubits)
    if all(letter == "I" for letter in letters):
        return 1.0
    try:
        return interp.simulator.probe_zero_probability(letters, ids)
    except SimulationError as exc:
        interp.fail(str(exc))


def _snap(probability: float) -> float:
    """Clamp float noise at the endpoints so reports read 0 and 1 exactly."""
    if probability < 1e-12:
        return 0.0
    if probability > 1.0 - 1e-12:
        return 1.0
    return probability


def _assert(interp, arg, adjoint, controls):
    bases, qubits, expected = arg
    p_zero = _probe(interp, bases, qubits)
    p_expected = _snap(p_zero if expected is Result.Zero else 1.0 - p_zero)
    if p_expected < 1.0 - 1e-9:
        interp.fail(
            f"assertion failed: the measurement would give {expected.name} "
            f"with probability {p_expected:.6g}, not with certainty"
        )
    return UNIT


def _assert_prob(interp, arg, adjoint, controls):
    bases, qubits, expected, probability, tolerance = arg
    p_zero = _probe(interp, bases, qubits)
    p_expected = _snap(p_zero if expected is Result.Zero else 1.0 - p_zero)
    if abs(p_expected - probability) > tolerance:
        interp.fail(
            f"assertion failed: the measurement would give {expected.name} "
            f"with probability {p_expected:.6g}, expected {probability:.6g} "
            f"within {tolerance:.6g}"
        )
    return UNIT


def _message(interp, arg, adjoint, controls):
    interp.messages.append(arg)
    interp.trace(f"message {arg}")
    return UNIT


def _length(interp, arg, adjoint, controls):
    return len(arg)


def _reversed_range(interp, arg, adjoint, controls):
    return arg.reversed()


def _updated(interp, arg, adjoint, controls):
    source, index, value = arg
    if not 0 <= index < len(source):
        interp.fail(
            f"index {index} is out of range for an array of length {len(source)}"
        )
    copy = list(source)
    copy[index] = value
    return copy


def intrinsic_handlers() -> dict[str, Any]:
    handlers: dict[str, Any] = {
        name: _gate_handler(name) for name in ("H", "X", "Y", "Z", "I", "T")
    }
    handlers.update(
        {
            "R1Frac": _r1frac,
            "Measure": _measure,
            "Assert": _assert,
            "AssertProb": _assert_prob,
            "Message": _message,
            "Length": _length,
            "ReversedRange": _reversed_range,
            "Updated": _updated,
        }
    )
    return handlers


# ── Prelude sources ──────────────────────────────────────────────────────────


def prelude_units(exclude: tuple[str, ...] = ()) -> list[tuple[str, str]]:
    """(file label, source text) pairs for the bundled prelude files."""
    root = resources.files("qdsl").joinpath("prelude")
    units = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".qds") or entry.name in exclude:
            continue
        units.append((f"prelude/{entry.name}", entry.read_text(encoding="utf-8")))
    return units
