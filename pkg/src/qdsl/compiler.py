"""Compilation pipeline: parse, collect, check, generate specializations.

Multiple source units (the bundled prelude plus any user files) share one
symbol table; namespaces merge across units. Body checking only runs when
parsing produced no errors, and specialization generation only runs on a
fully checked program, so later passes can rely on the annotations of the
earlier ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import prelude, transform
from . import types as ty
from .ast_nodes import Program
from .checker import CallableSymbol, Checker, SymbolTable, UdtSymbol
from .diagnostics import Diagnostic, Severity
from .parser import parse_program


@dataclass
class CompileResult:
    table: SymbolTable
    units: list[tuple[str, Program]]
    diagnostics: list[Diagnostic]
    user_files: list[str]

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity is Severity.ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors

    def user_callables(self) -> list[CallableSymbol]:
        return [
            sym
            for sym in self.table.all_callables()
            if sym.file in self.user_files
        ]


def compile_units(
    units: list[tuple[str, str]],
    include_prelude: bool = True,
    prelude_exclude: tuple[str, ...] = (),
) -> CompileResult:
    """Compile (file label, source text) units against the prelude."""
    all_units: list[tuple[str, str]] = []
    if include_prelude:
        all_units.extend(prelude.prelude_units(prelude_exclude))
    all_units.extend(units)

    diagnostics: list[Diagnostic] = []
    programs: list[tuple[str, Program]] = []
    for file, text in all_units:
        program, diags = parse_program(text, file)
        diagnostics.extend(diags)
        programs.append((file, program))

    table = SymbolTable()
    if include_prelude:
        prelude.seed_table(table)
    result = CompileResult(table, programs, diagnostics, [f for f, _ in units])
    if result.errors:
        return result

    checker = Checker(table)
    for file, program in programs:
        checker.collect(program, file)
    for file, program in programs:
        checker.resolve_signatures(program, file)
    for file, program in programs:
        checker.check_bodies(program, file)
    diagnostics.extend(checker.diagnostics)
    if result.errors:
        return result

    diagnostics.extend(transform.generate_all(table.all_callables(), checker))
    return result


def compile_files(paths: list[str], **kwargs) -> CompileResult:
    units = []
    for path in paths:
        with open(path, "r", encoding="utf-8") as handle:
            units.append((path, handle.read()))
    return compile_units(units, **kwargs)


def compile_snippet(text: str, file: str = "<snippet>", **kwargs) -> CompileResult:
    return compile_units([(file, text)], **kwargs)


SNIPPET_ENTRY = "Snippet.Main"


def wrap_statement_snippet(text: str) -> str:
    """Wrap a bare statement sequence into a runnable Main operation."""
    return (
        "namespace Snippet {\n"
        "    open Microsoft.Quantum.Primitive;\n"
        "    open Microsoft.Quantum.Canon;\n"
        "    operation Main () : () {\n"
        "        body {\n"
        f"{text}\n"
        "        }\n"
        "    }\n"
        "}\n"
    )


def resolve_entry(
    result: CompileResult, name: Optional[str]
) -> tuple[Optional[CallableSymbol], Optional[str]]:
    """Find the entry callable; returns (symbol, error message)."""
    table = result.table
    wanted = name or "Main"
    candidates: list[CallableSymbol] = []
    if "." in wanted:
        sym = table.lookup_qualified(wanted)
        if isinstance(sym, CallableSymbol):
            candidates = [sym]
    else:
        for ns, members in table.namespaces.items():
            sym = members.get(wanted)
            if isinstance(sym, CallableSymbol):
                if name is None and sym.file not in result.user_files:
                    continue
                candidates.append(sym)
    if not candidates:
        hint = "" if name else " (define an operation named Main or pass --entry)"
        return None, f"entry point '{wanted}' was not found{hint}"
    if len(candidates) > 1:
        places = ", ".join(sorted(c.qualified for c in candidates))
        return None, f"entry point '{wanted}' is ambiguous: {places}"
    entry = candidates[0]
    if ty.normalize(entry.input) != ty.UNIT:
        return None, (
            f"entry point '{entry.qualified}' must take no arguments, "
            f"its input type is {ty.render(entry.input)}"
        )
    return entry, None
