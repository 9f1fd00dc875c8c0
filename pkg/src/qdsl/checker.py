"""Name resolution and type checking.

Checking happens in three passes over one or more parsed units sharing a
symbol table: collect declarations, resolve signatures (UDT bases first so
newtypes can reference each other), then check every provided body. All
expression nodes come out annotated with their type (``expr.ty``) and every
name reference with its resolution (``name.binding``), which is what the
runtime dispatches on.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional, Union

from . import diagnostics as diag
from . import types as ty
from .ast_nodes import (
    AllocateStmt,
    ArrayExpr,
    ArrayTypeNode,
    BinaryExpr,
    Block,
    BoolLit,
    CallableDecl,
    CallableTypeNode,
    CallExpr,
    DoubleLit,
    Expr,
    ExprStmt,
    FailStmt,
    ForStmt,
    FunctorExpr,
    Hole,
    IfStmt,
    IndexExpr,
    IntLit,
    InterpString,
    LetStmt,
    MutableStmt,
    Name,
    NamedTypeNode,
    NamePattern,
    Namespace,
    NewtypeDecl,
    ParamLeaf,
    ParamTuple,
    Pattern,
    PauliLit,
    Program,
    RangeExpr,
    RepeatStmt,
    ResultLit,
    ReturnStmt,
    SetStmt,
    SpecDecl,
    SpecImpl,
    SpecKind,
    Stmt,
    StringLit,
    TupleExpr,
    TuplePattern,
    TupleTypeNode,
    TypeNode,
    TypeParamNode,
    UnaryExpr,
)
from .diagnostics import Diagnostic
from .source import Span

ERROR = ty.Prim("<error>")

# Namespaces opened implicitly inside the snippet namespace.
IMPLICIT_OPENS = ("Microsoft.Quantum.Primitive", "Microsoft.Quantum.Canon")


def _is_error(t: ty.Type) -> bool:
    return t == ERROR or (isinstance(t, ty.Array) and _is_error(t.element))


# ── Symbols ──────────────────────────────────────────────────────────────────


@dataclass
class CallableSymbol:
    namespace: str
    name: str
    is_operation: bool
    type_params: list[str]
    input: ty.Type
    output: ty.Type
    variants: frozenset[str]
    decl: Optional[CallableDecl] = None
    intrinsic: Optional[str] = None  # key into the runtime intrinsic registry
    file: str = "<builtin>"
    # Filled by the specialization generator:
    specializations: dict = dc_field(default_factory=dict)

    @property
    def qualified(self) -> str:
        return f"{self.namespace}.{self.name}" if self.namespace else self.name

    def reference_type(self) -> tuple[ty.Type, dict[str, ty.Param]]:
        """Type of a reference to this callable, with fresh variables."""
        mapping = {p: ty.fresh_param(p) for p in self.type_params}
        return (
            ty.Callable(
                self.is_operation,
                ty.instantiate(self.input, mapping),
                ty.instantiate(self.output, mapping),
                self.variants,
            ),
            mapping,
        )


@dataclass
class UdtSymbol:
    namespace: str
    name: str
    base: Optional[ty.Type]  # resolved lazily; None while unresolved
    decl: Optional[NewtypeDecl] = None
    file: str = "<builtin>"
    resolving: bool = False

    @property
    def qualified(self) -> str:
        return f"{self.namespace}.{self.name}" if self.namespace else self.name

    def type(self) -> ty.Type:
        return ty.Udt(self.qualified, self.base if self.base is not None else ERROR)


Symbol = Union[CallableSymbol, UdtSymbol]


class SymbolTable:
    def __init__(self) -> None:
        self.namespaces: dict[str, dict[str, Symbol]] = {}

    def define(self, symbol: Symbol) -> Symbol | None:
        """Add a symbol; returns the clashing symbol on duplicate, else None."""
        members = self.namespaces.setdefault(symbol.namespace, {})
        if symbol.name in members:
            return members[symbol.name]
        members[symbol.name] = symbol
        return None

    def lookup_qualified(self, qualified: str) -> Symbol | None:
        ns, _, name = qualified.rpartition(".")
        return self.namespaces.get(ns, {}).get(name)

    def lookup(self, name: str, namespace: str, opens: list[str]) -> list[Symbol]:
        """Resolve an unqualified name: own namespace first, then opens."""
        own = self.namespaces.get(namespace, {}).get(name)
        if own is not None:
            return [own]
        found = []
        for ns in opens:
            sym = self.namespaces.get(ns, {}).get(name)
            if sym is not None and sym not in found:
                found.append(sym)
        return found

    def has_namespace(self, name: str) -> bool:
        return name in self.namespaces

    def all_callables(self) -> list[CallableSymbol]:
        return [
            s
            for members in self.namespaces.values()
            for s in members.values()
            if isinstance(s, CallableSymbol)
        ]


# ── Scopes ───────────────────────────────────────────────────────────────────


@dataclass
class LocalBinding:
    name: str
    type: ty.Type
    mutable: bool
    span: Span


class Scope:
    def __init__(self, parent: Optional["Scope"] = None) -> None:
        self.parent = parent
        self.bindings: dict[str, LocalBinding] = {}

    def lookup(self, name: str) -> LocalBinding | None:
        scope: Scope | None = self
        while scope is not None:
            if name in scope.bindings:
                return scope.bindings[name]
            scope = scope.parent
        return None

    def define(self, binding: LocalBinding) -> bool:
        """False when the name is already bound in this same scope."""
        if binding.name in self.bindings:
            return False
        self.bindings[binding.name] = binding
        return True


# ── Checking context ─────────────────────────────────────────────────────────


@dataclass
class _Context:
    table: SymbolTable
    namespace: str
    opens: list[str]
    file: str
    diagnostics: list[Diagnostic]
    rigid_params: frozenset[str] = frozenset()
    output: ty.Type = ty.UNIT
    in_function: bool = False
    alloc_depth: int = 0
    bindings: ty.Bindings = dc_field(default_factory=dict)

    def error(self, code: str, message: str, span: Span) -> None:
        self.diagnostics.append(diag.error(code, message, span, self.file))


class Checker:
    def __init__(self, table: SymbolTable) -> None:
        self.table = table
        self.diagnostics: list[Diagnostic] = []

    # ── Pass 1: collect declarations ─────────────────────────────────────

    def collect(self, program: Program, file: str) -> None:
        for ns in program.namespaces:
            for decl in ns.decls:
                if isinstance(decl, NewtypeDecl):
                    sym: Symbol = UdtSymbol(ns.name, decl.name, None, decl, file)
                    clash = self.table.define(sym)
                    if clash is not None:
                        self._duplicate(decl.name, decl.name_span, file, clash)
                elif isinstance(decl, CallableDecl):
                    self._validate_spec_combination(decl, file)
                    sym = CallableSymbol(
                        ns.name,
                        decl.name,
                        decl.is_operation,
                        list(decl.type_params),
                        ERROR,
                        ERROR,
                        self._declared_variants(decl),
                        decl,
                        None,
                        file,
                    )
                    clash = self.table.define(sym)
                    if clash is not None:
                        self._duplicate(decl.name, decl.name_span, file, clash)

    def _duplicate(self, name: str, span: Span, file: str, clash: Symbol) -> None:
        self.diagnostics.append(
            diag.error(
                diag.DUPLICATE_DEFINITION,
                f"'{name}' is already defined in this namespace",
                span,
                file,
            )
        )

    @staticmethod
    def _declared_variants(decl: CallableDecl) -> frozenset[str]:
        if not decl.is_operation:
            return frozenset()
        variants = set()
        for spec in decl.specs:
            if spec.kind in (SpecKind.ADJOINT, SpecKind.CONTROLLED_ADJOINT):
                variants.add(ty.ADJOINT)
            if spec.kind in (SpecKind.CONTROLLED, SpecKind.CONTROLLED_ADJOINT):
                variants.add(ty.CONTROLLED)
        return frozenset(variants)

    def _validate_spec_combination(self, decl: CallableDecl, file: str) -> None:
        if not decl.is_operation:
            return
        kinds = {s.kind for s in decl.specs}
        has_a = SpecKind.ADJOINT in kinds
        has_c = SpecKind.CONTROLLED in kinds
        has_ca = SpecKind.CONTROLLED_ADJOINT in kinds
        if has_ca and not (has_a and has_c):
            self.diagnostics.append(
                diag.error(
                    diag.SPECIALIZATION_MISMATCH,
                    "a controlled adjoint specialization requires both adjoint "
                    "and controlled specializations",
                    decl.name_span,
                    file,
                )
            )
        elif has_a and has_c and not has_ca:
            self.diagnostics.append(
                diag.error(
                    diag.SPECIALIZATION_MISMATCH,
                    "an operation with both adjoint and controlled "
                    "specializations must also declare controlled adjoint",
                    decl.name_span,
                    file,
                )
            )

    # ── Pass 2: resolve signatures ───────────────────────────────────────

    def resolve_signatures(self, program: Program, file: str) -> None:
        for ns in program.namespaces:
            opens = self._effective_opens(ns, file)
            for decl in ns.decls:
                if isinstance(decl, NewtypeDecl):
                    self._resolve_udt_base(ns.name, opens, decl, file)
        for ns in program.namespaces:
            opens = self._effective_opens_quiet(ns)
            for decl in ns.decls:
                if isinstance(decl, CallableDecl):
                    self._resolve_callable_signature(ns.name, opens, decl, file)

    def _effective_opens(self, ns: Namespace, file: str) -> list[str]:
        opens = []
        for op in ns.opens:
            if not self.table.has_namespace(op.name):
                self.diagnostics.append(
                    diag.error(
                        diag.UNKNOWN_NAMESPACE,
                        f"namespace '{op.name}' is not defined",
                        op.span,
                        file,
                    )
                )
                continue
            opens.append(op.name)
        if ns.implicit:
            for name in IMPLICIT_OPENS:
                if self.table.has_namespace(name) and name not in opens:
                    opens.append(name)
        return opens

    def _resolve_udt_base(
        self, namespace: str, opens: list[str], decl: NewtypeDecl, file: str
    ) -> None:
        sym = self.table.namespaces.get(namespace, {}).get(decl.name)
        if not isinstance(sym, UdtSymbol) or sym.decl is not decl:
            return
        ctx = _Context(self.table, namespace, opens, file, self.diagnostics)
        sym.base = self._udt_base_of(sym, ctx)

    def _udt_base_of(self, sym: UdtSymbol, ctx: _Context) -> ty.Type:
        if sym.base is not None:
            return sym.base
        if sym.resolving:
            span = sym.decl.name_span if sym.decl else Span(0, 0)
            self.diagnostics.append(
                diag.error(
                    diag.UDT_RECURSION,
                    f"newtype '{sym.name}' is defined in terms of itself",
                    span,
                    sym.file,
                )
            )
            return ERROR
        sym.resolving = True
        try:
            assert sym.decl is not None
            base = self.resolve_type(sym.decl.base, ctx)
        finally:
            sym.resolving = False
        sym.base = base
        return base

    def _resolve_callable_signature(
        self, namespace: str, opens: list[str], decl: CallableDecl, file: str
    ) -> None:
        sym = self.table.namespaces.get(namespace, {}).get(decl.name)
        if not isinstance(sym, CallableSymbol) or sym.decl is not decl:
            return
        seen: set[str] = set()
        for p in decl.type_params:
            if p in seen:
                self.diagnostics.append(
                    diag.error(
                        diag.DUPLICATE_BINDING,
                        f"duplicate type parameter {p}",
                        decl.name_span,
                        file,
                    )
                )
            seen.add(p)
        ctx = _Context(
            self.table,
            namespace,
            opens,
            file,
            self.diagnostics,
            rigid_params=frozenset(decl.type_params),
        )
        sym.input = ty.normalize(self._param_tuple_type(decl.params, ctx))
        sym.output = ty.normalize(self.resolve_type(decl.output, ctx))

    def _param_tuple_type(self, params: ParamTuple, ctx: _Context) -> ty.Type:
        items: list[ty.Type] = []
        for item in params.items:
            if isinstance(item, ParamLeaf):
                items.append(self.resolve_type(item.type, ctx))
            else:
                items.append(self._param_tuple_type(item, ctx))
        return ty.Tuple(tuple(items))

    # ── Type expression resolution ───────────────────────────────────────

    def resolve_type(self, node: TypeNode, ctx: _Context) -> ty.Type:
        if isinstance(node, NamedTypeNode):
            if "." not in node.name and node.name in ty.PRIMITIVES:
                return ty.PRIMITIVES[node.name]
            sym = self._resolve_symbol_name(node.name, ctx, node.span, is_type=True)
            if isinstance(sym, UdtSymbol):
                self._udt_base_of(sym, ctx)
                return sym.type()
            if sym is not None:
                ctx.error(
                    diag.UNDEFINED_TYPE,
                    f"'{node.name}' is not a type",
                    node.span,
                )
                return ERROR
            return ERROR
        if isinstance(node, TypeParamNode):
            if node.name not in ctx.rigid_params:
                ctx.error(
                    diag.UNDEFINED_TYPE,
                    f"type parameter {node.name} is not declared here",
                    node.span,
                )
                return ERROR
            return ty.Param(node.name, None)
        if isinstance(node, TupleTypeNode):
            return ty.normalize(
                ty.Tuple(tuple(self.resolve_type(i, ctx) for i in node.items))
            )
        if isinstance(node, ArrayTypeNode):
            return ty.Array(self.resolve_type(node.element, ctx))
        if isinstance(node, CallableTypeNode):
            return ty.Callable(
                node.is_operation,
                ty.normalize(self.resolve_type(node.input, ctx)),
                ty.normalize(self.resolve_type(node.output, ctx)),
                frozenset(node.functors),
            )
        raise TypeError(f"unknown type node {type(node).__name__}")

    def _resolve_symbol_name(
        self, name: str, ctx: _Context, span: Span, is_type: bool = False
    ) -> Symbol | None:
        what = "type" if is_type else "name"
        if "." in name:
            sym = self.table.lookup_qualified(name)
            if sym is None:
                ctx.error(diag.NAME_NOT_FOUND, f"{what} '{name}' is not defined", span)
            return sym
        candidates = self.table.lookup(name, ctx.namespace, ctx.opens)
        if not candidates:
            code = diag.UNDEFINED_TYPE if is_type else diag.NAME_NOT_FOUND
            ctx.error(code, f"{what} '{name}' is not defined", span)
            return None
        if len(candidates) > 1:
            namespaces = ", ".join(sorted(c.namespace for c in candidates))
            ctx.error(
                diag.AMBIGUOUS_NAME,
                f"'{name}' is ambiguous between namespaces {namespaces}",
                span,
            )
        return candidates[0]

    # ── Pass 3: check bodies ─────────────────────────────────────────────

    def check_bodies(self, program: Program, file: str) -> None:
        for ns in program.namespaces:
            opens = self._effective_opens_quiet(ns)
            for decl in ns.decls:
                if isinstance(decl, CallableDecl):
                    self._check_callable(ns.name, opens, decl, file)

    def _effective_opens_quiet(self, ns: Namespace) -> list[str]:
        opens = [op.name for op in ns.opens if self.table.has_namespace(op.name)]
        if ns.implicit:
            for name in IMPLICIT_OPENS:
                if self.table.has_namespace(name) and name not in opens:
                    opens.append(name)
        return opens

    def _check_callable(
        self, namespace: str, opens: list[str], decl: CallableDecl, file: str
    ) -> None:
        sym = self.table.namespaces.get(namespace, {}).get(decl.name)
        if not isinstance(sym, CallableSymbol) or sym.decl is not decl:
            return
        sym._opens_cache = opens  # type: ignore[attr-defined]
        for spec in decl.specs:
            if spec.impl is not SpecImpl.PROVIDED or spec.block is None:
                continue
            needs_ctl = spec.kind in (SpecKind.CONTROLLED, SpecKind.CONTROLLED_ADJOINT)
            self.check_specialization_block(
                sym, spec.block, spec.ctl_param if needs_ctl else None, file
            )
        if not any(
            s.kind is SpecKind.BODY and s.impl is SpecImpl.PROVIDED for s in decl.specs
        ):
            return
        body = next(s.block for s in decl.specs if s.kind is SpecKind.BODY)
        if (
            ty.normalize(sym.output) != ty.UNIT
            and not _is_error(sym.output)
            and body is not None
            and not _block_returns(body)
        ):
            self.diagnostics.append(
                diag.error(
                    diag.MISSING_RETURN,
                    f"'{decl.name}' must return a value of type "
                    f"{ty.render(sym.output)} on every path",
                    decl.name_span,
                    file,
                )
            )

    def check_specialization_block(
        self,
        sym: CallableSymbol,
        block: Block,
        ctl_param: str | None,
        file: str,
        output: ty.Type | None = None,
    ) -> list[Diagnostic]:
        """Type-check one specialization body in the callable's scope.

        Also used by the specialization generator to validate generated
        blocks; returns the diagnostics it produced.
        """
        before = len(self.diagnostics)
        ctx = _Context(
            self.table,
            sym.namespace,
            self._opens_for(sym),
            file,
            self.diagnostics,
            rigid_params=frozenset(sym.type_params),
            output=output if output is not None else sym.output,
            in_function=not sym.is_operation,
        )
        scope = Scope()
        if ctl_param is not None:
            scope.define(
                LocalBinding(ctl_param, ty.Array(ty.QUBIT), False, block.span)
            )
        self._bind_params(sym.decl.params if sym.decl else None, sym, scope, ctx)
        self._check_block(block, scope, ctx)
        return self.diagnostics[before:]

    def _opens_for(self, sym: CallableSymbol) -> list[str]:
        if sym.decl is None:
            return []
        # Find the namespace node that owns this declaration.
        return getattr(sym, "_opens_cache", None) or []

    def _bind_params(
        self,
        params: ParamTuple | None,
        sym: CallableSymbol,
        scope: Scope,
        ctx: _Context,
    ) -> None:
        if params is None:
            return

        def bind(item) -> None:
            if isinstance(item, ParamLeaf):
                t = self.resolve_type(item.type, ctx)
                if not scope.define(LocalBinding(item.name, t, False, item.span)):
                    ctx.error(
                        diag.DUPLICATE_BINDING,
                        f"parameter '{item.name}' is declared twice",
                        item.span,
                    )
            else:
                for sub in item.items:
                    bind(sub)

        for item in params.items:
            bind(item)

    # ── Statements ───────────────────────────────────────────────────────

    def _check_block(self, block: Block, scope: Scope, ctx: _Context) -> None:
        inner = Scope(scope)
        for stmt in block.stmts:
            self._check_stmt(stmt, inner, ctx)

    def _check_stmt(self, stmt: Stmt, scope: Scope, ctx: _Context) -> None:
        if isinstance(stmt, LetStmt):
            t = self.check_expr(stmt.value, scope, ctx)
            self._bind_pattern(stmt.pattern, t, scope, ctx)
        elif isinstance(stmt, MutableStmt):
            t = self.check_expr(stmt.value, scope, ctx)
            if not scope.define(LocalBinding(stmt.name, t, True, stmt.span)):
                ctx.error(
                    diag.DUPLICATE_BINDING,
                    f"'{stmt.name}' is already bound in this scope",
                    stmt.span,
                )
        elif isinstance(stmt, SetStmt):
            self._check_set(stmt, scope, ctx)
        elif isinstance(stmt, IfStmt):
            for cond, block in stmt.branches:
                t = self.check_expr(cond, scope, ctx)
                self._require(t, ty.BOOL, cond.span, ctx, "an if condition")
                self._check_block(block, scope, ctx)
            if stmt.else_block is not None:
                self._check_block(stmt.else_block, scope, ctx)
        elif isinstance(stmt, ForStmt):
            t = self.check_expr(stmt.iterable, scope, ctx)
            self._require(t, ty.RANGE, stmt.iterable.span, ctx, "a for iterable")
            inner = Scope(scope)
            inner.define(LocalBinding(stmt.var, ty.INT, False, stmt.var_span))
            for s in stmt.body.stmts:
                self._check_stmt(s, inner, ctx)
        elif isinstance(stmt, RepeatStmt):
            # The until-condition and fixup see bindings made in the body.
            inner = Scope(scope)
            for s in stmt.body.stmts:
                self._check_stmt(s, inner, ctx)
            t = self.check_expr(stmt.condition, inner, ctx)
            self._require(t, ty.BOOL, stmt.condition.span, ctx, "an until condition")
            self._check_block(stmt.fixup, inner, ctx)
        elif isinstance(stmt, ReturnStmt):
            if ctx.alloc_depth > 0:
                ctx.error(
                    diag.RETURN_IN_ALLOCATION,
                    "return is not allowed inside a using or borrowing block",
                    stmt.span,
                )
            t = self.check_expr(stmt.value, scope, ctx, expected=ctx.output)
            self._require(t, ctx.output, stmt.value.span, ctx, "the return value")
        elif isinstance(stmt, FailStmt):
            t = self.check_expr(stmt.message, scope, ctx)
            self._require(t, ty.STRING, stmt.message.span, ctx, "a fail message")
        elif isinstance(stmt, AllocateStmt):
            self._check_allocate(stmt, scope, ctx)
        elif isinstance(stmt, ExprStmt):
            t = self.check_expr(stmt.expr, scope, ctx)
            if not _is_error(t) and ty.normalize(t) != ty.UNIT:
                ctx.error(
                    diag.TYPE_MISMATCH,
                    f"expression statement has type {ty.render(t)}; only () "
                    "values may be discarded",
                    stmt.span,
                )
        else:
            raise TypeError(f"unknown statement {type(stmt).__name__}")

    def _check_set(self, stmt: SetStmt, scope: Scope, ctx: _Context) -> None:
        binding = scope.lookup(stmt.name)
        if binding is None:
            ctx.error(
                diag.NAME_NOT_FOUND, f"name '{stmt.name}' is not defined", stmt.span
            )
            self.check_expr(stmt.value, scope, ctx)
            return
        if not binding.mutable:
            ctx.error(
                diag.SET_IMMUTABLE,
                f"cannot set '{stmt.name}'; it was bound with let, not mutable",
                stmt.span,
            )
        t = self.check_expr(stmt.value, scope, ctx, expected=binding.type)
        if _is_error(t) or _is_error(binding.type):
            return
        declared = ty.normalize(binding.type)
        actual = ty.normalize(t)
        if isinstance(declared, ty.Array) or isinstance(actual, ty.Array):
            ok = declared == actual
        else:
            ok = ty.subtype(actual, declared)
        if not ok:
            ctx.error(
                diag.SET_TYPE_CHANGE,
                f"cannot change the type of '{stmt.name}' from "
                f"{ty.render(declared)} to {ty.render(actual)}",
                stmt.span,
            )

    def _check_allocate(self, stmt: AllocateStmt, scope: Scope, ctx: _Context) -> None:
        kw = "borrowing" if stmt.borrowing else "using"
        if ctx.in_function:
            ctx.error(
                diag.FUNCTION_ALLOCATES,
                f"functions cannot contain {kw} blocks",
                stmt.span,
            )
        if stmt.count is not None:
            t = self.check_expr(stmt.count, scope, ctx)
            self._require(t, ty.INT, stmt.count.span, ctx, "a qubit count")
            bound: ty.Type = ty.Array(ty.QUBIT)
        else:
            bound = ty.QUBIT
        inner = Scope(scope)
        inner.define(LocalBinding(stmt.name, bound, False, stmt.name_span))
        ctx.alloc_depth += 1
        try:
            for s in stmt.body.stmts:
                self._check_stmt(s, inner, ctx)
        finally:
            ctx.alloc_depth -= 1

    def _bind_pattern(
        self, pattern: Pattern, t: ty.Type, scope: Scope, ctx: _Context
    ) -> None:
        if isinstance(pattern, NamePattern):
            if not scope.define(LocalBinding(pattern.name, t, False, pattern.span)):
                ctx.error(
                    diag.DUPLICATE_BINDING,
                    f"'{pattern.name}' is already bound in this scope",
                    pattern.span,
                )
            return
        assert isinstance(pattern, TuplePattern)
        resolved = _strip_udt(ty.normalize(t))
        if _is_error(resolved):
            for p in pattern.items:
                self._bind_pattern(p, ERROR, scope, ctx)
            return
        if not isinstance(resolved, ty.Tuple) or len(resolved.items) != len(
            pattern.items
        ):
            ctx.error(
                diag.PATTERN_MISMATCH,
                f"cannot destructure a value of type {ty.render(t)} into "
                f"{len(pattern.items)} parts",
                pattern.span,
            )
            for p in pattern.items:
                self._bind_pattern(p, ERROR, scope, ctx)
            return
        for p, item in zip(pattern.items, resolved.items):
            self._bind_pattern(p, item, scope, ctx)

    def _require(
        self, actual: ty.Type, expected: ty.Type, span: Span, ctx: _Context, what: str
    ) -> None:
        if _is_error(actual) or _is_error(expected):
            return
        if not ty.subtype(actual, expected):
            ctx.error(
                diag.TYPE_MISMATCH,
                f"{what} must have type {ty.render(expected)}, "
                f"found {ty.render(actual)}",
                span,
            )

    # ── Expressions ──────────────────────────────────────────────────────

    def check_expr(
        self,
        expr: Expr,
        scope: Scope,
        ctx: _Context,
        expected: ty.Type | None = None,
    ) -> ty.Type:
        t = self._check_expr_inner(expr, scope, ctx, expected)
        t = ty.substitute(t, ctx.bindings)
        expr.ty = t
        return t

    def _check_expr_inner(
        self, expr: Expr, scope: Scope, ctx: _Context, expected: ty.Type | None
    ) -> ty.Type:
        if isinstance(expr, IntLit):
            return ty.INT
        if isinstance(expr, DoubleLit):
            return ty.DOUBLE
        if isinstance(expr, BoolLit):
            return ty.BOOL
        if isinstance(expr, StringLit):
            return ty.STRING
        if isinstance(expr, PauliLit):
            return ty.PAULI
        if isinstance(expr, ResultLit):
            return ty.RESULT
        if isinstance(expr, InterpString):
            for part in expr.parts:
                if isinstance(part, Expr):
                    self.check_expr(part, scope, ctx)
            return ty.STRING
        if isinstance(expr, Hole):
            ctx.error(
                diag.HOLE_OUTSIDE_CALL,
                "'_' may only appear as an argument in a partial application",
                expr.span,
            )
            return ERROR
        if isinstance(expr, Name):
            return self._check_name(expr, scope, ctx)
        if isinstance(expr, TupleExpr):
            return self._check_tuple(expr, scope, ctx, expected)
        if isinstance(expr, ArrayExpr):
            return self._check_array(expr, scope, ctx, expected)
        if isinstance(expr, RangeExpr):
            for part in (expr.start, expr.step, expr.end):
                if part is not None:
                    t = self.check_expr(part, scope, ctx)
                    self._require(t, ty.INT, part.span, ctx, "a range bound")
            return ty.RANGE
        if isinstance(expr, IndexExpr):
            return self._check_index(expr, scope, ctx)
        if isinstance(expr, CallExpr):
            return self._check_call(expr, scope, ctx)
        if isinstance(expr, FunctorExpr):
            return self._check_functor(expr, scope, ctx)
        if isinstance(expr, UnaryExpr):
            return self._check_unary(expr, scope, ctx)
        if isinstance(expr, BinaryExpr):
            return self._check_binary(expr, scope, ctx)
        raise TypeError(f"unknown expression {type(expr).__name__}")

    def _check_name(self, expr: Name, scope: Scope, ctx: _Context) -> ty.Type:
        if "." not in expr.name:
            binding = scope.lookup(expr.name)
            if binding is not None:
                expr.binding = ("local", expr.name)
                return binding.type
        sym = self._resolve_symbol_name(expr.name, ctx, expr.span)
        if sym is None:
            return ERROR
        if isinstance(sym, UdtSymbol):
            expr.binding = ("udt", sym)
            base = sym.base if sym.base is not None else ERROR
            return ty.Callable(False, ty.normalize(base), sym.type())
        expr.binding = ("callable", sym)
        ref_type, _ = sym.reference_type()
        return ref_type

    def _check_tuple(
        self, expr: TupleExpr, scope: Scope, ctx: _Context, expected: ty.Type | None
    ) -> ty.Type:
        expectations: list[ty.Type | None] = [None] * len(expr.items)
        if expected is not None:
            norm = _strip_udt(ty.normalize(expected))
            if isinstance(norm, ty.Tuple) and len(norm.items) == len(expr.items):
                expectations = list(norm.items)
        items = tuple(
            self.check_expr(e, scope, ctx, expected=exp)
            for e, exp in zip(expr.items, expectations)
        )
        return ty.normalize(ty.Tuple(items))

    def _check_array(
        self, expr: ArrayExpr, scope: Scope, ctx: _Context, expected: ty.Type | None
    ) -> ty.Type:
        elem_expected: ty.Type | None = None
        if expected is not None:
            norm = _strip_udt(ty.normalize(expected))
            if isinstance(norm, ty.Array):
                elem_expected = norm.element
        if not expr.items:
            if elem_expected is not None:
                return ty.Array(elem_expected)
            ctx.error(
                diag.EMPTY_ARRAY_TYPE,
                "the element type of [] cannot be inferred here",
                expr.span,
            )
            return ty.Array(ERROR)
        elem: ty.Type | None = None
        for item in expr.items:
            t = self.check_expr(item, scope, ctx, expected=elem_expected)
            if _is_error(t):
                return ty.Array(ERROR)
            if elem is None:
                elem = t
                continue
            joined = ty.join(elem, t)
            if joined is None:
                ctx.error(
                    diag.TYPE_MISMATCH,
                    f"array elements have incompatible types "
                    f"{ty.render(elem)} and {ty.render(t)}",
                    item.span,
                )
                return ty.Array(ERROR)
            elem = joined
        assert elem is not None
        return ty.Array(elem)

    def _check_index(self, expr: IndexExpr, scope: Scope, ctx: _Context) -> ty.Type:
        base = self.check_expr(expr.base, scope, ctx)
        index = self.check_expr(expr.index, scope, ctx)
        if _is_error(base):
            return ERROR
        resolved = _strip_udt(ty.normalize(base))
        if not isinstance(resolved, ty.Array):
            ctx.error(
                diag.TYPE_MISMATCH,
                f"only arrays can be indexed, found {ty.render(base)}",
                expr.base.span,
            )
            return ERROR
        if _is_error(index):
            return ERROR
        if ty.subtype(index, ty.INT):
            return resolved.element
        if ty.subtype(index, ty.RANGE):
            return ty.Array(resolved.element)  # slice
        ctx.error(
            diag.TYPE_MISMATCH,
            f"an index must be an Int or a Range, found {ty.render(index)}",
            expr.index.span,
        )
        return ERROR

    # ── Calls and partial application ────────────────────────────────────

    def _check_call(self, expr: CallExpr, scope: Scope, ctx: _Context) -> ty.Type:
        callee = self.check_expr(expr.callee, scope, ctx)
        if _is_error(callee):
            for arg in expr.args:
                if not _shape_has_hole(arg):
                    self.check_expr(arg, scope, ctx)
            return ERROR
        callee_n = ty.normalize(callee)
        if not isinstance(callee_n, ty.Callable):
            ctx.error(
                diag.NOT_CALLABLE,
                f"value of type {ty.render(callee)} is not callable",
                expr.callee.span,
            )
            return ERROR
        has_holes = any(_shape_has_hole(a) for a in expr.args)
        expr.is_partial = has_holes
        if has_holes:
            return self._check_partial(expr, callee_n, scope, ctx)
        if ctx.in_function and callee_n.operation:
            ctx.error(
                diag.FUNCTION_CALLS_OPERATION,
                "functions cannot call operations",
                expr.span,
            )
        input_t = ty.normalize(callee_n.input)
        arg_t = self._check_args(expr.args, input_t, scope, ctx)
        try:
            ty.unify(input_t, arg_t, ctx.bindings)
        except ty.UnifyError as exc:
            code = (
                diag.CALL_SHAPE_MISMATCH
                if "arity" in str(exc)
                else diag.TYPE_MISMATCH
            )
            if not _is_error(arg_t):
                ctx.error(code, str(exc), expr.span)
            return ERROR
        result = ty.substitute(callee_n.output, ctx.bindings)
        if ty.contains_var(result):
            ctx.error(
                diag.UNRESOLVED_TYPE_PARAM,
                "the type parameters of this call cannot be fully inferred",
                expr.span,
            )
            return ERROR
        if not callee_n.operation and ty.normalize(result) == ty.UNIT:
            expr.elidable = True
        return result

    def _check_args(
        self, args: list[Expr], input_t: ty.Type, scope: Scope, ctx: _Context
    ) -> ty.Type:
        """Type the argument list against the (normalized) input type."""
        expectations: list[ty.Type | None] = [None] * len(args)
        if len(args) == 1:
            expectations = [input_t]
        elif isinstance(input_t, ty.Tuple) and len(input_t.items) == len(args):
            expectations = list(input_t.items)
        types = tuple(
            self.check_expr(a, scope, ctx, expected=_concrete_or_none(e))
            for a, e in zip(args, expectations)
        )
        if any(_is_error(t) for t in types):
            return ERROR
        return ty.normalize(ty.Tuple(types))

    def _check_partial(
        self, expr: CallExpr, callee: ty.Callable, scope: Scope, ctx: _Context
    ) -> ty.Type:
        input_t = ty.normalize(callee.input)
        if len(expr.args) == 1:
            missing = self._missing_type(input_t, expr.args[0], scope, ctx)
        else:
            missing = self._missing_tuple(input_t, expr.args, expr.span, scope, ctx)
        if missing is _BAD_SHAPE:
            return ERROR
        result_input = ty.substitute(
            ty.normalize(missing if missing is not None else ty.UNIT), ctx.bindings
        )
        result = ty.Callable(
            callee.operation,
            result_input,
            ty.substitute(callee.output, ctx.bindings),
            callee.variants,
        )
        if ty.contains_var(result):
            ctx.error(
                diag.UNRESOLVED_TYPE_PARAM,
                "the type parameters of this partial application cannot be "
                "fully inferred",
                expr.span,
            )
            return ERROR
        return result

    def _missing_tuple(
        self,
        input_t: ty.Type,
        shapes: list[Expr],
        span: Span,
        scope: Scope,
        ctx: _Context,
    ) -> ty.Type | None:
        resolved = _strip_udt(ty.substitute(input_t, ctx.bindings))
        if not isinstance(resolved, ty.Tuple) or len(resolved.items) != len(shapes):
            ctx.error(
                diag.PARTIAL_SHAPE_MISMATCH,
                f"this partial application supplies {len(shapes)} components "
                f"but the input type is {ty.render(input_t)}",
                span,
            )
            return _BAD_SHAPE
        parts: list[ty.Type] = []
        for comp, shape in zip(resolved.items, shapes):
            m = self._missing_type(comp, shape, scope, ctx)
            if m is _BAD_SHAPE:
                return _BAD_SHAPE
            if m is not None:
                parts.append(m)
        if not parts:
            return None
        return ty.Tuple(tuple(parts))

    def _missing_type(
        self, comp: ty.Type, shape: Expr, scope: Scope, ctx: _Context
    ) -> ty.Type | None:
        """Missing-parts type of one argument shape, or None if fully given."""
        if isinstance(shape, Hole):
            return comp
        if isinstance(shape, TupleExpr) and _shape_has_hole(shape):
            return self._missing_tuple(comp, shape.items, shape.span, scope, ctx)
        t = self.check_expr(shape, scope, ctx, expected=_concrete_or_none(comp))
        if _is_error(t):
            return _BAD_SHAPE
        try:
            ty.unify(comp, t, ctx.bindings)
        except ty.UnifyError as exc:
            ctx.error(diag.TYPE_MISMATCH, str(exc), shape.span)
            return _BAD_SHAPE
        return None

    def _check_functor(self, expr: FunctorExpr, scope: Scope, ctx: _Context) -> ty.Type:
        operand = self.check_expr(expr.operand, scope, ctx)
        if _is_error(operand):
            return ERROR
        resolved = ty.normalize(operand)
        if not isinstance(resolved, ty.Callable) or not resolved.operation:
            ctx.error(
                diag.MISSING_VARIANT,
                f"the {expr.functor} functor applies to operations, "
                f"found {ty.render(operand)}",
                expr.span,
            )
            return ERROR
        needed = ty.ADJOINT if expr.functor == "Adjoint" else ty.CONTROLLED
        if needed not in resolved.variants:
            ctx.error(
                diag.MISSING_VARIANT,
                f"this operation does not support the {expr.functor} functor",
                expr.span,
            )
            return ERROR
        if expr.functor == "Adjoint":
            return resolved
        return ty.Callable(
            True,
            ty.Tuple((ty.Array(ty.QUBIT), resolved.input)),
            resolved.output,
            resolved.variants,
        )

    def _check_unary(self, expr: UnaryExpr, scope: Scope, ctx: _Context) -> ty.Type:
        t = self.check_expr(expr.operand, scope, ctx)
        if _is_error(t):
            return ERROR
        resolved = _strip_udt(ty.normalize(t))
        if expr.op == "-" and resolved in (ty.INT, ty.DOUBLE):
            return resolved
        if expr.op == "!" and resolved == ty.BOOL:
            return ty.BOOL
        if expr.op == "~" and resolved == ty.INT:
            return ty.INT
        ctx.error(
            diag.TYPE_MISMATCH,
            f"operator {expr.op} is not defined for {ty.render(t)}",
            expr.span,
        )
        return ERROR

    _EQUALITY_TYPES = (ty.INT, ty.DOUBLE, ty.BOOL, ty.STRING, ty.RESULT, ty.PAULI)

    def _check_binary(self, expr: BinaryExpr, scope: Scope, ctx: _Context) -> ty.Type:
        lt = self.check_expr(expr.left, scope, ctx)
        rt = self.check_expr(expr.right, scope, ctx)
        if _is_error(lt) or _is_error(rt):
            return ERROR
        left = _strip_udt(ty.normalize(lt))
        right = _strip_udt(ty.normalize(rt))
        op = expr.op

        def fail() -> ty.Type:
            ctx.error(
                diag.TYPE_MISMATCH,
                f"operator {op} is not defined for {ty.render(lt)} and "
                f"{ty.render(rt)}",
                expr.span,
            )
            return ERROR

        if op in ("&&", "||"):
            return ty.BOOL if left == ty.BOOL and right == ty.BOOL else fail()
        if op in ("==", "!="):
            joined = ty.join(left, right)
            if joined in self._EQUALITY_TYPES:
                return ty.BOOL
            return fail()
        if op in ("<", "<=", ">", ">="):
            if left == right and left in (ty.INT, ty.DOUBLE):
                return ty.BOOL
            return fail()
        if op in ("<<", ">>", "&", "|", "^"):
            return ty.INT if left == ty.INT and right == ty.INT else fail()
        if op == "%":
            return ty.INT if left == ty.INT and right == ty.INT else fail()
        if op == "+":
            if isinstance(left, ty.Array) and isinstance(right, ty.Array):
                joined = ty.join(left, right)
                if joined is not None:
                    return joined
                return fail()
            if left == right and left in (ty.INT, ty.DOUBLE):
                return left
            return fail()
        if op in ("-", "*", "/"):
            if left == right and left in (ty.INT, ty.DOUBLE):
                return left
            return fail()
        return fail()


_BAD_SHAPE = ty.Prim("<bad-shape>")


def _concrete_or_none(t: ty.Type | None) -> ty.Type | None:
    if t is None or ty.contains_var(t):
        return None
    return t


def _shape_has_hole(expr: Expr) -> bool:
    if isinstance(expr, Hole):
        return True
    if isinstance(expr, TupleExpr):
        return any(_shape_has_hole(i) for i in expr.items)
    return False


def _strip_udt(t: ty.Type) -> ty.Type:
    seen = set()
    while isinstance(t, ty.Udt) and t.name not in seen:
        seen.add(t.name)
        t = ty.normalize(t.base)
    return t


def _block_returns(block: Block) -> bool:
    return any(_stmt_returns(s) for s in block.stmts)


def _stmt_returns(stmt: Stmt) -> bool:
    if isinstance(stmt, (ReturnStmt, FailStmt)):
        return True
    if isinstance(stmt, IfStmt):
        if stmt.else_block is None:
            return False
        return all(_block_returns(b) for _, b in stmt.branches) and _block_returns(
            stmt.else_block
        )
    return False


# ── Opens bookkeeping ────────────────────────────────────────────────────────


def attach_opens(program: Program, table: SymbolTable) -> None:
    """Cache each callable's effective opens on its symbol for later passes."""
    for ns in program.namespaces:
        opens = [op.name for op in ns.opens if table.has_namespace(op.name)]
        if ns.implicit:
            for name in IMPLICIT_OPENS:
                if table.has_namespace(name) and name not in opens:
                    opens.append(name)
        for decl in ns.decls:
            if isinstance(decl, CallableDecl):
                sym = table.namespaces.get(ns.name, {}).get(decl.name)
                if isinstance(sym, CallableSymbol) and sym.decl is decl:
                    sym._opens_cache = opens  # type: ignore[attr-defined]
