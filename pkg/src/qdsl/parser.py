"""Recursive-descent parser with spans and statement-level error recovery.

Operator precedence, lowest to highest:

    range ``..``
    ``||``
    ``&&``
    ``|``
    ``^``
    ``&``
    ``==`` ``!=``
    ``<`` ``<=`` ``>`` ``>=``
    ``<<`` ``>>``
    ``+`` ``-``
    ``*`` ``/`` ``%``
    unary ``-`` ``!`` ``~``
    functor application (``Adjoint`` / ``Controlled``)
    call and index (postfix)

Functor application binds looser than call, which is why applied functors
are written parenthesized: ``(Controlled X)([c], t)``.
"""

from __future__ import annotations

from . import diagnostics as diag
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
    OpenDirective,
    ParamLeaf,
    ParamTuple,
    Pattern,
    PauliKind,
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
from .lexer import tokenize
from .source import Span
from .tokens import Token, TokenKind

# Name of the implicit namespace wrapping bare top-level declarations.
SNIPPET_NAMESPACE = "Snippet"

_BINARY_BP: dict[str, int] = {
    "||": 10,
    "&&": 20,
    "|": 30,
    "^": 40,
    "&": 50,
    "==": 60,
    "!=": 60,
    "<": 70,
    "<=": 70,
    ">": 70,
    ">=": 70,
    "<<": 80,
    ">>": 80,
    "+": 90,
    "-": 90,
    "*": 100,
    "/": 100,
    "%": 100,
}

RANGE_BP = 1
UNARY_BP = 110
FUNCTOR_BP = 120
POSTFIX_BP = 130

_STMT_KEYWORDS = frozenset(
    {
        "let",
        "mutable",
        "set",
        "if",
        "for",
        "repeat",
        "return",
        "fail",
        "using",
        "borrowing",
    }
)


class _ParseError(Exception):
    pass


class Parser:
    def __init__(self, tokens: list[Token], file: str = "<input>") -> None:
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []

    # ── Token access ─────────────────────────────────────────────────────

    def _current(self) -> Token:
        return self.tokens[self.pos]

    def _peek(self, offset: int = 1) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def _at_eof(self) -> bool:
        return self._current().kind is TokenKind.EOF

    def _at_symbol(self, sym: str) -> bool:
        return self._current().is_symbol(sym)

    def _at_keyword(self, word: str) -> bool:
        return self._current().is_keyword(word)

    def _at_ident(self, name: str | None = None) -> bool:
        tok = self._current()
        return tok.kind is TokenKind.IDENT and (name is None or tok.lexeme == name)

    def _advance(self) -> Token:
        tok = self._current()
        if tok.kind is not TokenKind.EOF:
            self.pos += 1
        return tok

    def _error(self, message: str, code: str = diag.UNEXPECTED_TOKEN) -> _ParseError:
        span = self._current().span
        self.diagnostics.append(diag.error(code, message, span, self.file))
        return _ParseError()

    def _expect_symbol(self, sym: str) -> Token:
        if self._at_symbol(sym):
            return self._advance()
        raise self._error(f"expected {sym!r}, found {self._describe()}")

    def _expect_keyword(self, word: str) -> Token:
        if self._at_keyword(word):
            return self._advance()
        raise self._error(f"expected {word!r}, found {self._describe()}")

    def _expect_ident(self, what: str = "name") -> Token:
        if self._current().kind is TokenKind.IDENT:
            return self._advance()
        raise self._error(f"expected {what}, found {self._describe()}")

    def _describe(self) -> str:
        tok = self._current()
        if tok.kind is TokenKind.EOF:
            return "end of input"
        return repr(tok.lexeme)

    # ── Program structure ────────────────────────────────────────────────

    def parse_program(self) -> Program:
        namespaces: list[Namespace] = []
        snippet_decls: list = []
        snippet_opens: list[OpenDirective] = []
        start = self._current().span
        while not self._at_eof():
            try:
                if self._at_keyword("namespace"):
                    namespaces.append(self._parse_namespace())
                elif (
                    self._at_keyword("operation")
                    or self._at_keyword("function")
                    or self._at_keyword("newtype")
                ):
                    snippet_decls.append(self._parse_declaration())
                elif self._at_keyword("open"):
                    snippet_opens.append(self._parse_open())
                elif self._current().lexeme in _STMT_KEYWORDS or self._looks_like_expr():
                    self.diagnostics.append(
                        diag.error(
                            diag.STRAY_STATEMENT,
                            "statements may not appear at the top level of a file",
                            self._current().span,
                            self.file,
                        )
                    )
                    self._parse_statement_quietly()
                else:
                    raise self._error(
                        f"expected a declaration, found {self._describe()}"
                    )
            except _ParseError:
                self._sync_top_level()
        end = self._current().span
        if snippet_decls or snippet_opens:
            span = snippet_decls[0].span if snippet_decls else snippet_opens[0].span
            for d in snippet_decls:
                span = span.union(d.span)
            namespaces.append(
                Namespace(span, SNIPPET_NAMESPACE, snippet_opens, snippet_decls, True)
            )
        return Program(start.union(end), namespaces)

    def _looks_like_expr(self) -> bool:
        tok = self._current()
        return tok.kind in (
            TokenKind.IDENT,
            TokenKind.INT,
            TokenKind.DOUBLE,
            TokenKind.STRING,
            TokenKind.INTERP_STRING,
        ) or tok.lexeme in ("(", "[", "-", "!", "~", "true", "false")

    def _parse_statement_quietly(self) -> None:
        """Consume one statement during top-level recovery, ignoring errors."""
        depth = len(self.diagnostics)
        try:
            self._parse_statement()
        except _ParseError:
            self._sync_statement()
        del self.diagnostics[depth:]

    def _sync_top_level(self) -> None:
        while not self._at_eof():
            tok = self._current()
            if tok.lexeme in ("namespace", "operation", "function", "newtype", "open"):
                return
            self._advance()

    def _parse_namespace(self) -> Namespace:
        start = self._expect_keyword("namespace").span
        name = self._parse_dotted_name("namespace name")
        self._expect_symbol("{")
        opens: list[OpenDirective] = []
        decls: list = []
        while not self._at_symbol("}") and not self._at_eof():
            try:
                if self._at_keyword("open"):
                    opens.append(self._parse_open())
                else:
                    decls.append(self._parse_declaration())
            except _ParseError:
                self._sync_declaration()
        end = self._expect_symbol("}").span
        return Namespace(start.union(end), name, opens, decls)

    def _sync_declaration(self) -> None:
        depth = 0
        while not self._at_eof():
            tok = self._current()
            if depth == 0 and tok.lexeme in (
                "operation",
                "function",
                "newtype",
                "open",
                "namespace",
            ):
                return
            if tok.is_symbol("{"):
                depth += 1
            elif tok.is_symbol("}"):
                if depth == 0:
                    return
                depth -= 1
            self._advance()

    def _parse_dotted_name(self, what: str) -> str:
        parts = [self._expect_ident(what).lexeme]
        while self._at_symbol("."):
            self._advance()
            parts.append(self._expect_ident(what).lexeme)
        return ".".join(parts)

    def _parse_open(self) -> OpenDirective:
        start = self._expect_keyword("open").span
        name = self._parse_dotted_name("namespace name")
        end = self._expect_symbol(";").span
        return OpenDirective(start.union(end), name)

    # ── Declarations ─────────────────────────────────────────────────────

    def _parse_declaration(self):
        if self._at_keyword("newtype"):
            return self._parse_newtype()
        if self._at_keyword("operation") or self._at_keyword("function"):
            return self._parse_callable()
        raise self._error(f"expected a declaration, found {self._describe()}")

    def _parse_newtype(self) -> NewtypeDecl:
        start = self._expect_keyword("newtype").span
        name_tok = self._expect_ident("type name")
        self._expect_symbol("=")
        base = self._parse_type()
        end = self._expect_symbol(";").span
        return NewtypeDecl(start.union(end), name_tok.lexeme, name_tok.span, base)

    def _parse_callable(self) -> CallableDecl:
        kw = self._advance()
        is_operation = kw.lexeme == "operation"
        name_tok = self._expect_ident("callable name")
        type_params: list[str] = []
        if self._at_symbol("<"):
            self._advance()
            while True:
                tok = self._current()
                if tok.kind is not TokenKind.TYPE_PARAM:
                    raise self._error("expected a type parameter like `T")
                type_params.append(self._advance().lexeme)
                if self._at_symbol(","):
                    self._advance()
                    continue
                break
            self._expect_symbol(">")
        params = self._parse_param_tuple()
        self._expect_symbol(":")
        output = self._parse_type()
        if is_operation:
            specs, end = self._parse_specializations(name_tok)
        else:
            body = self._parse_block()
            specs = [SpecDecl(body.span, SpecKind.BODY, SpecImpl.PROVIDED, body)]
            end = body.span
        return CallableDecl(
            kw.span.union(end),
            is_operation,
            name_tok.lexeme,
            name_tok.span,
            type_params,
            params,
            output,
            specs,
        )

    def _parse_param_tuple(self) -> ParamTuple:
        start = self._expect_symbol("(").span
        items: list = []
        if not self._at_symbol(")"):
            while True:
                items.append(self._parse_param_item())
                if self._at_symbol(","):
                    self._advance()
                    continue
                break
        end = self._expect_symbol(")").span
        return ParamTuple(start.union(end), items)

    def _parse_param_item(self):
        if self._at_symbol("("):
            return self._parse_param_tuple()
        name_tok = self._expect_ident("parameter name")
        self._expect_symbol(":")
        ty = self._parse_type()
        return ParamLeaf(name_tok.span.union(ty.span), name_tok.lexeme, ty)

    def _parse_specializations(self, name_tok: Token) -> tuple[list[SpecDecl], Span]:
        self._expect_symbol("{")
        specs: list[SpecDecl] = []
        while not self._at_symbol("}") and not self._at_eof():
            specs.append(self._parse_one_specialization())
        end = self._expect_symbol("}").span
        if not any(s.kind is SpecKind.BODY for s in specs):
            self.diagnostics.append(
                diag.error(
                    diag.MISSING_SPECIALIZATION_BODY,
                    f"operation '{name_tok.lexeme}' has no body specialization",
                    name_tok.span,
                    self.file,
                )
            )
        seen: set[SpecKind] = set()
        for s in specs:
            if s.kind in seen:
                self.diagnostics.append(
                    diag.error(
                        diag.DUPLICATE_SPECIALIZATION,
                        f"duplicate {s.kind.value} specialization",
                        s.span,
                        self.file,
                    )
                )
            seen.add(s.kind)
        return specs, end

    def _parse_one_specialization(self) -> SpecDecl:
        tok = self._current()
        if tok.is_keyword("body"):
            start = self._advance().span
            block = self._parse_block()
            return SpecDecl(start.union(block.span), SpecKind.BODY, SpecImpl.PROVIDED, block)
        if tok.is_keyword("adjoint"):
            start = self._advance().span
            if self._at_keyword("controlled"):
                self._advance()
                return self._parse_spec_tail(SpecKind.CONTROLLED_ADJOINT, start, ctl=True)
            return self._parse_spec_tail(SpecKind.ADJOINT, start, ctl=False)
        if tok.is_keyword("controlled"):
            start = self._advance().span
            if self._at_keyword("adjoint"):
                self._advance()
                return self._parse_spec_tail(SpecKind.CONTROLLED_ADJOINT, start, ctl=True)
            return self._parse_spec_tail(SpecKind.CONTROLLED, start, ctl=True)
        raise self._error(
            f"expected a specialization (body/adjoint/controlled), found {self._describe()}",
            diag.MISSING_SPECIALIZATION_BODY,
        )

    def _parse_spec_tail(self, kind: SpecKind, start: Span, ctl: bool) -> SpecDecl:
        if self._at_keyword("auto"):
            end = self._advance().span
            return SpecDecl(start.union(end), kind, SpecImpl.AUTO)
        if self._at_keyword("self"):
            end = self._advance().span
            if kind is SpecKind.CONTROLLED:
                self.diagnostics.append(
                    diag.error(
                        diag.MISSING_SPECIALIZATION_BODY,
                        "a controlled specialization cannot be 'self'",
                        end,
                        self.file,
                    )
                )
            return SpecDecl(start.union(end), kind, SpecImpl.SELF)
        if ctl and self._at_symbol("("):
            self._advance()
            name_tok = self._expect_ident("control register name")
            self._expect_symbol(")")
            block = self._parse_block()
            return SpecDecl(
                start.union(block.span), kind, SpecImpl.PROVIDED, block, name_tok.lexeme
            )
        if not ctl and self._at_symbol("{"):
            block = self._parse_block()
            return SpecDecl(start.union(block.span), kind, SpecImpl.PROVIDED, block)
        raise self._error(
            f"expected 'auto', 'self', or a specialization body after '{kind.value}'",
            diag.MISSING_SPECIALIZATION_BODY,
        )

    # ── Statements ───────────────────────────────────────────────────────

    def _parse_block(self) -> Block:
        start = self._expect_symbol("{").span
        stmts: list[Stmt] = []
        while not self._at_symbol("}") and not self._at_eof():
            try:
                stmts.append(self._parse_statement())
            except _ParseError:
                self._sync_statement()
        end = self._expect_symbol("}").span
        return Block(start.union(end), stmts)

    def _sync_statement(self) -> None:
        depth = 0
        while not self._at_eof():
            tok = self._current()
            if tok.is_symbol(";") and depth == 0:
                self._advance()
                return
            if tok.is_symbol("{"):
                depth += 1
            elif tok.is_symbol("}"):
                if depth == 0:
                    return
                depth -= 1
            self._advance()

    def _parse_statement(self) -> Stmt:
        tok = self._current()
        if tok.is_keyword("let"):
            return self._parse_let()
        if tok.is_keyword("mutable"):
            return self._parse_mutable()
        if tok.is_keyword("set"):
            return self._parse_set()
        if tok.is_keyword("if"):
            return self._parse_if()
        if tok.is_keyword("for"):
            return self._parse_for()
        if tok.is_keyword("repeat"):
            return self._parse_repeat()
        if tok.is_keyword("return"):
            return self._parse_return()
        if tok.is_keyword("fail"):
            return self._parse_fail()
        if tok.is_keyword("using") or tok.is_keyword("borrowing"):
            return self._parse_allocate()
        expr = self.parse_expression()
        end = self._expect_symbol(";").span
        return ExprStmt(expr.span.union(end), expr)

    def _parse_let(self) -> LetStmt:
        start = self._expect_keyword("let").span
        pattern = self._parse_pattern()
        self._expect_symbol("=")
        value = self.parse_expression()
        end = self._expect_symbol(";").span
        return LetStmt(start.union(end), pattern, value)

    def _parse_pattern(self) -> Pattern:
        if self._at_symbol("("):
            start = self._advance().span
            items: list[Pattern] = []
            if not self._at_symbol(")"):
                while True:
                    items.append(self._parse_pattern())
                    if self._at_symbol(","):
                        self._advance()
                        continue
                    break
            end = self._expect_symbol(")").span
            if len(items) == 1:
                return items[0]
            return TuplePattern(start.union(end), items)
        tok = self._expect_ident("binding name")
        return NamePattern(tok.span, tok.lexeme)

    def _parse_mutable(self) -> MutableStmt:
        start = self._expect_keyword("mutable").span
        name_tok = self._expect_ident("binding name")
        self._expect_symbol("=")
        value = self.parse_expression()
        end = self._expect_symbol(";").span
        return MutableStmt(start.union(end), name_tok.lexeme, value)

    def _parse_set(self) -> SetStmt:
        start = self._expect_keyword("set").span
        name_tok = self._expect_ident("binding name")
        self._expect_symbol("=")
        value = self.parse_expression()
        end = self._expect_symbol(";").span
        return SetStmt(start.union(end), name_tok.lexeme, value)

    def _parse_if(self) -> IfStmt:
        start = self._expect_keyword("if").span
        branches: list[tuple[Expr, Block]] = []
        self._expect_symbol("(")
        cond = self.parse_expression()
        self._expect_symbol(")")
        block = self._parse_block()
        branches.append((cond, block))
        end = block.span
        else_block = None
        while self._at_keyword("elif"):
            self._advance()
            self._expect_symbol("(")
            cond = self.parse_expression()
            self._expect_symbol(")")
            block = self._parse_block()
            branches.append((cond, block))
            end = block.span
        if self._at_keyword("else"):
            self._advance()
            else_block = self._parse_block()
            end = else_block.span
        return IfStmt(start.union(end), branches, else_block)

    def _parse_for(self) -> ForStmt:
        start = self._expect_keyword("for").span
        self._expect_symbol("(")
        var_tok = self._expect_ident("loop variable")
        self._expect_keyword("in")
        iterable = self.parse_expression()
        self._expect_symbol(")")
        body = self._parse_block()
        return ForStmt(
            start.union(body.span), var_tok.lexeme, var_tok.span, iterable, body
        )

    def _parse_repeat(self) -> RepeatStmt:
        start = self._expect_keyword("repeat").span
        body = self._parse_block()
        self._expect_keyword("until")
        condition = self.parse_expression()
        self._expect_keyword("fixup")
        fixup = self._parse_block()
        return RepeatStmt(start.union(fixup.span), body, condition, fixup)

    def _parse_return(self) -> ReturnStmt:
        start = self._expect_keyword("return").span
        value = self.parse_expression()
        end = self._expect_symbol(";").span
        return ReturnStmt(start.union(end), value)

    def _parse_fail(self) -> FailStmt:
        start = self._expect_keyword("fail").span
        message = self.parse_expression()
        end = self._expect_symbol(";").span
        return FailStmt(start.union(end), message)

    def _parse_allocate(self) -> AllocateStmt:
        kw = self._advance()
        borrowing = kw.lexeme == "borrowing"
        self._expect_symbol("(")
        name_tok = self._expect_ident("binding name")
        self._expect_symbol("=")
        qubit_tok = self._expect_ident("'Qubit'")
        if qubit_tok.lexeme != "Qubit":
            raise self._error("allocation must use Qubit() or Qubit[n]")
        count: Expr | None
        if self._at_symbol("["):
            self._advance()
            count = self.parse_expression()
            self._expect_symbol("]")
        elif self._at_symbol("("):
            self._advance()
            self._expect_symbol(")")
            count = None
        else:
            raise self._error("allocation must use Qubit() or Qubit[n]")
        self._expect_symbol(")")
        body = self._parse_block()
        return AllocateStmt(
            kw.span.union(body.span), name_tok.lexeme, name_tok.span, count, body, borrowing
        )

    # ── Expressions ──────────────────────────────────────────────────────

    def parse_expression(self) -> Expr:
        first = self._parse_binary(0)
        if not self._at_symbol(".."):
            return first
        self._advance()
        second = self._parse_binary(0)
        if self._at_symbol(".."):
            self._advance()
            third = self._parse_binary(0)
            if self._at_symbol(".."):
                raise self._error(
                    "a range has at most three parts: start..step..end",
                    diag.BAD_RANGE,
                )
            return RangeExpr(
                first.span.union(third.span), start=first, step=second, end=third
            )
        return RangeExpr(first.span.union(second.span), start=first, step=None, end=second)

    def _parse_binary(self, min_bp: int) -> Expr:
        left = self._parse_unary()
        while True:
            tok = self._current()
            if tok.kind is not TokenKind.SYMBOL:
                return left
            bp = _BINARY_BP.get(tok.lexeme, 0)
            if bp <= min_bp:
                return left
            self._advance()
            right = self._parse_binary(bp)
            left = BinaryExpr(
                left.span.union(right.span), op=tok.lexeme, left=left, right=right
            )

    def _parse_unary(self) -> Expr:
        tok = self._current()
        if tok.kind is TokenKind.SYMBOL and tok.lexeme in ("-", "!", "~"):
            self._advance()
            operand = self._parse_unary()
            return UnaryExpr(tok.span.union(operand.span), op=tok.lexeme, operand=operand)
        return self._parse_functor()

    def _parse_functor(self) -> Expr:
        tok = self._current()
        if tok.kind is TokenKind.IDENT and tok.lexeme in ("Adjoint", "Controlled"):
            self._advance()
            operand = self._parse_functor()
            return FunctorExpr(
                tok.span.union(operand.span), functor=tok.lexeme, operand=operand
            )
        return self._parse_postfix()

    def _parse_postfix(self) -> Expr:
        expr = self._parse_primary()
        while True:
            if self._at_symbol("("):
                self._advance()
                args: list[Expr] = []
                if not self._at_symbol(")"):
                    while True:
                        args.append(self.parse_expression())
                        if self._at_symbol(","):
                            self._advance()
                            continue
                        break
                end = self._expect_symbol(")").span
                expr = CallExpr(expr.span.union(end), callee=expr, args=args)
            elif self._at_symbol("["):
                self._advance()
                index = self.parse_expression()
                end = self._expect_symbol("]").span
                expr = IndexExpr(expr.span.union(end), base=expr, index=index)
            else:
                return expr

    _PAULI_NAMES = {
        "PauliI": PauliKind.I,
        "PauliX": PauliKind.X,
        "PauliY": PauliKind.Y,
        "PauliZ": PauliKind.Z,
    }

    def _parse_primary(self) -> Expr:
        tok = self._current()
        if tok.kind is TokenKind.INT:
            self._advance()
            return IntLit(tok.span, value=int(tok.lexeme))
        if tok.kind is TokenKind.DOUBLE:
            self._advance()
            return DoubleLit(tok.span, value=float(tok.lexeme))
        if tok.kind is TokenKind.STRING:
            self._advance()
            return StringLit(tok.span, value=_unescape(tok.lexeme[1:-1]))
        if tok.kind is TokenKind.INTERP_STRING:
            self._advance()
            return self._parse_interpolation(tok)
        if tok.is_keyword("true") or tok.is_keyword("false"):
            self._advance()
            return BoolLit(tok.span, value=tok.lexeme == "true")
        if tok.is_symbol("_"):
            self._advance()
            return Hole(tok.span)
        if tok.is_symbol("("):
            return self._parse_paren()
        if tok.is_symbol("["):
            return self._parse_array()
        if tok.kind is TokenKind.IDENT:
            if tok.lexeme in self._PAULI_NAMES:
                self._advance()
                return PauliLit(tok.span, kind=self._PAULI_NAMES[tok.lexeme])
            if tok.lexeme in ("Zero", "One"):
                self._advance()
                return ResultLit(tok.span, one=tok.lexeme == "One")
            start = tok.span
            name = self._parse_dotted_name("name")
            end = self.tokens[self.pos - 1].span
            return Name(start.union(end), name=name)
        raise self._error(f"expected an expression, found {self._describe()}")

    def _parse_paren(self) -> Expr:
        start = self._expect_symbol("(").span
        if self._at_symbol(")"):
            end = self._advance().span
            return TupleExpr(start.union(end), items=[])
        items = [self.parse_expression()]
        while self._at_symbol(","):
            self._advance()
            items.append(self.parse_expression())
        end = self._expect_symbol(")").span
        if len(items) == 1:
            # Parenthesized expression: singleton tuples do not exist.
            return items[0]
        return TupleExpr(start.union(end), items=items)

    def _parse_array(self) -> Expr:
        start = self._expect_symbol("[").span
        items: list[Expr] = []
        if not self._at_symbol("]"):
            while True:
                items.append(self.parse_expression())
                if self._at_symbol(";"):
                    self._advance()
                    continue
                break
        end = self._expect_symbol("]").span
        return ArrayExpr(start.union(end), items=items)

    def _parse_interpolation(self, tok: Token) -> InterpString:
        """Split a ``$"..."`` token and parse each embedded expression."""
        body = tok.lexeme[2:-1] if tok.lexeme.endswith('"') else tok.lexeme[2:]
        base = tok.span.start + 2
        parts: list = []
        text: list[str] = []
        i = 0
        while i < len(body):
            ch = body[i]
            if ch == "\\" and i + 1 < len(body):
                text.append(_unescape(body[i : i + 2]))
                i += 2
                continue
            if ch == "{":
                depth = 1
                j = i + 1
                while j < len(body) and depth > 0:
                    if body[j] == "{":
                        depth += 1
                    elif body[j] == "}":
                        depth -= 1
                    j += 1
                if depth > 0:
                    self.diagnostics.append(
                        diag.error(
                            diag.UNEXPECTED_TOKEN,
                            "unterminated interpolation hole",
                            Span(base + i, base + len(body)),
                            self.file,
                        )
                    )
                    break
                if text:
                    parts.append("".join(text))
                    text = []
                parts.append(self._parse_embedded(body[i + 1 : j - 1], base + i + 1))
                i = j
                continue
            text.append(ch)
            i += 1
        if text:
            parts.append("".join(text))
        return InterpString(tok.span, parts=parts)

    def _parse_embedded(self, text: str, offset: int) -> Expr:
        tokens, lex_diags = tokenize(text, self.file)
        shifted = [
            Token(t.kind, t.lexeme, Span(t.span.start + offset, t.span.end + offset))
            for t in tokens
        ]
        for d in lex_diags:
            self.diagnostics.append(
                diag.Diagnostic(
                    d.severity,
                    d.code,
                    d.message,
                    Span(d.span.start + offset, d.span.end + offset),
                    self.file,
                )
            )
        sub = Parser(shifted, self.file)
        try:
            expr = sub.parse_expression()
            if not sub._at_eof():
                sub._error("unexpected trailing tokens in interpolation hole")
        except _ParseError:
            expr = TupleExpr(Span(offset, offset + len(text)), items=[])
        self.diagnostics.extend(sub.diagnostics)
        return expr

    # ── Types ────────────────────────────────────────────────────────────

    def _parse_type(self) -> TypeNode:
        ty = self._parse_atomic_type()
        while self._at_symbol("["):
            if not self._peek().is_symbol("]"):
                break
            self._advance()
            end = self._advance().span
            ty = ArrayTypeNode(ty.span.union(end), ty)
        return ty

    def _parse_atomic_type(self) -> TypeNode:
        tok = self._current()
        if tok.kind is TokenKind.TYPE_PARAM:
            self._advance()
            return TypeParamNode(tok.span, tok.lexeme)
        if tok.kind is TokenKind.IDENT:
            start = tok.span
            name = self._parse_dotted_name("type name")
            end = self.tokens[self.pos - 1].span
            return NamedTypeNode(start.union(end), name)
        if tok.is_symbol("("):
            return self._parse_paren_type()
        raise self._error(f"expected a type, found {self._describe()}")

    def _parse_paren_type(self) -> TypeNode:
        start = self._expect_symbol("(").span
        if self._at_symbol(")"):
            end = self._advance().span
            return TupleTypeNode(start.union(end), [])
        first = self._parse_type()
        if self._at_symbol("=>") or self._at_symbol("->"):
            is_operation = self._advance().lexeme == "=>"
            output = self._parse_type()
            functors: list[str] = []
            if is_operation and self._at_symbol(":"):
                self._advance()
                while True:
                    f = self._expect_ident("functor name")
                    if f.lexeme not in ("Adjoint", "Controlled"):
                        self.diagnostics.append(
                            diag.error(
                                diag.UNEXPECTED_TOKEN,
                                f"unknown functor {f.lexeme!r}",
                                f.span,
                                self.file,
                            )
                        )
                    else:
                        functors.append(f.lexeme)
                    if self._at_symbol(","):
                        self._advance()
                        continue
                    break
            end = self._expect_symbol(")").span
            return CallableTypeNode(
                start.union(end), is_operation, first, output, functors
            )
        if self._at_symbol(","):
            items = [first]
            while self._at_symbol(","):
                self._advance()
                items.append(self._parse_type())
            end = self._expect_symbol(")").span
            return TupleTypeNode(start.union(end), items)
        self._expect_symbol(")")
        return first  # parenthesized type: (T) is T


def _unescape(raw: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\" and i + 1 < len(raw):
            nxt = raw[i + 1]
            out.append({"n": "\n", "t": "\t", "r": "\r"}.get(nxt, nxt))
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


# ── Public entry points ──────────────────────────────────────────────────────


def parse_program(text: str, file: str = "<input>") -> tuple[Program, list[Diagnostic]]:
    tokens, lex_diags = tokenize(text, file)
    parser = Parser(tokens, file)
    program = parser.parse_program()
    return program, lex_diags + parser.diagnostics


def parse_statements(text: str, file: str = "<input>") -> tuple[list[Stmt], list[Diagnostic]]:
    """Parse a statement sequence (used for snippet-style sources)."""
    tokens, lex_diags = tokenize(text, file)
    parser = Parser(tokens, file)
    stmts: list[Stmt] = []
    while not parser._at_eof():
        try:
            stmts.append(parser._parse_statement())
        except _ParseError:
            parser._sync_statement()
    return stmts, lex_diags + parser.diagnostics


def parse_expression(text: str, file: str = "<input>") -> tuple[Expr, list[Diagnostic]]:
    tokens, lex_diags = tokenize(text, file)
    parser = Parser(tokens, file)
    try:
        expr = parser.parse_expression()
        if not parser._at_eof():
            parser._error("unexpected trailing tokens")
    except _ParseError:
        expr = TupleExpr(Span(0, len(text)), items=[])
    return expr, lex_diags + parser.diagnostics
