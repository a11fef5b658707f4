"""Recursive-descent parser for ``.hl`` model files."""

from __future__ import annotations

from . import ast
from .errors import DslError, syntax_error
from .lexer import EOF, KET, NAME, NEWLINE, NUMBER, OP, Token, tokenize

CALLS = frozenset({"sqrt", "exp", "tensor"})
QUERY_WORDS = frozenset({"and", "or", "not", "given", "in"})
RESERVED = frozenset({"space", "state", "projector", "times", "hamiltonian", "step", "history", "family",
                      "query", "dim", "basis", "ket", "span", "diag", "matrix", "on", "map", "identity",
                      "prob", "consistent", "infer", "compatible", "I", "i", "pi"}
                     | CALLS | QUERY_WORDS)


def parse_number(text: str) -> complex:
    if text.endswith("i"):
        return complex(0, float(text[:-1]))
    return complex(float(text), 0)


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def advance(self) -> Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def error(self, message: str, tok: Token | None = None) -> DslError:
        t = tok or self.tok
        found = "end of line" if t.kind in (NEWLINE, EOF) else repr(t.text)
        return syntax_error(f"{message}, found {found}", t.line, t.col)

    def expect_op(self, text: str) -> Token:
        if not self.tok.is_op(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_word(self, text: str) -> Token:
        if not self.tok.is_word(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_name(self, what: str = "a name") -> Token:
        if self.tok.kind != NAME:
            raise self.error(f"expected {what}")
        return self.advance()

    def accept_op(self, text: str) -> bool:
        if self.tok.is_op(text):
            self.advance()
            return True
        return False

    def attempt(self, fn):
        """Run ``fn``; on a syntax error rewind and return ``None``."""
        start = self.pos
        try:
            return fn()
        except DslError:
            self.pos = start
            return None

    @staticmethod
    def loc(t: Token) -> ast.Loc:
        return (t.line, t.col)

    # -- program -------------------------------------------------------------

    def program(self) -> ast.ModelSpec:
        statements = []
        while self.tok.kind != EOF:
            if self.tok.kind == NEWLINE:
                self.advance()
                continue
            statements.append(self.statement())
            if self.tok.kind not in (NEWLINE, EOF):
                raise self.error("expected end of statement")
        return ast.ModelSpec(tuple(statements))

    def statement(self):
        t = self.tok
        if t.kind != NAME:
            raise self.error("expected a statement keyword")
        handler = getattr(self, f"stmt_{t.text}", None)
        if handler is None:
            raise self.error("expected a statement keyword")
        self.advance()
        return handler(t)

    def decl_name(self) -> Token:
        t = self.expect_name("a name to declare")
        if t.text in RESERVED:
            raise syntax_error(f"{t.text!r} is a reserved word", t.line, t.col)
        return t

    def stmt_space(self, start):
        name = self.decl_name()
        self.expect_word("dim")
        d = self.tok
        if d.kind != NUMBER or not d.text.isdigit() or int(d.text) < 1:
            raise self.error("expected a positive integer dimension")
        self.advance()
        labels = []
        if self.tok.is_word("basis"):
            self.advance()
            while self.tok.kind in (NAME, NUMBER):
                labels.append(self.advance().text)
        return ast.SpaceDecl(name.text, int(d.text), tuple(labels), self.loc(start))

    def stmt_state(self, start):
        name = self.decl_name()
        self.expect_op("=")
        return ast.StateDecl(name.text, self.expr(), self.loc(start))

    def stmt_projector(self, start):
        name = self.decl_name()
        self.expect_op("=")
        return ast.ProjectorDecl(name.text, self.expr(), self.loc(start))

    def stmt_times(self, start):
        labels, values = [], []
        while self.tok.kind == NAME:
            labels.append(self.advance().text)
            value = None
            if self.accept_op("="):
                sign = -1.0 if self.accept_op("-") else 1.0
                if self.tok.kind != NUMBER or self.tok.text.endswith("i"):
                    raise self.error("expected a real time value")
                value = sign * float(self.advance().text)
            values.append(value)
        if not labels:
            raise self.error("expected time labels")
        return ast.TimesDecl(tuple(labels), tuple(values), self.loc(start))

    def stmt_hamiltonian(self, start):
        return ast.HamiltonianDecl(self.expr(), self.loc(start))

    def stmt_step(self, start):
        a = self.expect_name("a time label").text
        b = self.expect_name("a time label").text
        if self.tok.is_word("identity"):
            body = ast.IdentityStep(self.loc(self.advance()))
        elif self.tok.is_word("map"):
            m = self.advance()
            self.expect_op("{")
            pairs = []
            while not self.tok.is_op("}"):
                src = self.expr()
                self.expect_op("->")
                pairs.append((src, self.expr()))
                if not self.accept_op(","):
                    break
            self.expect_op("}")
            body = ast.MapStep(tuple(pairs), self.loc(m))
        else:
            body = self.expr()
        return ast.StepDecl(a, b, body, self.loc(start))

    def stmt_history(self, start):
        name = self.decl_name()
        self.expect_op("=")
        if self.tok.is_word("matrix"):
            return ast.HistoryDecl(name.text, (), self.matrix(), self.loc(start))
        events = [self.event()]
        while self.accept_op(","):
            events.append(self.event())
        return ast.HistoryDecl(name.text, tuple(events), None, self.loc(start))

    def stmt_family(self, start):
        name = self.decl_name()
        self.expect_op("=")
        self.expect_op("{")
        entries = []
        while not self.tok.is_op("}"):
            entries.append(self.family_entry())
            self.accept_op(",")
        self.expect_op("}")
        return ast.FamilyDecl(name.text, tuple(entries), self.loc(start))

    def family_entry(self):
        ev = self.attempt(self.event)
        if ev is not None:
            return ev
        if self.tok.is_op("("):
            def wrapped():
                self.expect_op("(")
                e = self.event()
                self.expect_op(")")
                return e
            ev = self.attempt(wrapped)
            if ev is not None:
                return ev
        t = self.expect_name("a history name or 'projector @ time'")
        return ast.HRef(t.text, self.loc(t))

    def stmt_query(self, start):
        kind = self.expect_name("a query kind")
        loc = self.loc(start)
        if kind.text == "prob":
            target = self.hexpr()
            self.expect_word("given")
            given = self.hexpr()
            family = None
            if self.tok.is_word("in"):
                self.advance()
                family = self.expect_name("a family name").text
            return ast.ProbQuery(target, given, family, loc)
        if kind.text == "consistent":
            return ast.ConsistentQuery(self.expect_name("a family name").text, loc)
        if kind.text == "infer":
            assumptions = self.pair_set()
            self.expect_op("=>")
            return ast.InferQuery(assumptions, self.pair_set(), loc)
        if kind.text == "compatible":
            self.expect_op("{")
            names = []
            while not self.tok.is_op("}"):
                names.append(self.expect_name("a family name").text)
                self.accept_op(",")
            self.expect_op("}")
            return ast.CompatibleQuery(tuple(names), loc)
        raise self.error("expected prob, consistent, infer or compatible", kind)

    def pair_set(self):
        self.expect_op("{")
        pairs = []
        while not self.tok.is_op("}"):
            self.expect_op("(")
            fam = self.expect_name("a family name").text
            self.expect_op(",")
            pairs.append((fam, self.hexpr()))
            self.expect_op(")")
            self.accept_op(",")
        self.expect_op("}")
        return tuple(pairs)

    # -- histories -----------------------------------------------------------

    def event(self) -> ast.Event:
        start = self.tok
        e = self.expr()
        self.expect_op("@")
        t = self.expect_name("a time label")
        return ast.Event(e, t.text, self.loc(start))

    def hexpr(self):
        left = self.h_and()
        while self.tok.is_word("or"):
            t = self.advance()
            left = ast.HOr(left, self.h_and(), self.loc(t))
        return left

    def h_and(self):
        left = self.h_not()
        while self.tok.is_word("and"):
            t = self.advance()
            left = ast.HAnd(left, self.h_not(), self.loc(t))
        return left

    def h_not(self):
        if self.tok.is_word("not"):
            t = self.advance()
            return ast.HNot(self.h_not(), self.loc(t))
        return self.h_primary()

    def h_primary(self):
        start = self.tok

        def events():
            evs = [self.event()]
            while self.tok.is_op(","):
                # a comma followed by something that is not an event ends the list
                more = self.attempt(lambda: (self.advance(), self.event())[1])
                if more is None:
                    break
                evs.append(more)
            return ast.HEvents(tuple(evs), self.loc(start))

        found = self.attempt(events)
        if found is not None:
            return found
        if self.accept_op("("):
            inner = self.hexpr()
            self.expect_op(")")
            return inner
        t = self.expect_name("a history")
        if t.text in QUERY_WORDS:
            raise syntax_error(f"unexpected {t.text!r}", t.line, t.col)
        return ast.HRef(t.text, self.loc(t))

    # -- value expressions ---------------------------------------------------

    def expr(self):
        left = self.term()
        while self.tok.kind == OP and self.tok.text in "+-":
            t = self.advance()
            left = ast.BinOp(t.text, left, self.term(), self.loc(t))
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == OP and self.tok.text in "*/":
            t = self.advance()
            left = ast.BinOp(t.text, left, self.unary(), self.loc(t))
        return left

    def unary(self):
        t = self.tok
        if t.is_op("-"):
            self.advance()
            return ast.Neg(self.unary(), self.loc(t))
        if t.is_word("not"):
            self.advance()
            return ast.NotOp(self.unary(), self.loc(t))
        if t.is_word("ket"):
            self.advance()
            return ast.KetProj(self.unary(), self.loc(t))
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == NUMBER:
            self.advance()
            return ast.Num(parse_number(t.text), self.loc(t))
        if t.kind == KET:
            self.advance()
            inner = t.text[1:-1]
            labels = tuple(x.strip() for x in inner.split(",")) if inner.strip() else ()
            if not labels or any(not x for x in labels):
                raise syntax_error("empty label in ket", t.line, t.col)
            return ast.Ket(labels, self.loc(t))
        if t.is_op("("):
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        if t.kind == NAME:
            if t.text in CALLS and self.peek().is_op("("):
                self.advance()
                self.advance()
                args = [self.expr()]
                while self.accept_op(","):
                    args.append(self.expr())
                self.expect_op(")")
                return ast.Call(t.text, tuple(args), self.loc(t))
            if t.text == "span":
                self.advance()
                self.expect_op("{")
                vecs = []
                while not self.tok.is_op("}"):
                    vecs.append(self.expr())
                    self.accept_op(",")
                self.expect_op("}")
                if not vecs:
                    raise syntax_error("span needs at least one vector", t.line, t.col)
                return ast.Span(tuple(vecs), self.loc(t))
            if t.text == "diag":
                self.advance()
                bits = []
                while self.tok.kind == NUMBER and self.tok.text in ("0", "1"):
                    bits.append(int(self.advance().text))
                if not bits:
                    raise self.error("expected 0/1 entries after 'diag'")
                return ast.Diag(tuple(bits), self.on_clause(), self.loc(t))
            if t.text == "matrix":
                return self.matrix()
            if t.text in QUERY_WORDS or t.text in ("span", "diag", "matrix", "on", "map", "identity"):
                raise self.error("expected an expression")
            self.advance()
            return ast.Name(t.text, self.loc(t))
        raise self.error("expected an expression")

    def on_clause(self) -> tuple[str, ...]:
        if not self.tok.is_word("on"):
            return ()
        self.advance()
        names = []
        while self.tok.kind == NAME and self.tok.text not in RESERVED:
            names.append(self.advance().text)
        if not names:
            raise self.error("expected space names after 'on'")
        return tuple(names)

    def matrix(self) -> ast.MatrixLit:
        start = self.expect_word("matrix")
        self.expect_op("[")
        rows = []
        while True:
            self.expect_op("[")
            row = [self.expr()]
            while self.accept_op(","):
                row.append(self.expr())
            self.expect_op("]")
            rows.append(tuple(row))
            if not self.accept_op(","):
                break
        self.expect_op("]")
        if any(len(r) != len(rows) for r in rows):
            raise syntax_error("matrix literal must be square", start.line, start.col)
        return ast.MatrixLit(tuple(rows), self.on_clause(), self.loc(start))


def parse_program(text: str) -> ast.ModelSpec:
    """Syntax only: build the tree without resolving names."""
    return Parser(text).program()


def parse_query(text: str) -> ast.Statement:
    """Parse a single query; the leading ``query`` keyword is optional."""
    stripped = text.strip()
    if not stripped.startswith("query"):
        stripped = "query " + stripped
    spec = parse_program(stripped)
    if len(spec.statements) != 1 or not spec.queries:
        raise syntax_error("expected exactly one query", 1, 1)
    return spec.statements[0]


def parse_expression(text: str):
    p = Parser(text)
    e = p.expr()
    if p.tok.kind not in (NEWLINE, EOF):
        raise p.error("unexpected trailing input")
    return e
