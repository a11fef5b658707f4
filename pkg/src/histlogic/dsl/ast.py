"""Syntax tree of the model language and a formatter that prints it back as source.

Every node carries its source location in ``loc``; locations are excluded
from equality so that a formatted and reparsed tree compares equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Loc = tuple[int, int]


def _loc():
    return field(default=(0, 0), compare=False, repr=False)


# -- value expressions -------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex
    loc: Loc = _loc()


@dataclass(frozen=True)
class Name:
    name: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class Ket:
    labels: tuple[str, ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class NotOp:
    operand: "Expr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class KetProj:
    """``ket v``: projector onto the normalized vector ``v``."""

    operand: "Expr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class Call:
    func: str  # sqrt, exp, tensor
    args: tuple["Expr", ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class Span:
    vectors: tuple["Expr", ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class Diag:
    bits: tuple[int, ...]
    on: tuple[str, ...] = ()
    loc: Loc = _loc()


@dataclass(frozen=True)
class MatrixLit:
    rows: tuple[tuple["Expr", ...], ...]
    on: tuple[str, ...] = ()
    loc: Loc = _loc()


Expr = Union[Num, Name, Ket, BinOp, Neg, NotOp, KetProj, Call, Span, Diag, MatrixLit]


# -- step bodies -------------------------------------------------------------

@dataclass(frozen=True)
class IdentityStep:
    loc: Loc = _loc()


@dataclass(frozen=True)
class MapStep:
    pairs: tuple[tuple[Expr, Expr], ...]
    loc: Loc = _loc()


# -- histories ---------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    expr: Expr
    time: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class HRef:
    name: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class HEvents:
    events: tuple[Event, ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class HNot:
    operand: "HExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class HAnd:
    left: "HExpr"
    right: "HExpr"
    loc: Loc = _loc()


@dataclass(frozen=True)
class HOr:
    left: "HExpr"
    right: "HExpr"
    loc: Loc = _loc()


HExpr = Union[HRef, HEvents, HNot, HAnd, HOr]


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class SpaceDecl:
    name: str
    dim: int
    labels: tuple[str, ...] = ()
    loc: Loc = _loc()


@dataclass(frozen=True)
class StateDecl:
    name: str
    expr: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class ProjectorDecl:
    name: str
    expr: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class TimesDecl:
    labels: tuple[str, ...]
    values: tuple[float | None, ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class HamiltonianDecl:
    expr: Expr
    loc: Loc = _loc()


@dataclass(frozen=True)
class StepDecl:
    t_from: str
    t_to: str
    body: Union[Expr, IdentityStep, MapStep]
    loc: Loc = _loc()


@dataclass(frozen=True)
class HistoryDecl:
    name: str
    events: tuple[Event, ...] = ()
    matrix: MatrixLit | None = None
    loc: Loc = _loc()


@dataclass(frozen=True)
class FamilyDecl:
    name: str
    entries: tuple[Union[HRef, Event], ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class ProbQuery:
    target: HExpr
    given: HExpr
    family: str | None = None
    loc: Loc = _loc()


@dataclass(frozen=True)
class ConsistentQuery:
    family: str
    loc: Loc = _loc()


@dataclass(frozen=True)
class InferQuery:
    assumptions: tuple[tuple[str, HExpr], ...]
    conclusions: tuple[tuple[str, HExpr], ...]
    loc: Loc = _loc()


@dataclass(frozen=True)
class CompatibleQuery:
    families: tuple[str, ...]
    loc: Loc = _loc()


Query = Union[ProbQuery, ConsistentQuery, InferQuery, CompatibleQuery]
Statement = Union[SpaceDecl, StateDecl, ProjectorDecl, TimesDecl, HamiltonianDecl, StepDecl,
                  HistoryDecl, FamilyDecl, Query]


@dataclass(frozen=True)
class ModelSpec:
    statements: tuple[Statement, ...]

    @property
    def queries(self) -> tuple[Query, ...]:
        return tuple(s for s in self.statements if isinstance(s, (ProbQuery, ConsistentQuery, InferQuery,
                                                                    CompatibleQuery)))

    @property
    def declarations(self) -> tuple[Statement, ...]:
        qs = set(map(id, self.queries))
        return tuple(s for s in self.statements if id(s) not in qs)


# -- formatting --------------------------------------------------------------

def _num(v: complex) -> str:
    v = complex(v)
    if v.imag == 0:
        return repr(v.real)
    return f"{v.imag!r}i"


def format_expr(e) -> str:
    if isinstance(e, Num):
        return _num(e.value)
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Ket):
        return "|" + ",".join(e.labels) + ">"
    if isinstance(e, BinOp):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(-{format_expr(e.operand)})"
    if isinstance(e, NotOp):
        return f"(not {format_expr(e.operand)})"
    if isinstance(e, KetProj):
        return f"(ket {format_expr(e.operand)})"
    if isinstance(e, Call):
        return f"{e.func}(" + ", ".join(format_expr(a) for a in e.args) + ")"
    if isinstance(e, Span):
        return "span {" + ", ".join(format_expr(v) for v in e.vectors) + "}"
    if isinstance(e, Diag):
        on = f" on {' '.join(e.on)}" if e.on else ""
        return f"(diag {' '.join(map(str, e.bits))}{on})"
    if isinstance(e, MatrixLit):
        rows = ", ".join("[" + ", ".join(format_expr(x) for x in r) + "]" for r in e.rows)
        on = f" on {' '.join(e.on)}" if e.on else ""
        return f"(matrix [{rows}]{on})"
    raise TypeError(f"not an expression: {e!r}")


def format_event(ev: Event) -> str:
    return f"{format_expr(ev.expr)} @ {ev.time}"


def format_hexpr(h) -> str:
    if isinstance(h, HRef):
        return h.name
    if isinstance(h, HEvents):
        return "(" + ", ".join(format_event(ev) for ev in h.events) + ")"
    if isinstance(h, HNot):
        return f"(not {format_hexpr(h.operand)})"
    if isinstance(h, HAnd):
        return f"({format_hexpr(h.left)} and {format_hexpr(h.right)})"
    if isinstance(h, HOr):
        return f"({format_hexpr(h.left)} or {format_hexpr(h.right)})"
    raise TypeError(f"not a history expression: {h!r}")


def _pairs(pairs) -> str:
    return "{" + " ".join(f"({f}, {format_hexpr(h)})" for f, h in pairs) + "}"


def format_statement(s) -> str:
    if isinstance(s, SpaceDecl):
        basis = f" basis {' '.join(s.labels)}" if s.labels else ""
        return f"space {s.name} dim {s.dim}{basis}"
    if isinstance(s, StateDecl):
        return f"state {s.name} = {format_expr(s.expr)}"
    if isinstance(s, ProjectorDecl):
        return f"projector {s.name} = {format_expr(s.expr)}"
    if isinstance(s, TimesDecl):
        return "times " + " ".join(l if v is None else f"{l}={v!r}" for l, v in zip(s.labels, s.values))
    if isinstance(s, HamiltonianDecl):
        return f"hamiltonian {format_expr(s.expr)}"
    if isinstance(s, StepDecl):
        if isinstance(s.body, IdentityStep):
            body = "identity"
        elif isinstance(s.body, MapStep):
            body = "map {" + ", ".join(f"{format_expr(a)} -> {format_expr(b)}" for a, b in s.body.pairs) + "}"
        else:
            body = format_expr(s.body)
        return f"step {s.t_from} {s.t_to} {body}"
    if isinstance(s, HistoryDecl):
        if s.matrix is not None:
            return f"history {s.name} = {format_expr(s.matrix)[1:-1]}"
        return f"history {s.name} = " + ", ".join(format_event(ev) for ev in s.events)
    if isinstance(s, FamilyDecl):
        entries = " ".join(e.name if isinstance(e, HRef) else f"({format_event(e)})" for e in s.entries)
        return f"family {s.name} = {{{entries}}}"
    if isinstance(s, ProbQuery):
        tail = f" in {s.family}" if s.family else ""
        return f"query prob {format_hexpr(s.target)} given {format_hexpr(s.given)}{tail}"
    if isinstance(s, ConsistentQuery):
        return f"query consistent {s.family}"
    if isinstance(s, InferQuery):
        return f"query infer {_pairs(s.assumptions)} => {_pairs(s.conclusions)}"
    if isinstance(s, CompatibleQuery):
        return "query compatible {" + " ".join(s.families) + "}"
    raise TypeError(f"not a statement: {s!r}")


def format_model(spec: ModelSpec) -> str:
    return "".join(format_statement(s) + "\n" for s in spec.statements)
