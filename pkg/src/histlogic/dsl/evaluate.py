"""Elaborate a parsed model into numbers and run its queries.

Values are scalars, vectors or operators.  Vectors and operators remember
their *support*, the sorted tuple of space indices they act on; operators on
different supports are combined after padding with identities.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from ..errors import HistLogicError
from ..histories import (
    DEFAULT_EPS_CONSISTENCY,
    GeneralizedHistory,
    HistoryFamily,
    PropagatorSet,
    SimpleHistory,
    TimeGrid,
    build_family,
    conditional_probability,
    families_compatible,
    infer_histories,
    propagators_explicit,
    propagators_from_hamiltonian,
)
from . import ast
from .errors import DslError
from .parser import parse_program

_SQRT_NAME = re.compile(r"sqrt(\d+(?:\.\d+)?)$")
_LABEL_NUMBER = re.compile(r"^[A-Za-z_]*?(\d+(?:\.\d+)?)$")


@dataclass(frozen=True)
class Vec:
    support: tuple[int, ...]
    data: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Op:
    support: tuple[int, ...]
    data: np.ndarray = field(repr=False)


def _err(kind: str, message: str, loc: ast.Loc = (0, 0)) -> DslError:
    return DslError(kind, message, loc[0], loc[1])


@dataclass
class Spaces:
    names: list[str] = field(default_factory=list)
    dims: list[int] = field(default_factory=list)
    labels: list[tuple[str, ...]] = field(default_factory=list)

    @property
    def full(self) -> tuple[int, ...]:
        return tuple(range(len(self.dims)))

    @property
    def total(self) -> int:
        return int(np.prod(self.dims)) if self.dims else 0

    def size(self, support) -> int:
        return int(np.prod([self.dims[i] for i in support])) if support else 1

    def index(self, name: str, loc) -> int:
        if name not in self.names:
            raise _err("UndeclaredName", f"unknown space {name!r}", loc)
        return self.names.index(name)


def _permute(data: np.ndarray, order: list[int], dims: list[int], vector: bool) -> np.ndarray:
    """Reorder tensor factors listed in ``order`` into ascending order."""
    if order == sorted(order):
        return data
    shape = [dims[i] for i in order]
    inv = list(np.argsort(order))
    k = len(order)
    if vector:
        return data.reshape(shape).transpose(inv).reshape(-1)
    t = data.reshape(shape + shape).transpose(inv + [k + i for i in inv])
    return t.reshape(data.shape)


# -- environment ---------------------------------------------------------------

@dataclass
class Environment:
    """Everything a query can refer to: spaces, named values, dynamics, histories and families."""

    spaces: Spaces = field(default_factory=Spaces)
    values: dict[str, Vec | Op] = field(default_factory=dict)
    kinds: dict[str, str] = field(default_factory=dict)
    grid: TimeGrid | None = None
    props: PropagatorSet | None = None
    histories: dict[str, SimpleHistory | GeneralizedHistory] = field(default_factory=dict)
    family_specs: dict[str, tuple] = field(default_factory=dict)
    family_cache: dict[str, HistoryFamily | DslError] = field(default_factory=dict)
    eps: float = linalg.DEFAULT_EPS
    eps_consistency: float = DEFAULT_EPS_CONSISTENCY

    # -- values --------------------------------------------------------------

    def embed(self, op: Op, support: tuple[int, ...]) -> Op:
        if op.support == support:
            return op
        rest = [i for i in support if i not in op.support]
        data = np.kron(op.data, linalg.identity(self.spaces.size(rest)))
        return Op(support, _permute(data, list(op.support) + rest, self.spaces.dims, False))

    def full_op(self, op: Op) -> np.ndarray:
        return self.embed(op, self.spaces.full).data

    def identity_op(self) -> Op:
        return Op(self.spaces.full, linalg.identity(self.spaces.total))

    def ket(self, node: ast.Ket) -> Vec:
        sp = self.spaces
        if not sp.dims:
            raise _err("ModelError", "declare a space before using kets", node.loc)
        labels = node.labels
        if len(labels) == len(sp.dims):
            idx = [self._label_index(i, lab, node.loc) for i, lab in enumerate(labels)]
            support = sp.full
        else:
            found = []
            for lab in labels:
                owners = [i for i, ls in enumerate(sp.labels) if lab in ls]
                if len(owners) != 1:
                    raise _err("DimensionMismatch",
                               f"ket label {lab!r} does not name a basis state of exactly one space", node.loc)
                found.append((owners[0], sp.labels[owners[0]].index(lab)))
            if len({s for s, _ in found}) != len(found):
                raise _err("DimensionMismatch", "two ket labels refer to the same space", node.loc)
            found.sort()
            support = tuple(s for s, _ in found)
            idx = [i for _, i in found]
        dims = [sp.dims[i] for i in support]
        v = np.zeros(int(np.prod(dims)), dtype=np.complex128)
        v[int(np.ravel_multi_index(idx, dims))] = 1.0
        return Vec(support, v)

    def _label_index(self, space: int, label: str, loc) -> int:
        labels = self.spaces.labels[space]
        if label in labels:
            return labels.index(label)
        if label.isdigit() and int(label) < self.spaces.dims[space]:
            return int(label)
        raise _err("DimensionMismatch", f"{label!r} is not a basis label of space {self.spaces.names[space]!r}", loc)

    def value(self, e):
        """Evaluate a value expression to a complex scalar, a Vec or an Op."""
        if isinstance(e, ast.Num):
            return complex(e.value)
        if isinstance(e, ast.Name):
            return self._name(e)
        if isinstance(e, ast.Ket):
            return self.ket(e)
        if isinstance(e, ast.Neg):
            v = self.value(e.operand)
            return -v if isinstance(v, complex) else type(v)(v.support, -v.data)
        if isinstance(e, ast.BinOp):
            return self._binop(e)
        if isinstance(e, ast.NotOp):
            p = self._expect(self.value(e.operand), Op, "an operator", e.loc)
            return Op(p.support, linalg.identity(p.data.shape[0]) - p.data)
        if isinstance(e, ast.KetProj):
            v = self._expect(self.value(e.operand), Vec, "a vector", e.loc)
            norm = np.linalg.norm(v.data)
            if norm < self.eps:
                raise _err("ModelError", "cannot project onto the zero vector", e.loc)
            u = v.data / norm
            return Op(v.support, np.outer(u, np.conjugate(u)))
        if isinstance(e, ast.Call):
            return self._call(e)
        if isinstance(e, ast.Span):
            vecs = [self._expect(self.value(v), Vec, "a vector", e.loc) for v in e.vectors]
            if len({v.support for v in vecs}) != 1:
                raise _err("DimensionMismatch", "vectors in a span must live on the same spaces", e.loc)
            return Op(vecs[0].support, linalg.projector_onto_span([v.data for v in vecs], self.eps))
        if isinstance(e, ast.Diag):
            support, order = self._on(e.on, e.loc)
            if len(e.bits) != self.spaces.size(support):
                raise _err("DimensionMismatch",
                           f"diag has {len(e.bits)} entries, the spaces have dimension {self.spaces.size(support)}",
                           e.loc)
            data = np.diag(np.array(e.bits, dtype=np.complex128))
            return Op(support, _permute(data, order, self.spaces.dims, False))
        if isinstance(e, ast.MatrixLit):
            return self.matrix(e)
        raise _err("ModelError", f"unsupported expression {e!r}")

    def matrix(self, e: ast.MatrixLit) -> Op:
        data = np.array([[self._scalar(x) for x in row] for row in e.rows], dtype=np.complex128)
        support, order = self._on(e.on, e.loc)
        if data.shape[0] != self.spaces.size(support):
            raise _err("DimensionMismatch",
                       f"matrix has side {data.shape[0]}, the spaces have dimension {self.spaces.size(support)}", e.loc)
        return Op(support, _permute(data, order, self.spaces.dims, False))

    def _on(self, names, loc):
        if not self.spaces.dims:
            raise _err("ModelError", "declare a space first", loc)
        if not names:
            return self.spaces.full, list(self.spaces.full)
        order = [self.spaces.index(n, loc) for n in names]
        if len(set(order)) != len(order):
            raise _err("DimensionMismatch", "a space is listed twice after 'on'", loc)
        return tuple(sorted(order)), order

    def _scalar(self, e) -> complex:
        v = self.value(e)
        if not isinstance(v, complex):
            raise _err("DimensionMismatch", "expected a number", getattr(e, "loc", (0, 0)))
        return v

    @staticmethod
    def _expect(v, kind, what, loc):
        if not isinstance(v, kind):
            raise _err("DimensionMismatch", f"expected {what}", loc)
        return v

    def _name(self, e: ast.Name):
        n = e.name
        if n in self.values:
            return self.values[n]
        if n == "i":
            return 1j
        if n == "pi":
            return complex(math.pi)
        if n == "I":
            return self.identity_op()
        m = _SQRT_NAME.match(n)
        if m:
            return complex(math.sqrt(float(m.group(1))))
        if n in self.kinds:
            raise _err("DimensionMismatch", f"{n!r} is a {self.kinds[n]}, not a value", e.loc)
        raise _err("UndeclaredName", f"undeclared name {n!r}", e.loc)

    def _call(self, e: ast.Call):
        args = [self.value(a) for a in e.args]
        if e.func in ("sqrt", "exp"):
            if len(args) != 1 or not isinstance(args[0], complex):
                raise _err("DimensionMismatch", f"{e.func} takes one number", e.loc)
            x = args[0]
            if e.func == "sqrt":
                return complex(math.sqrt(x.real)) if x.imag == 0 and x.real >= 0 else cmath.sqrt(x)
            return cmath.exp(x)
        # tensor
        if all(isinstance(a, Vec) for a in args):
            kind = Vec
        elif all(isinstance(a, Op) for a in args):
            kind = Op
        else:
            raise _err("DimensionMismatch", "tensor() needs all vectors or all operators", e.loc)
        order = [s for a in args for s in a.support]
        if len(set(order)) != len(order):
            raise _err("DimensionMismatch", "tensor() factors must act on different spaces", e.loc)
        data = args[0].data
        for a in args[1:]:
            data = np.kron(data, a.data)
        return kind(tuple(sorted(order)), _permute(data, order, self.spaces.dims, kind is Vec))

    def _binop(self, e: ast.BinOp):
        a, b = self.value(e.left), self.value(e.right)
        op = e.op
        if isinstance(a, complex) and isinstance(b, complex):
            if op == "/" and b == 0:
                raise _err("ModelError", "division by zero", e.loc)
            return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if op == "/" else 0}[op]
        if op in "+-":
            if type(a) is not type(b) or isinstance(a, complex):
                raise _err("DimensionMismatch", f"cannot {'add' if op == '+' else 'subtract'} these values", e.loc)
            if isinstance(a, Vec):
                if a.support != b.support:
                    raise _err("DimensionMismatch", "vectors live on different spaces", e.loc)
                return Vec(a.support, a.data + b.data if op == "+" else a.data - b.data)
            support = tuple(sorted(set(a.support) | set(b.support)))
            x, y = self.embed(a, support), self.embed(b, support)
            return Op(support, x.data + y.data if op == "+" else x.data - y.data)
        if op == "/":
            if not isinstance(b, complex) or b == 0:
                raise _err("DimensionMismatch", "can only divide by a nonzero number", e.loc)
            return type(a)(a.support, a.data / b)
        # multiplication
        if isinstance(a, complex):
            return type(b)(b.support, a * b.data)
        if isinstance(b, complex):
            return type(a)(a.support, a.data * b)
        if isinstance(a, Op) and isinstance(b, Op):
            support = tuple(sorted(set(a.support) | set(b.support)))
            return Op(support, self.embed(a, support).data @ self.embed(b, support).data)
        if isinstance(a, Op) and isinstance(b, Vec):
            if not set(a.support) <= set(b.support):
                raise _err("DimensionMismatch", "operator acts on spaces the vector does not cover", e.loc)
            return Vec(b.support, self.embed(a, b.support).data @ b.data)
        raise _err("DimensionMismatch", "cannot multiply these values", e.loc)

    # -- histories and families ----------------------------------------------

    def time_index(self, label: str, loc) -> int:
        if self.grid is None:
            raise _err("ModelError", "no 'times' declared", loc)
        if label not in self.grid.labels:
            raise _err("UndeclaredName", f"unknown time label {label!r}", loc)
        return self.grid.labels.index(label)

    def event_history(self, events, loc) -> SimpleHistory:
        if self.grid is None:
            raise _err("ModelError", "no 'times' declared", loc)
        d = self.spaces.total
        projs = [linalg.identity(d) for _ in self.grid.labels]
        for ev in events:
            k = self.time_index(ev.time, ev.loc)
            p = self._expect(self.value(ev.expr), Op, "a projector", ev.loc)
            projs[k] = projs[k] @ self.full_op(p)
            if not linalg.is_projector(projs[k], self.eps):
                raise _err("ModelError", f"event at {ev.time} is not a projector", ev.loc)
        return SimpleHistory(tuple(projs))

    def family(self, name: str, loc=(0, 0)) -> HistoryFamily:
        if name not in self.family_cache:
            if name not in self.family_specs:
                raise _err("UndeclaredName", f"unknown family {name!r}", loc)
            gens, floc = self.family_specs[name]
            try:
                self.family_cache[name] = build_family(self.props, gens, self.eps, self.eps_consistency, name=name)
            except HistLogicError as exc:
                self.family_cache[name] = _err("ModelError", f"family {name}: {exc}", floc)
        fam = self.family_cache[name]
        if isinstance(fam, DslError):
            raise fam
        return fam

    def leaf_history(self, h, loc=(0, 0)):
        if isinstance(h, ast.HRef):
            if h.name in self.histories:
                return self.histories[h.name]
            raise _err("UndeclaredName", f"unknown history {h.name!r}", h.loc)
        return self.event_history(h.events, h.loc)


# -- building an environment from a model file ---------------------------------

_STATEMENT_KIND = {
    ast.SpaceDecl: "space", ast.StateDecl: "state", ast.ProjectorDecl: "projector",
    ast.HistoryDecl: "history", ast.FamilyDecl: "family",
}


def check_names(spec: ast.ModelSpec) -> None:
    """Static pass: names declared once and before use, a single time grid."""
    declared: dict[str, str] = {}
    times: set[str] | None = None
    for s in spec.statements:
        if isinstance(s, ast.TimesDecl):
            if times is not None:
                raise _err("DuplicateName", "only one 'times' declaration is allowed", s.loc)
            if len(set(s.labels)) != len(s.labels):
                raise _err("DuplicateName", "time labels must be unique", s.loc)
            times = set(s.labels)
            continue
        for ref, kinds, loc in _references(s):
            if ref in ("i", "pi", "I") or _SQRT_NAME.match(ref):
                continue
            if ref not in declared:
                raise _err("UndeclaredName", f"undeclared name {ref!r}", loc)
            if kinds and declared[ref] not in kinds:
                raise _err("DimensionMismatch", f"{ref!r} is a {declared[ref]}, expected {' or '.join(kinds)}", loc)
        for label, loc in _time_refs(s):
            if times is None or label not in times:
                raise _err("UndeclaredName", f"unknown time label {label!r}", loc)
        kind = _STATEMENT_KIND.get(type(s))
        if kind is not None:
            if s.name in declared:
                raise _err("DuplicateName", f"{s.name!r} is already declared", s.loc)
            declared[s.name] = kind


def _expr_names(e):
    if isinstance(e, ast.Name):
        yield e.name, ("state", "projector"), e.loc
    elif isinstance(e, (ast.BinOp,)):
        yield from _expr_names(e.left)
        yield from _expr_names(e.right)
    elif isinstance(e, (ast.Neg, ast.NotOp, ast.KetProj)):
        yield from _expr_names(e.operand)
    elif isinstance(e, ast.Call):
        for a in e.args:
            yield from _expr_names(a)
    elif isinstance(e, ast.Span):
        for v in e.vectors:
            yield from _expr_names(v)
    elif isinstance(e, ast.MatrixLit):
        for row in e.rows:
            for x in row:
                yield from _expr_names(x)
        for n in e.on:
            yield n, ("space",), e.loc
    elif isinstance(e, ast.Diag):
        for n in e.on:
            yield n, ("space",), e.loc


def _hexpr_parts(h):
    if isinstance(h, ast.HRef):
        yield h
    elif isinstance(h, ast.HEvents):
        yield from h.events
    elif isinstance(h, ast.HNot):
        yield from _hexpr_parts(h.operand)
    else:
        yield from _hexpr_parts(h.left)
        yield from _hexpr_parts(h.right)


def _references(s):
    if isinstance(s, (ast.StateDecl, ast.ProjectorDecl, ast.HamiltonianDecl)):
        yield from _expr_names(s.expr)
    elif isinstance(s, ast.StepDecl):
        if isinstance(s.body, ast.MapStep):
            for a, b in s.body.pairs:
                yield from _expr_names(a)
                yield from _expr_names(b)
        elif not isinstance(s.body, ast.IdentityStep):
            yield from _expr_names(s.body)
    elif isinstance(s, ast.HistoryDecl):
        if s.matrix is not None:
            yield from _expr_names(s.matrix)
        for ev in s.events:
            yield from _expr_names(ev.expr)
    elif isinstance(s, ast.FamilyDecl):
        for e in s.entries:
            if isinstance(e, ast.HRef):
                yield e.name, ("history",), e.loc
            else:
                yield from _expr_names(e.expr)
    elif isinstance(s, ast.ProbQuery):
        for part in (*_hexpr_parts(s.target), *_hexpr_parts(s.given)):
            if isinstance(part, ast.HRef):
                yield part.name, ("history",), part.loc
            else:
                yield from _expr_names(part.expr)
        if s.family:
            yield s.family, ("family",), s.loc
    elif isinstance(s, ast.ConsistentQuery):
        yield s.family, ("family",), s.loc
    elif isinstance(s, ast.CompatibleQuery):
        for f in s.families:
            yield f, ("family",), s.loc
    elif isinstance(s, ast.InferQuery):
        for fam, h in (*s.assumptions, *s.conclusions):
            yield fam, ("family",), s.loc
            for part in _hexpr_parts(h):
                if isinstance(part, ast.HRef):
                    yield part.name, ("history",), part.loc
                else:
                    yield from _expr_names(part.expr)


def _time_refs(s):
    if isinstance(s, ast.StepDecl):
        yield s.t_from, s.loc
        yield s.t_to, s.loc
    events = []
    if isinstance(s, ast.HistoryDecl):
        events = list(s.events)
    elif isinstance(s, ast.FamilyDecl):
        events = [e for e in s.entries if isinstance(e, ast.Event)]
    elif isinstance(s, ast.ProbQuery):
        events = [p for p in (*_hexpr_parts(s.target), *_hexpr_parts(s.given)) if isinstance(p, ast.Event)]
    elif isinstance(s, ast.InferQuery):
        events = [p for _, h in (*s.assumptions, *s.conclusions) for p in _hexpr_parts(h)
                  if isinstance(p, ast.Event)]
    for ev in events:
        yield ev.time, ev.loc


def _time_values(decl: ast.TimesDecl) -> tuple[float, ...]:
    """Explicit ``label=value`` wins; else a trailing number in the label; else the position."""
    out = []
    numeric = all(v is not None or _LABEL_NUMBER.match(l) for l, v in zip(decl.labels, decl.values))
    for k, (label, value) in enumerate(zip(decl.labels, decl.values)):
        if value is not None:
            out.append(value)
        elif numeric:
            out.append(float(_LABEL_NUMBER.match(label).group(1)))
        else:
            out.append(float(k))
    return tuple(out)


def build_environment(spec: ast.ModelSpec, eps: float | None = None,
                      eps_consistency: float | None = None) -> Environment:
    """Evaluate every declaration; families are built lazily on first use."""
    env = Environment(eps=linalg._eps(eps),
                      eps_consistency=DEFAULT_EPS_CONSISTENCY if eps_consistency is None else eps_consistency)
    steps: dict[tuple[int, int], np.ndarray] = {}
    hamiltonian = None
    for s in spec.declarations:
        if isinstance(s, ast.HamiltonianDecl):
            if hamiltonian is not None:
                raise _err("DuplicateName", "only one hamiltonian is allowed", s.loc)
            hamiltonian = s
        try:
            _declare(env, s, steps)
        except HistLogicError as exc:
            raise _err("ModelError", str(exc), s.loc) from exc
    if env.grid is not None and env.spaces.dims:
        env.props = _dynamics(env, hamiltonian, steps)
    elif hamiltonian is not None or steps:
        raise _err("ModelError", "dynamics need both a space and 'times'", (hamiltonian or spec.statements[0]).loc)
    if env.family_specs and env.props is None:
        first = next(iter(env.family_specs.values()))[1]
        raise _err("ModelError", "families need a space and 'times'", first)
    return env


def _dynamics(env: Environment, hamiltonian, steps) -> PropagatorSet:
    d = env.spaces.total
    loc = hamiltonian.loc if hamiltonian is not None else (0, 0)
    try:
        if hamiltonian is not None:
            if steps:
                raise _err("ModelError", "use either a hamiltonian or explicit steps, not both", loc)
            h = env.full_op(env._expect(env.value(hamiltonian.expr), Op, "an operator", loc))
            return propagators_from_hamiltonian(h, env.grid, env.eps)
        n = len(env.grid)
        mats = [steps.get((k, k + 1), linalg.identity(d)) for k in range(n - 1)]
        return propagators_explicit(env.grid, mats, env.eps, dim=d)
    except HistLogicError as exc:
        raise _err("ModelError", str(exc), loc) from exc


def _declare(env: Environment, s, steps) -> None:
    if isinstance(s, ast.SpaceDecl):
        if env.histories or env.family_specs or env.values:
            raise _err("ModelError", "declare all spaces before states, projectors and histories", s.loc)
        if len(s.labels) not in (0, s.dim):
            raise _err("DimensionMismatch", f"space {s.name} has dim {s.dim} but {len(s.labels)} basis labels", s.loc)
        if len(set(s.labels)) != len(s.labels):
            raise _err("DuplicateName", f"repeated basis label in space {s.name}", s.loc)
        env.spaces.names.append(s.name)
        env.spaces.dims.append(s.dim)
        env.spaces.labels.append(tuple(s.labels))
        env.kinds[s.name] = "space"
        linalg.check_size(env.spaces.total)
    elif isinstance(s, ast.StateDecl):
        env.values[s.name] = env._expect(env.value(s.expr), Vec, "a vector", s.loc)
        env.kinds[s.name] = "state"
    elif isinstance(s, ast.ProjectorDecl):
        p = env._expect(env.value(s.expr), Op, "an operator", s.loc)
        if not linalg.is_projector(p.data, env.eps):
            raise _err("ModelError", f"{s.name} is not a projector", s.loc)
        env.values[s.name] = p
        env.kinds[s.name] = "projector"
    elif isinstance(s, ast.TimesDecl):
        try:
            env.grid = TimeGrid(_time_values(s), s.labels)
        except HistLogicError as exc:
            raise _err("ModelError", str(exc), s.loc) from exc
    elif isinstance(s, ast.HamiltonianDecl):
        pass
    elif isinstance(s, ast.StepDecl):
        a, b = env.time_index(s.t_from, s.loc), env.time_index(s.t_to, s.loc)
        if b != a + 1:
            raise _err("ModelError", f"step {s.t_from} -> {s.t_to} does not join adjacent times", s.loc)
        if (a, b) in steps:
            raise _err("DuplicateName", f"step {s.t_from} -> {s.t_to} given twice", s.loc)
        u = _step_matrix(env, s)
        if not linalg.is_unitary(u, env.eps):
            raise _err("ModelError", f"step {s.t_from} -> {s.t_to} is not unitary", s.loc)
        steps[(a, b)] = u
    elif isinstance(s, ast.HistoryDecl):
        if s.matrix is not None:
            env.histories[s.name] = _generalized(env, s)
        else:
            env.histories[s.name] = env.event_history(s.events, s.loc)
        env.kinds[s.name] = "history"
    elif isinstance(s, ast.FamilyDecl):
        gens: dict[str, object] = {}
        for e in s.entries:
            if isinstance(e, ast.HRef):
                if e.name not in env.histories:
                    raise _err("UndeclaredName", f"unknown history {e.name!r}", e.loc)
                key, h = e.name, env.histories[e.name]
            else:
                key, h = generator_name(e), env.event_history([e], e.loc)
            if key in gens:
                raise _err("DuplicateName", f"{key!r} listed twice in family {s.name}", e.loc)
            gens[key] = h
        env.family_specs[s.name] = (gens, s.loc)
        env.kinds[s.name] = "family"


def _generalized(env: Environment, s: ast.HistoryDecl) -> GeneralizedHistory:
    if env.grid is None or not env.spaces.dims:
        raise _err("ModelError", "declare spaces and 'times' before a history matrix", s.loc)
    if s.matrix.on:
        raise _err("DimensionMismatch", "a history matrix acts on the whole history space", s.loc)
    d, n = env.spaces.total, len(env.grid)
    linalg.check_size(d ** n)
    data = np.array([[env._scalar(x) for x in row] for row in s.matrix.rows], dtype=np.complex128)
    if data.shape[0] != d ** n:
        raise _err("DimensionMismatch", f"history matrix has side {data.shape[0]}, expected {d}**{n} = {d ** n}",
                   s.loc)
    if not linalg.is_projector(data, env.eps):
        raise _err("ModelError", f"history {s.name} is not a projector", s.loc)
    return GeneralizedHistory(data, d, n)


def generator_name(ev: ast.Event) -> str:
    text = ast.format_expr(ev.expr)
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    return f"{text}@{ev.time}"


def _step_matrix(env: Environment, s: ast.StepDecl) -> np.ndarray:
    d = env.spaces.total
    if isinstance(s.body, ast.IdentityStep):
        return linalg.identity(d)
    if isinstance(s.body, ast.MapStep):
        pairs = []
        supports = set()
        for a, b in s.body.pairs:
            va = env._expect(env.value(a), Vec, "a vector", s.loc)
            vb = env._expect(env.value(b), Vec, "a vector", s.loc)
            if va.support != vb.support:
                raise _err("DimensionMismatch", "both sides of a map entry must live on the same spaces", s.loc)
            supports.add(va.support)
            pairs.append((va.data, vb.data))
        if len(supports) != 1:
            raise _err("DimensionMismatch", "all map entries must live on the same spaces", s.loc)
        support = supports.pop()
        u = linalg.complete_unitary(pairs, env.spaces.size(support), env.eps)
        return env.full_op(Op(support, u))
    return env.full_op(env._expect(env.value(s.body), Op, "an operator", s.loc))


# -- queries -------------------------------------------------------------------

@dataclass(frozen=True)
class QueryResult:
    index: int
    text: str
    kind: str
    failed: bool
    fields: tuple[tuple[str, object], ...]


@dataclass(frozen=True)
class Report:
    results: tuple[QueryResult, ...]
    eps: float
    eps_consistency: float

    @property
    def exit_code(self) -> int:
        return 1 if any(r.failed for r in self.results) else 0


def _hmask(env: Environment, h, fam: HistoryFamily) -> int:
    if isinstance(h, ast.HNot):
        return fam.full_mask & ~_hmask(env, h.operand, fam)
    if isinstance(h, ast.HAnd):
        return _hmask(env, h.left, fam) & _hmask(env, h.right, fam)
    if isinstance(h, ast.HOr):
        return _hmask(env, h.left, fam) | _hmask(env, h.right, fam)
    return fam.mask_of(env.leaf_history(h))


def _leaves(h):
    if isinstance(h, (ast.HRef, ast.HEvents)):
        yield h
    elif isinstance(h, ast.HNot):
        yield from _leaves(h.operand)
    else:
        yield from _leaves(h.left)
        yield from _leaves(h.right)


def _implicit_family(env: Environment, q: ast.ProbQuery) -> HistoryFamily:
    """Family generated by the histories a query mentions."""
    gens: dict[str, object] = {}
    seen: list[str] = []
    for leaf in (*_leaves(q.target), *_leaves(q.given)):
        key = ast.format_hexpr(leaf)
        if key not in seen:
            seen.append(key)
            gens[f"h{len(seen)}"] = env.leaf_history(leaf)
    fam = build_family(env.props, gens, env.eps, env.eps_consistency, name="implicit")
    if not fam.consistent:
        raise _err("ModelError", "the histories in this query form an inconsistent family; "
                   "name a family with 'in'", q.loc)
    return fam


def _prob(env: Environment, q: ast.ProbQuery):
    if env.props is None:
        raise _err("ModelError", "no dynamics: declare a space and 'times'", q.loc)
    fam = env.family(q.family, q.loc) if q.family else _implicit_family(env, q)
    if not fam.consistent:
        raise _err("ModelError", f"family {fam.name} is inconsistent", q.loc)
    value = conditional_probability(_hmask(env, q.target, fam), _hmask(env, q.given, fam), fam)
    return False, (("value", value),)


def _consistent(env: Environment, q: ast.ConsistentQuery):
    fam = env.family(q.family, q.loc)
    r = fam.report
    fields = (
        ("verdict", str(r.verdict)),
        ("max_offdiag", r.max_offdiag),
        ("atoms", len(fam.atoms)),
        ("weights", r.weights),
        ("gram", r.gram),
    )
    return not fam.consistent, fields


def _infer(env: Environment, q: ast.InferQuery):
    def pairs(items):
        out = []
        for name, h in items:
            fam = env.family(name, q.loc)
            out.append((fam, _hmask(env, h, fam)))
        return out

    verdict = infer_histories(pairs(q.assumptions), pairs(q.conclusions), env.eps)
    fields = [("verdict", str(verdict.reason))]
    if verdict.witness:
        fields.append(("witness", list(verdict.witness)))
    if verdict.detail:
        fields.append(("detail", verdict.detail))
    if verdict.probabilities:
        fields.append(("probabilities", verdict.probabilities))
    return not verdict.valid, tuple(fields)


def _compatible(env: Environment, q: ast.CompatibleQuery):
    fams = [env.family(n, q.loc) for n in q.families]
    res = families_compatible(fams, env.eps, env.eps_consistency)
    fields = [("verdict", "Compatible" if res.compatible else "Incompatible")]
    if res.pair:
        fields.append(("witness", list(res.pair)))
    if res.reason:
        fields.append(("detail", res.reason))
    return not res.compatible, tuple(fields)


_RUNNERS = {
    ast.ProbQuery: ("prob", _prob),
    ast.ConsistentQuery: ("consistent", _consistent),
    ast.InferQuery: ("infer", _infer),
    ast.CompatibleQuery: ("compatible", _compatible),
}


def run_query(env: Environment, q, index: int) -> QueryResult:
    kind, runner = _RUNNERS[type(q)]
    text = ast.format_statement(q)
    try:
        failed, fields = runner(env, q)
    except DslError as exc:
        return QueryResult(index, text, kind, True, (("error", f"{exc.kind}: {exc.message}"),))
    except (HistLogicError, ValueError, ZeroDivisionError) as exc:
        return QueryResult(index, text, kind, True, (("error", f"{type(exc).__name__}: {exc}"),))
    return QueryResult(index, text, kind, failed, fields)


def evaluate(spec: ast.ModelSpec, eps: float | None = None, eps_consistency: float | None = None,
             env: Environment | None = None) -> Report:
    """Run every query of ``spec`` in file order."""
    if env is None:
        env = build_environment(spec, eps, eps_consistency)
    results = tuple(run_query(env, q, k) for k, q in enumerate(spec.queries, start=1))
    return Report(results, env.eps, env.eps_consistency)


def parse_model(text: str) -> ast.ModelSpec:
    """Parse and statically check a model file.

    Raises :class:`DslError` (``SyntaxError``, ``UndeclaredName``,
    ``DuplicateName``, ``DimensionMismatch`` or ``ModelError``) with the
    source location of the offending statement.
    """
    spec = parse_program(text)
    check_names(spec)
    build_environment(spec)
    return spec


def environment_from_model(model) -> Environment:
    """Expose a built-in :class:`~histlogic.models.NamedModel` to queries."""
    env = Environment(eps=min(f.tol for f in model.families.values()),
                      eps_consistency=next(iter(model.families.values())).eps_consistency)
    env.spaces = Spaces(list(model.factor_names), list(model.dims), [() for _ in model.dims])
    full = env.spaces.full
    for name, p in model.symbols.items():
        env.values[name] = Op(full, p)
        env.kinds[name] = "projector"
    env.grid = model.grid
    env.props = model.propagators
    for name, fam in model.families.items():
        env.family_cache[name] = fam
        env.kinds[name] = "family"
    return env
