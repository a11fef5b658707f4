"""Histories, chain operators, the consistency functional, weights and multi-time inference.

Conventions
-----------
``PropagatorSet.steps[k]`` is the *forward* evolution ``T(t_{k+1}, t_k)``.
The chain operator of a simple history uses the backward propagators

    K(P_1 ⊗ ... ⊗ P_n) = P_1 T(t_1, t_2) P_2 ... T(t_{n-1}, t_n) P_n

with ``T(t_k, t_{k+1}) = steps[k]†``, so ``K(identity) = T(t_1, t_n)``.

Families whose generators are all simple histories keep every operator on the
history space in factored form: a sum of mutually orthogonal tensor products
of single-time projectors.  Zero tests, containment and commutation are then
decided factor by factor on ``dim × dim`` matrices and the history space is
never built densely.  Generalized histories (arbitrary projectors on the
history space) switch the family to dense storage.
"""

from __future__ import annotations

import string
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Union

import numpy as np

from . import linalg
from .errors import (
    CountMismatch,
    DimensionMismatch,
    GridError,
    HistLogicError,
    InconsistentFamily,
    NonCommutingGenerators,
    NotAProjector,
    NotationalConflict,
    NotInAlgebra,
    NonUnitaryStep,
    TooLarge,
    ZeroWeightCondition,
)
from .framework import (
    MAX_GENERATORS,
    Formula,
    as_formula,
    mask_for_formula,
    mask_indices,
    split_atoms,
    transport_mask,
)
from .logic import InferenceVerdict, Reason

DEFAULT_EPS_CONSISTENCY = 1e-8


# -- time grids and propagators -----------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    times: tuple[float, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise GridError("a time grid needs at least one time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise GridError("grid times must be strictly increasing")
        labels = tuple(self.labels) or tuple(f"t{k + 1}" for k in range(len(times)))
        if len(labels) != len(times) or len(set(labels)) != len(labels):
            raise GridError("grid labels must be unique, one per time")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.times)

    def index(self, key: str | float) -> int:
        if isinstance(key, str):
            try:
                return self.labels.index(key)
            except ValueError:
                raise GridError(f"unknown time label {key!r}") from None
        for k, t in enumerate(self.times):
            if abs(t - key) <= 1e-12 * max(1.0, abs(t)):
                return k
        raise GridError(f"time {key} is not on the grid")

    def contains(self, other: "TimeGrid") -> bool:
        try:
            [self.index(t) for t in other.times]
        except GridError:
            return False
        return True


@dataclass(frozen=True, eq=False)
class PropagatorSet:
    """Forward step unitaries ``steps[k] = T(t_{k+1}, t_k)`` on a time grid."""

    grid: TimeGrid
    steps: tuple[np.ndarray, ...]
    dim: int = 0

    def __post_init__(self):
        steps = tuple(np.asarray(u, dtype=np.complex128) for u in self.steps)
        object.__setattr__(self, "steps", steps)
        if steps:
            object.__setattr__(self, "dim", steps[0].shape[0])
        elif self.dim < 1:
            raise ValueError("dimension is required for a single-time grid")
        if len(steps) != len(self.grid) - 1:
            raise CountMismatch(f"{len(self.grid)} times need {len(self.grid) - 1} steps, got {len(steps)}")

    @property
    def n(self) -> int:
        return len(self.grid)

    def forward(self, i: int, j: int) -> np.ndarray:
        """Evolution from grid time ``i`` to grid time ``j >= i``."""
        u = linalg.identity(self.dim)
        for k in range(i, j):
            u = self.steps[k] @ u
        return u

    def T(self, a: int, b: int) -> np.ndarray:
        """``T(t_a, t_b)``: evolution from ``t_b`` to ``t_a`` (either order)."""
        return self.forward(b, a) if a >= b else linalg.adjoint(self.forward(a, b))

    @property
    def backward_steps(self) -> tuple[np.ndarray, ...]:
        """``T(t_k, t_{k+1})`` for consecutive grid times."""
        return tuple(linalg.adjoint(u) for u in self.steps)

    def reversed(self) -> "PropagatorSet":
        """Time-reversed dynamics: grid mirrored, each step replaced by its adjoint."""
        grid = TimeGrid(tuple(-t for t in reversed(self.grid.times)), tuple(reversed(self.grid.labels)))
        return PropagatorSet(grid, tuple(linalg.adjoint(u) for u in reversed(self.steps)), self.dim)

    def same_dynamics(self, other: "PropagatorSet", tol: float) -> bool:
        if self is other:
            return True
        if self.grid != other.grid or self.dim != other.dim:
            return False
        return all(linalg.max_norm(a - b) <= tol for a, b in zip(self.steps, other.steps))


def propagators_from_hamiltonian(h: np.ndarray, grid: TimeGrid, tol: float | None = None) -> PropagatorSet:
    h = linalg.as_matrix(h)
    steps = tuple(linalg.mat_exp_propagator(h, b - a, tol) for a, b in zip(grid.times, grid.times[1:]))
    return PropagatorSet(grid, steps, h.shape[0])


def propagators_explicit(grid: TimeGrid, steps: Sequence[np.ndarray], tol: float | None = None,
                         dim: int | None = None, backward: bool = False) -> PropagatorSet:
    """Wrap step unitaries, one per adjacent pair of grid times.

    Steps are forward evolutions ``T(t_{k+1}, t_k)``; with ``backward=True``
    they are read as ``T(t_k, t_{k+1})`` instead, so that ``T(t_1, t_3) = U V``.
    """
    steps = tuple(linalg.as_matrix(u) for u in steps)
    if len(steps) != len(grid) - 1:
        raise CountMismatch(f"{len(grid)} times need {len(grid) - 1} steps, got {len(steps)}")
    if steps:
        dim = steps[0].shape[0]
    if dim is None:
        raise ValueError("dimension is required for a single-time grid")
    for k, u in enumerate(steps):
        if u.shape != (dim, dim):
            raise DimensionMismatch(f"step {k} has shape {u.shape}")
        if not linalg.is_unitary(u, tol):
            raise NonUnitaryStep(f"step {k} ({grid.labels[k]} -> {grid.labels[k + 1]}) is not unitary")
    if backward:
        steps = tuple(linalg.adjoint(u) for u in steps)
    return PropagatorSet(grid, steps, dim)


# -- histories ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimpleHistory:
    """One projector per grid time; identity where nothing is asserted."""

    projectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "projectors", tuple(linalg.as_matrix(p) for p in self.projectors))

    @property
    def n(self) -> int:
        return len(self.projectors)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def reversed(self) -> "SimpleHistory":
        return SimpleHistory(tuple(reversed(self.projectors)))


@dataclass(frozen=True, eq=False)
class GeneralizedHistory:
    """An arbitrary projector on the n-fold tensor product of the system space."""

    projector: np.ndarray
    dim: int
    n: int

    def __post_init__(self):
        p = linalg.as_matrix(self.projector)
        if p.shape[0] != self.dim ** self.n:
            raise DimensionMismatch(f"history projector side {p.shape[0]} != {self.dim}**{self.n}")
        object.__setattr__(self, "projector", p)


History = Union[SimpleHistory, GeneralizedHistory]


def simple_history(grid: TimeGrid, events: Mapping[str | float, np.ndarray], dim: int | None = None) -> SimpleHistory:
    """Build a simple history from ``{time: projector}``, padding other times with the identity."""
    if dim is None:
        dim = linalg.as_matrix(next(iter(events.values()))).shape[0]
    projs = [linalg.identity(dim)] * len(grid)
    for key, p in events.items():
        projs[grid.index(key)] = p
    return SimpleHistory(tuple(projs))


def lift_history(h: History, from_grid: TimeGrid, to_grid: TimeGrid) -> SimpleHistory:
    if isinstance(h, GeneralizedHistory):
        if from_grid == to_grid:
            return h
        raise GridError("lifting a generalized history to another grid is not supported")
    if h.n != len(from_grid):
        raise CountMismatch("history length does not match its grid")
    if not to_grid.contains(from_grid):
        raise GridError("target grid does not contain every time of the source grid")
    projs = [linalg.identity(h.dim)] * len(to_grid)
    for t, p in zip(from_grid.times, h.projectors):
        projs[to_grid.index(t)] = p
    return SimpleHistory(tuple(projs))


def history_projector(h: History, limit: int | None = None) -> np.ndarray:
    if isinstance(h, GeneralizedHistory):
        return h.projector
    return linalg.tensor(*h.projectors, limit=limit)


def _chain_factors(projs: Sequence[np.ndarray], back: Sequence[np.ndarray]) -> np.ndarray:
    k = projs[0]
    for t, p in zip(back, projs[1:]):
        k = k @ t @ p
    return k


def chain_operator_simple(h: SimpleHistory, props: PropagatorSet) -> np.ndarray:
    if h.n != props.n:
        raise CountMismatch(f"history has {h.n} times, grid has {props.n}")
    if h.dim != props.dim:
        raise DimensionMismatch("history and propagators act on different spaces")
    return _chain_factors(h.projectors, props.backward_steps)


def chain_operator_general(a: np.ndarray, props: PropagatorSet) -> np.ndarray:
    """Chain operator of an arbitrary operator on the history space.

    ``<i|K|j> = sum A[(i,k2..kn),(l1..l_{n-1},j)] <l1|T(t1,t2)|k2> ... <l_{n-1}|T(t_{n-1},t_n)|kn>``.
    """
    d, n = props.dim, props.n
    a = np.asarray(a, dtype=np.complex128)
    if a.shape != (d ** n, d ** n):
        raise DimensionMismatch(f"operator of shape {a.shape} does not act on {d}**{n}")
    if n == 1:
        return a.copy()
    if 2 * n > len(string.ascii_letters):
        raise TooLarge("too many times for the contraction")
    rows = string.ascii_letters[:n]
    cols = string.ascii_letters[n:2 * n]
    terms = [rows + cols] + [cols[m] + rows[m + 1] for m in range(n - 1)]
    spec = ",".join(terms) + "->" + rows[0] + cols[-1]
    return np.einsum(spec, a.reshape((d,) * (2 * n)), *props.backward_steps, optimize=True)


def chain_operator(h: History | np.ndarray, props: PropagatorSet) -> np.ndarray:
    if isinstance(h, SimpleHistory):
        return chain_operator_simple(h, props)
    if isinstance(h, GeneralizedHistory):
        return chain_operator_general(h.projector, props)
    return chain_operator_general(h, props)


def consistency_functional(a: History | np.ndarray, b: History | np.ndarray, props: PropagatorSet) -> complex:
    """``Tr[K(A)† K(B)]``."""
    return complex(np.vdot(chain_operator(a, props), chain_operator(b, props)))


# -- operator algebras on the history space -----------------------------------

class _NeedsDense(Exception):
    pass


class _ProductOps:
    """Operators as tuples of orthogonal terms, each term a tuple of per-time projectors."""

    dense = False

    def __init__(self, props: PropagatorSet, eps: float):
        self.props, self.eps = props, eps
        self.n, self.d = props.n, props.dim
        self.eye = linalg.identity(self.d)
        self.back = props.backward_steps

    def identity(self):
        return ((self.eye,) * self.n,)

    def from_history(self, h: History):
        if isinstance(h, GeneralizedHistory):
            raise _NeedsDense
        return (tuple(h.projectors),)

    def _is_zero(self, m):
        return linalg.max_norm(m) <= self.eps

    def _term_product(self, x, y):
        factors = []
        for p, q in zip(x, y):
            r = p @ q
            if self._is_zero(r):
                return None
            factors.append(r)
        for f in factors:
            if not linalg.is_projector(f, self.eps):
                # commuting simple tensors with a nonzero product commute factorwise
                raise _NeedsDense
        return tuple(factors)

    def mul(self, a, b):
        out = []
        for x in a:
            for y in b:
                t = self._term_product(x, y)
                if t is not None:
                    out.append(t)
        return tuple(out)

    def _complement_term(self, t):
        # I - g1⊗...⊗gn = sum_k g1⊗..⊗g_{k-1}⊗(I-g_k)⊗I⊗..⊗I, an orthogonal sum
        out = []
        for k, g in enumerate(t):
            c = self.eye - g
            if not self._is_zero(c):
                out.append(t[:k] + (c,) + (self.eye,) * (self.n - k - 1))
        return tuple(out)

    def complement(self, a):
        out = self.identity()
        for t in a:
            out = self.mul(out, self._complement_term(t))
        return out

    def is_zero(self, a):
        return not a

    def commute(self, a, b):
        for x in a:
            for y in b:
                products = [(p @ q, q @ p) for p, q in zip(x, y)]
                if any(self._is_zero(pq) for pq, _ in products):
                    continue
                if any(linalg.max_norm(pq - qp) > self.eps for pq, qp in products):
                    return False
        return True

    def contains(self, x, atom):
        """``True`` if ``x`` covers the atom, ``False`` if disjoint from it, else ``None``."""
        if len(x) != 1:
            raise _NeedsDense
        (xt,) = x
        states = set()
        for m in atom:
            prods = [p @ q for p, q in zip(xt, m)]
            if all(linalg.max_norm(r - q) <= self.eps for r, q in zip(prods, m)):
                states.add(True)
            elif any(self._is_zero(r) for r in prods):
                states.add(False)
            else:
                return None
        return states.pop() if len(states) == 1 else None

    def same(self, a, b):
        if len(a) == len(b) == 1:
            return all(linalg.max_norm(p - q) <= self.eps for p, q in zip(a[0], b[0]))
        return linalg.max_norm(self.realize(a) - self.realize(b)) <= self.eps

    def chain(self, a):
        k = np.zeros((self.d, self.d), dtype=np.complex128)
        for t in a:
            k += _chain_factors(t, self.back)
        return k

    def realize(self, a, limit: int | None = None):
        side = self.d ** self.n
        linalg.check_size(side, limit)
        out = np.zeros((side, side), dtype=np.complex128)
        for t in a:
            out += linalg.tensor(*t, limit=limit)
        return out


class _DenseOps:
    dense = True

    def __init__(self, props: PropagatorSet, eps: float, limit: int | None = None):
        self.props, self.eps = props, eps
        self.n, self.d = props.n, props.dim
        self.side = self.d ** self.n
        linalg.check_size(self.side, limit)

    def identity(self):
        return linalg.identity(self.side)

    def from_history(self, h: History):
        return history_projector(h)

    def mul(self, a, b):
        return a @ b

    def complement(self, a):
        return np.eye(self.side, dtype=np.complex128) - a

    def is_zero(self, a):
        return linalg.max_norm(a) <= self.eps

    def commute(self, a, b):
        return linalg.commutes(a, b, self.eps)

    def contains(self, x, atom):
        xm = x @ atom
        if linalg.max_norm(xm - atom) <= self.eps:
            return True
        if linalg.max_norm(xm) <= self.eps:
            return False
        return None

    def same(self, a, b):
        return linalg.max_norm(a - b) <= self.eps

    def chain(self, a):
        return chain_operator_general(a, self.props)

    def realize(self, a, limit: int | None = None):
        return a


# -- families ----------------------------------------------------------------

class Verdict(str, Enum):
    CONSISTENT = "Consistent"
    INCONSISTENT = "Inconsistent"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class ConsistencyReport:
    gram: np.ndarray = field(repr=False)
    max_offdiag: float
    weights: tuple[float, ...]
    verdict: Verdict
    threshold: float

    @property
    def relative_offdiag(self) -> float:
        top = max(self.weights) if self.weights else 0.0
        return self.max_offdiag / top if top > 0 else 0.0


def consistency_report(chains: Sequence[np.ndarray], eps_consistency: float) -> ConsistencyReport:
    flat = np.array([k.ravel() for k in chains])
    gram = np.conjugate(flat) @ flat.T
    weights = tuple(float(w) for w in np.real(np.diag(gram)))
    off = gram - np.diag(np.diag(gram))
    max_off = float(np.max(np.abs(off))) if off.size else 0.0
    threshold = eps_consistency * max(max(weights, default=0.0), 1e-300)
    verdict = Verdict.CONSISTENT if max_off <= threshold else Verdict.INCONSISTENT
    return ConsistencyReport(gram, max_off, weights, verdict, threshold)


@dataclass(frozen=True, eq=False)
class HistoryFamily:
    """A Boolean algebra of commuting history projectors plus its consistency data."""

    props: PropagatorSet
    generators: Mapping[str, History]
    atoms: tuple
    signs: tuple[tuple[bool, ...], ...]
    chains: tuple[np.ndarray, ...]
    report: ConsistencyReport
    ops: object = field(repr=False)
    tol: float = linalg.DEFAULT_EPS
    eps_consistency: float = DEFAULT_EPS_CONSISTENCY
    name: str = ""

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.generators)

    @property
    def consistent(self) -> bool:
        return self.report.verdict is Verdict.CONSISTENT

    @property
    def full_mask(self) -> int:
        return (1 << len(self.atoms)) - 1

    @property
    def grid(self) -> TimeGrid:
        return self.props.grid

    def mask_of(self, x) -> int:
        """Atom bitmask of a formula over generator names, a history, or a mask."""
        if isinstance(x, (int, np.integer)):
            return int(x)
        if isinstance(x, HistoryElement):
            if x.family is not self:
                raise NotInAlgebra("element belongs to another family")
            return x.mask
        if isinstance(x, (SimpleHistory, GeneralizedHistory)):
            return self._decompose(x)
        return mask_for_formula(as_formula(x), self.names, self.signs)

    def _decompose(self, h: History) -> int:
        if h.n != self.props.n or h.dim != self.props.dim:
            raise CountMismatch("history does not live on this family's grid and space")
        try:
            x = self.ops.from_history(h)
            flags = [self.ops.contains(x, a) for a in self.atoms]
        except _NeedsDense:
            dense = _DenseOps(self.props, self.tol)
            x = dense.from_history(h)
            flags = [dense.contains(x, self.ops.realize(a)) for a in self.atoms]
        if any(f is None for f in flags):
            raise NotInAlgebra("history is not an element of the family's Boolean algebra")
        return sum(1 << i for i, f in enumerate(flags) if f)

    def element(self, x) -> "HistoryElement":
        return HistoryElement(self, self.mask_of(x))

    def chain_of(self, x) -> np.ndarray:
        k = np.zeros((self.props.dim, self.props.dim), dtype=np.complex128)
        for a in mask_indices(self.mask_of(x)):
            k += self.chains[a]
        return k

    def raw_weight(self, x) -> float:
        """``C(P, P)`` for an element, without checking consistency."""
        k = self.chain_of(x)
        return float(np.real(np.vdot(k, k)))

    def realize(self, x, limit: int | None = None) -> np.ndarray:
        mask = self.mask_of(x)
        side = self.props.dim ** self.props.n
        out = np.zeros((side, side), dtype=np.complex128)
        for a in mask_indices(mask):
            out += self.ops.realize(self.atoms[a], limit)
        return out

    def __repr__(self):
        label = f"{self.name!r}, " if self.name else ""
        return (f"HistoryFamily({label}times={list(self.grid.labels)}, generators={list(self.generators)}, "
                f"atoms={len(self.atoms)}, {self.report.verdict})")


@dataclass(frozen=True, eq=False)
class HistoryElement:
    family: HistoryFamily
    mask: int

    @property
    def weight(self) -> float:
        return self.family.raw_weight(self.mask)

    def realize(self, limit: int | None = None) -> np.ndarray:
        return self.family.realize(self.mask, limit)


def _check_generator(name: str, h: History, props: PropagatorSet, eps: float) -> History:
    if h.n != props.n:
        raise CountMismatch(f"generator {name!r} has {h.n} times, grid has {props.n}")
    if h.dim != props.dim:
        raise DimensionMismatch(f"generator {name!r} acts on dim {h.dim}, expected {props.dim}")
    if isinstance(h, SimpleHistory):
        for k, p in enumerate(h.projectors):
            if not linalg.is_projector(p, eps):
                raise NotAProjector(f"generator {name!r} is not a projector at {props.grid.labels[k]}")
    elif not linalg.is_projector(h.projector, eps):
        raise NotAProjector(f"generator {name!r} is not a projector")
    return h


def build_family(props: PropagatorSet, generators: Mapping[str, History], tol: float | None = None,
                 eps_consistency: float = DEFAULT_EPS_CONSISTENCY, name: str = "",
                 dense: bool | None = None, max_generators: int = MAX_GENERATORS) -> HistoryFamily:
    """Build the Boolean algebra generated by commuting history projectors and check its consistency."""
    eps = linalg._eps(tol)
    if len(generators) > max_generators:
        raise TooLarge(f"{len(generators)} generators exceed the limit of {max_generators}")
    gens = {k: _check_generator(k, h, props, eps) for k, h in generators.items()}
    want_dense = dense if dense is not None else any(isinstance(h, GeneralizedHistory) for h in gens.values())
    try:
        return _build_family(props, gens, eps, eps_consistency, name,
                             _DenseOps(props, eps) if want_dense else _ProductOps(props, eps))
    except _NeedsDense:
        return _build_family(props, gens, eps, eps_consistency, name, _DenseOps(props, eps))


def _build_family(props, gens, eps, eps_consistency, name, ops) -> HistoryFamily:
    reps = {k: ops.from_history(h) for k, h in gens.items()}
    items = list(reps.items())
    for i, (na, a) in enumerate(items):
        for nb, b in items[i + 1:]:
            if not ops.commute(a, b):
                raise NonCommutingGenerators(na, nb)
    atoms = split_atoms([r for _, r in items], ops.identity(), ops.mul, ops.complement, ops.is_zero)
    chains = tuple(ops.chain(a) for a, _ in atoms)
    return HistoryFamily(
        props=props,
        generators=MappingProxyType(dict(gens)),
        atoms=tuple(a for a, _ in atoms),
        signs=tuple(s for _, s in atoms),
        chains=chains,
        report=consistency_report(chains, eps_consistency),
        ops=ops,
        tol=eps,
        eps_consistency=eps_consistency,
        name=name,
    )


def weight(x, family: HistoryFamily) -> float:
    if not family.consistent:
        raise InconsistentFamily(f"family {family.name or '<unnamed>'} is inconsistent")
    return family.raw_weight(x)


def conditional_probability(q, p, family: HistoryFamily) -> float:
    """``W(P Q) / W(P)`` inside a consistent family."""
    if not family.consistent:
        raise InconsistentFamily(f"family {family.name or '<unnamed>'} is inconsistent")
    pm, qm = family.mask_of(p), family.mask_of(q)
    wp = family.raw_weight(pm)
    if wp <= family.tol:
        raise ZeroWeightCondition("the condition has zero weight")
    return family.raw_weight(pm & qm) / wp


# -- compatibility and inference ---------------------------------------------

@dataclass(frozen=True, eq=False)
class FamilyCompatibility:
    compatible: bool
    generated: HistoryFamily | None = None
    reason: str = ""
    pair: tuple[str, str] | None = None

    def __bool__(self):
        return self.compatible


def _unique(families) -> list[HistoryFamily]:
    seen, out = set(), []
    for f in families:
        if id(f) not in seen:
            seen.add(id(f))
            out.append(f)
    return out


def _common_dynamics(families: Sequence[HistoryFamily], tol: float) -> PropagatorSet:
    base = max(families, key=lambda f: len(f.grid)).props
    for f in families:
        g = f.grid
        if f.props.dim != base.dim:
            raise GridError("families act on different Hilbert spaces")
        if not base.grid.contains(g):
            raise GridError(f"grid of family {f.name or '<unnamed>'} is not part of a common grid")
        idx = [base.grid.index(t) for t in g.times]
        for k in range(len(idx) - 1):
            if linalg.max_norm(base.forward(idx[k], idx[k + 1]) - f.props.steps[k]) > tol:
                raise GridError("families disagree about the dynamics between shared times")
    return base


def families_compatible(families: Sequence[HistoryFamily], tol: float | None = None,
                        eps_consistency: float | None = None) -> FamilyCompatibility:
    """Decide whether consistent families may be combined in one argument.

    Families are lifted to a common grid by identity padding, shared
    generator names must denote the same history, all generators must
    commute, and the generated family must itself be consistent.
    """
    families = _unique(families)
    if not families:
        raise ValueError("no families given")
    eps = linalg._eps(tol if tol is not None else families[0].tol)
    eps_c = eps_consistency if eps_consistency is not None else families[0].eps_consistency
    if len(families) == 1:
        f = families[0]
        if f.consistent:
            return FamilyCompatibility(True, f)
        return FamilyCompatibility(False, None, f"family {f.name or '<unnamed>'} is inconsistent")
    try:
        props = _common_dynamics(families, eps)
    except GridError as exc:
        return FamilyCompatibility(False, None, f"grid conflict: {exc}")

    merged: dict[str, History] = {}
    owner: dict[str, str] = {}
    per_family: list[dict[str, History]] = []
    ops = _ProductOps(props, eps)
    try:
        for f in families:
            lifted = {k: lift_history(h, f.grid, props.grid) for k, h in f.generators.items()}
            per_family.append(lifted)
            for k, h in lifted.items():
                if k in merged:
                    if not _same_history(merged[k], h, props, eps):
                        raise NotationalConflict(k)
                else:
                    merged[k] = h
                    owner[k] = f.name
    except NotationalConflict as exc:
        return FamilyCompatibility(False, None, f"notation conflict: {exc}", (exc.name, exc.name))
    except GridError as exc:
        return FamilyCompatibility(False, None, f"grid conflict: {exc}")

    dense_needed = any(isinstance(h, GeneralizedHistory) for h in merged.values())
    for i, fa in enumerate(per_family):
        for fb in per_family[i + 1:]:
            for na, a in fa.items():
                for nb, b in fb.items():
                    if na == nb:
                        continue
                    if not _histories_commute(a, b, props, eps, ops, dense_needed):
                        return FamilyCompatibility(
                            False, None, f"{na} ({families[i].name}) does not commute with "
                            f"{nb} ({families[per_family.index(fb)].name})", (na, nb))
    name = "+".join(f.name for f in families if f.name)
    try:
        generated = build_family(props, merged, eps, eps_c, name=name)
    except NonCommutingGenerators as exc:
        return FamilyCompatibility(False, None, str(exc), exc.pair)
    except (TooLarge, HistLogicError) as exc:
        return FamilyCompatibility(False, None, str(exc))
    if not generated.consistent:
        return FamilyCompatibility(False, generated,
                                   f"generated family is inconsistent (max off-diagonal {generated.report.max_offdiag:.3g})")
    return FamilyCompatibility(True, generated)


def _same_history(a: History, b: History, props: PropagatorSet, eps: float) -> bool:
    if isinstance(a, SimpleHistory) and isinstance(b, SimpleHistory):
        return all(linalg.max_norm(p - q) <= eps for p, q in zip(a.projectors, b.projectors))
    return linalg.max_norm(history_projector(a) - history_projector(b)) <= eps


def _histories_commute(a: History, b: History, props, eps, ops: _ProductOps, dense: bool) -> bool:
    if not dense and isinstance(a, SimpleHistory) and isinstance(b, SimpleHistory):
        return ops.commute(ops.from_history(a), ops.from_history(b))
    return linalg.commutes(history_projector(a), history_projector(b), eps)


def infer_histories(assumptions: Sequence[tuple[HistoryFamily, object]],
                    conclusions: Sequence[tuple[HistoryFamily, object]],
                    tol: float | None = None) -> InferenceVerdict:
    """Check a multi-time argument.

    Valid when all families are compatible, the product of the assumptions has
    positive weight, and every conclusion has conditional probability one.
    """
    pairs = [*assumptions, *conclusions]
    if not pairs:
        raise ValueError("an argument needs at least one history")
    families = _unique(f for f, _ in pairs)
    eps = linalg._eps(tol if tol is not None else families[0].tol)
    compat = families_compatible(families, eps)
    if not compat:
        return InferenceVerdict(False, Reason.INCOMPATIBLE, witness=compat.pair, detail=compat.reason)
    g = compat.generated

    def to_generated(fam, x):
        mask = fam.mask_of(x)
        if fam is g:
            return mask
        return transport_mask(mask, fam.names, fam.signs, g.names, g.signs)

    a_mask = g.full_mask
    for fam, x in assumptions:
        a_mask &= to_generated(fam, x)
    assumption = HistoryElement(g, a_mask)
    wa = g.raw_weight(a_mask)
    if wa <= eps:
        return InferenceVerdict(False, Reason.CONTRADICTORY, assumption, detail="assumptions have zero weight")
    probs = []
    failed = None
    for fam, x in conclusions:
        pr = g.raw_weight(a_mask & to_generated(fam, x)) / wa
        probs.append(pr)
        if abs(pr - 1.0) > eps and failed is None:
            failed = f"conclusion {x} has probability {pr:.12g}"
    if failed:
        return InferenceVerdict(False, Reason.NOT_ENTAILED, assumption, detail=failed, probabilities=tuple(probs))
    return InferenceVerdict(True, Reason.PROVEN, assumption, probabilities=tuple(probs))
