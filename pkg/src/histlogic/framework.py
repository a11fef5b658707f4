"""Statements, the statement-to-projector map and Boolean algebras of commuting projectors.

A :class:`Framework` is generated by a finite set of named, pairwise commuting
projectors.  Its minimal elements (atoms) are the nonzero products
``Q_1 Q_2 ... Q_k`` with each ``Q_i`` either the i-th generator or its
complement; every element of the algebra is a sum of atoms and is therefore
identified by a bitmask over atom indices.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TypeVar, Union

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    IncompatibleFrameworks,
    NonCommutingGenerators,
    NonProjectorGenerator,
    NotationalConflict,
    NotInAlgebra,
    TooLarge,
    UnknownStatementName,
)

MAX_GENERATORS = 16


# -- statement formulas ------------------------------------------------------

@dataclass(frozen=True)
class Elementary:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def __post_init__(self):
        object.__setattr__(self, "child", as_formula(self.child))

    def __str__(self):
        return f"~{_wrap(self.child)}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        object.__setattr__(self, "left", as_formula(self.left))
        object.__setattr__(self, "right", as_formula(self.right))

    def __str__(self):
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        object.__setattr__(self, "left", as_formula(self.left))
        object.__setattr__(self, "right", as_formula(self.right))

    def __str__(self):
        return f"{_wrap(self.left)} | {_wrap(self.right)}"


Formula = Union[Elementary, Not, And, Or]


def _wrap(f: Formula) -> str:
    return str(f) if isinstance(f, (Elementary, Not)) else f"({f})"


def leaf_names(f: Formula) -> set[str]:
    if isinstance(f, Elementary):
        return {f.name}
    if isinstance(f, Not):
        return leaf_names(f.child)
    return leaf_names(f.left) | leaf_names(f.right)


def as_formula(f: Formula | str) -> Formula:
    return Elementary(f) if isinstance(f, str) else f


def fold_formula(f: Formula, leaf: Callable, neg: Callable, conj: Callable, disj: Callable):
    """Evaluate a formula bottom-up with one callback per node kind."""
    if isinstance(f, Elementary):
        return leaf(f.name)
    if isinstance(f, Not):
        return neg(fold_formula(f.child, leaf, neg, conj, disj))
    left = fold_formula(f.left, leaf, neg, conj, disj)
    right = fold_formula(f.right, leaf, neg, conj, disj)
    return conj(left, right) if isinstance(f, And) else disj(left, right)


# -- atoms -------------------------------------------------------------------

T = TypeVar("T")


def split_atoms(generators: Sequence[T], identity: T, mul: Callable[[T, T], T],
                complement: Callable[[T], T], is_zero: Callable[[T], bool]) -> list[tuple[T, tuple[bool, ...]]]:
    """Nonzero sign products over ``generators`` together with their sign vectors.

    Products are formed one generator at a time, so zero branches are pruned
    early instead of enumerating all ``2**k`` candidates.
    """
    atoms: list[tuple[T, tuple[bool, ...]]] = [(identity, ())]
    for g in generators:
        comp = complement(g)
        refined = []
        for a, signs in atoms:
            for sign, factor in ((True, g), (False, comp)):
                p = mul(a, factor)
                if not is_zero(p):
                    refined.append((p, signs + (sign,)))
        atoms = refined
    return atoms


def mask_for_formula(f: Formula, names: Sequence[str], signs: Sequence[tuple[bool, ...]]) -> int:
    """Bitmask of the atoms lying under formula ``f``."""
    index = {n: i for i, n in enumerate(names)}
    full = (1 << len(signs)) - 1

    def leaf(name):
        if name not in index:
            raise UnknownStatementName(name)
        k = index[name]
        return sum(1 << a for a, s in enumerate(signs) if s[k])

    return fold_formula(f, leaf, lambda m: full & ~m, lambda a, b: a & b, lambda a, b: a | b)


def mask_indices(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def transport_mask(mask: int, names: Sequence[str], signs: Sequence[tuple[bool, ...]],
                   target_names: Sequence[str], target_signs: Sequence[tuple[bool, ...]]) -> int:
    """Re-express an element of a coarser algebra as a mask over a finer algebra's atoms.

    The finer algebra's generators must include every generator of the coarser
    one (by name).  A fine atom lies under the coarse atom whose sign vector
    agrees with it on the coarse generators.
    """
    pos = [list(target_names).index(n) for n in names]
    lookup = {s: a for a, s in enumerate(signs)}
    out = 0
    for b, fine in enumerate(target_signs):
        a = lookup.get(tuple(fine[p] for p in pos))
        if a is None:
            raise NotInAlgebra("atom of the finer algebra has no parent in the coarser one")
        if mask >> a & 1:
            out |= 1 << b
    return out


# -- frameworks --------------------------------------------------------------

@dataclass(frozen=True)
class AlgebraElement:
    mask: int
    size: int
    projector: np.ndarray = field(repr=False, compare=False)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.mask >> i) & 1 for i in range(self.size))


@dataclass(frozen=True, eq=False)
class Framework:
    dim: int
    generators: Mapping[str, np.ndarray]
    minimal_elements: tuple[np.ndarray, ...]
    signs: tuple[tuple[bool, ...], ...]
    tol: float = linalg.DEFAULT_EPS
    name: str = ""

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.generators)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.minimal_elements)) - 1

    def mask_of(self, f: Formula | str) -> int:
        return mask_for_formula(as_formula(f), self.names, self.signs)

    def realize(self, mask: int) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for a in mask_indices(mask):
            out += self.minimal_elements[a]
        return out

    def element(self, mask: int) -> AlgebraElement:
        return AlgebraElement(mask, len(self.minimal_elements), self.realize(mask))

    def __repr__(self):
        label = f"{self.name!r}, " if self.name else ""
        return f"Framework({label}dim={self.dim}, generators={list(self.generators)}, atoms={len(self.minimal_elements)})"


def build_framework(dim: int, generators: Mapping[str, np.ndarray], tol: float | None = None,
                    name: str = "", max_generators: int = MAX_GENERATORS) -> Framework:
    eps = linalg._eps(tol)
    if len(generators) > max_generators:
        raise TooLarge(f"{len(generators)} generators exceed the limit of {max_generators}")
    gens = {}
    for key, g in generators.items():
        g = linalg.as_matrix(g)
        if g.shape != (dim, dim):
            raise DimensionMismatch(f"generator {key!r} has shape {g.shape}, expected {(dim, dim)}")
        if not linalg.is_projector(g, eps):
            raise NonProjectorGenerator(f"generator {key!r} is not a projector")
        gens[key] = g
    items = list(gens.items())
    for i, (na, a) in enumerate(items):
        for nb, b in items[i + 1:]:
            if not linalg.commutes(a, b, eps):
                raise NonCommutingGenerators(na, nb)
    ident = linalg.identity(dim)
    atoms = split_atoms(list(gens.values()), ident, lambda x, y: x @ y,
                        lambda g: ident - g, lambda x: linalg.is_zero(x, eps))
    return Framework(
        dim=dim,
        generators=MappingProxyType(gens),
        minimal_elements=tuple(a for a, _ in atoms),
        signs=tuple(s for _, s in atoms),
        tol=eps,
        name=name,
    )


def phi(f: Formula | str, fw: Framework) -> np.ndarray:
    """Projector of a statement: complement for ``Not``, product for ``And``, ``P + Q - PQ`` for ``Or``."""
    ident = linalg.identity(fw.dim)

    def leaf(name):
        try:
            return fw.generators[name]
        except KeyError:
            raise UnknownStatementName(name) from None

    return fold_formula(as_formula(f), leaf, lambda p: ident - p, lambda p, q: p @ q,
                        lambda p, q: p + q - p @ q)


def decompose(p: np.ndarray, fw: Framework, tol: float | None = None) -> AlgebraElement:
    eps = fw.tol if tol is None else tol
    p = linalg.as_matrix(p)
    if p.shape != (fw.dim, fw.dim):
        raise DimensionMismatch(f"projector of shape {p.shape} does not act on dim {fw.dim}")
    mask = 0
    for a, m in enumerate(fw.minimal_elements):
        if linalg.max_norm(p @ m - m) <= eps:
            mask |= 1 << a
    rebuilt = fw.realize(mask)
    if linalg.max_norm(rebuilt - p) > eps:
        raise NotInAlgebra("operator is not a sum of minimal elements of the framework")
    return AlgebraElement(mask, len(fw.minimal_elements), rebuilt)


def _merged_generators(frameworks: Sequence[Framework], tol: float) -> dict[str, np.ndarray]:
    merged: dict[str, np.ndarray] = {}
    for fw in frameworks:
        for key, g in fw.generators.items():
            if key in merged:
                if linalg.max_norm(merged[key] - g) > tol:
                    raise NotationalConflict(key)
            else:
                merged[key] = g
    return merged


def find_noncommuting_pair(frameworks: Sequence[Framework], tol: float | None = None) -> tuple[str, str] | None:
    """First pair of generators from different frameworks that fail to commute.

    Two algebras commute elementwise exactly when their generators do, so
    checking generators is equivalent to checking every pair of elements.
    """
    eps = linalg._eps(tol)
    dims = {fw.dim for fw in frameworks}
    if len(dims) > 1:
        raise DimensionMismatch(f"frameworks act on different dimensions {sorted(dims)}")
    _merged_generators(frameworks, eps)
    for i, fa in enumerate(frameworks):
        for fb in frameworks[i + 1:]:
            for na, a in fa.generators.items():
                for nb, b in fb.generators.items():
                    if not linalg.commutes(a, b, eps):
                        return (na, nb)
    return None


def frameworks_compatible_single_time(frameworks: Sequence[Framework], tol: float | None = None) -> bool:
    return find_noncommuting_pair(frameworks, tol) is None


def generated_framework(frameworks: Sequence[Framework], tol: float | None = None, name: str = "") -> Framework:
    eps = linalg._eps(tol)
    try:
        pair = find_noncommuting_pair(frameworks, eps)
    except NotationalConflict as exc:
        raise IncompatibleFrameworks(str(exc)) from exc
    if pair is not None:
        raise IncompatibleFrameworks(f"{pair[0]!r} does not commute with {pair[1]!r}", pair)
    return build_framework(frameworks[0].dim, _merged_generators(frameworks, eps), eps, name=name)
