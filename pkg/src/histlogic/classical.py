"""Finite classical sample spaces: events as subsets, logic by set operations, weights by counting."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnknownStatementName, ZeroWeightCondition
from .framework import Formula, as_formula, fold_formula


@dataclass(frozen=True)
class FiniteSampleSpace:
    size: int
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("a sample space needs at least one point")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != self.size:
                raise DimensionMismatch(f"{len(w)} weights for {self.size} points")
            if any(x < 0 for x in w):
                raise ValueError("weights must be non-negative")
            object.__setattr__(self, "weights", w)

    def weight_of(self, point: int) -> float:
        return 1.0 if self.weights is None else self.weights[point]

    @property
    def full(self) -> "Event":
        return Event(self, (1 << self.size) - 1)

    @property
    def empty(self) -> "Event":
        return Event(self, 0)

    def event(self, points: Iterable[int]) -> "Event":
        mask = 0
        for p in points:
            if not 0 <= p < self.size:
                raise IndexError(f"point {p} outside 0..{self.size - 1}")
            mask |= 1 << p
        return Event(self, mask)

    def where(self, predicate: Callable[[int], bool]) -> "Event":
        return self.event(p for p in range(self.size) if predicate(p))


@dataclass(frozen=True)
class Event:
    space: FiniteSampleSpace
    mask: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.space.size:
            raise DimensionMismatch("event mask does not fit the space")

    @property
    def points(self) -> tuple[int, ...]:
        return tuple(p for p in range(self.space.size) if self.mask >> p & 1)

    def __len__(self):
        return bin(self.mask).count("1")

    def __contains__(self, point: int) -> bool:
        return bool(self.mask >> point & 1)

    def _same(self, other: "Event"):
        if other.space != self.space:
            raise DimensionMismatch("events live on different sample spaces")

    def __and__(self, other: "Event") -> "Event":
        self._same(other)
        return Event(self.space, self.mask & other.mask)

    def __or__(self, other: "Event") -> "Event":
        self._same(other)
        return Event(self.space, self.mask | other.mask)

    def __invert__(self) -> "Event":
        return Event(self.space, self.space.full.mask & ~self.mask)

    def issubset(self, other: "Event") -> bool:
        self._same(other)
        return self.mask & ~other.mask == 0

    @property
    def weight(self) -> float:
        if self.space.weights is None:
            return float(len(self))
        return float(sum(self.space.weights[p] for p in self.points))


def classical_phi(f: Formula | str, bindings: Mapping[str, Event]) -> Event:
    def leaf(name):
        try:
            return bindings[name]
        except KeyError:
            raise UnknownStatementName(name) from None

    return fold_formula(as_formula(f), leaf, lambda e: ~e, lambda a, b: a & b, lambda a, b: a | b)


def _intersection(space: FiniteSampleSpace, events: Sequence[Event]) -> Event:
    a = space.full
    for e in events:
        a = a & e
    return a


def classical_infer(assumptions: Sequence[Event], conclusion: Event) -> bool:
    """True when the intersection of the assumptions lies inside the conclusion."""
    return _intersection(conclusion.space, assumptions).issubset(conclusion)


def classical_cond_prob(q: Event, p: Event) -> float:
    wp = p.weight
    if wp <= 0:
        raise ZeroWeightCondition("the condition has zero weight")
    return (q & p).weight / wp


def diagonal_embedding(space: FiniteSampleSpace, e: Event) -> np.ndarray:
    diag = np.array([1.0 if p in e else 0.0 for p in range(space.size)], dtype=np.complex128)
    return np.diag(diag)


def product_space(*sizes: int) -> FiniteSampleSpace:
    """Product of unweighted spaces; point ``(x_1, ..., x_k)`` has index in row-major order."""
    return FiniteSampleSpace(int(np.prod(sizes)))


def product_index(point: Sequence[int], sizes: Sequence[int]) -> int:
    return int(np.ravel_multi_index(tuple(point), tuple(sizes)))


def product_coords(index: int, sizes: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(x) for x in np.unravel_index(index, tuple(sizes)))


# -- the dice example --------------------------------------------------------

DICE_SIZES = (6, 6, 6)


def dice_space() -> FiniteSampleSpace:
    """Three tosses of a fair die; faces stored as 0..5 for values 1..6."""
    return product_space(*DICE_SIZES)


def dice_event(predicate: Callable[[int, int, int], bool]) -> Event:
    """Event of all toss triples ``(d1, d2, d3)`` (values 1..6) satisfying ``predicate``."""
    space = dice_space()
    return space.where(lambda i: predicate(*(x + 1 for x in product_coords(i, DICE_SIZES))))


def dice_events() -> dict[str, Event]:
    """``p``: first two tosses sum to four; ``q``: total is seven; ``r``: total at least five."""
    return {
        "p": dice_event(lambda a, b, c: a + b == 4),
        "q": dice_event(lambda a, b, c: a + b + c == 7),
        "r": dice_event(lambda a, b, c: a + b + c >= 5),
    }
