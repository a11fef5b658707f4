"""Truth, master descriptions and valid inference for a system at a single time."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from . import linalg
from .errors import NotationalConflict
from .framework import (
    Formula,
    Framework,
    as_formula,
    decompose,
    find_noncommuting_pair,
    generated_framework,
    phi,
)


class Reason(str, Enum):
    PROVEN = "Proven"
    NOT_ENTAILED = "NotEntailed"
    INCOMPATIBLE = "IncompatibleFrameworks"
    CONTRADICTORY = "ContradictoryAssumptions"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Description:
    framework: Framework
    statement: Formula

    def __init__(self, framework: Framework, statement: Formula | str):
        object.__setattr__(self, "framework", framework)
        object.__setattr__(self, "statement", as_formula(statement))

    @property
    def projector(self) -> np.ndarray:
        return phi(self.statement, self.framework)


@dataclass(frozen=True)
class InferenceVerdict:
    valid: bool
    reason: Reason
    assumption_projector: Any = None
    witness: tuple[str, str] | None = None
    detail: str = ""
    probabilities: tuple[float, ...] = ()

    def __bool__(self):
        return self.valid


def entails(b: np.ndarray, s: Description, tol: float | None = None) -> bool:
    """True when property ``b`` being true implies the truth of ``s`` (``B S = B``)."""
    eps = s.framework.tol if tol is None else tol
    decompose(b, s.framework, eps)
    return linalg.max_norm(b @ s.projector - b) <= eps


def master_description(descriptions: Sequence[Description], tol: float | None = None) -> tuple[Framework, np.ndarray]:
    frameworks = _unique_frameworks(d.framework for d in descriptions)
    master = frameworks[0] if len(frameworks) == 1 else generated_framework(frameworks, tol)
    d = linalg.identity(master.dim)
    for desc in descriptions:
        d = d @ desc.projector
    return master, d


def _unique_frameworks(frameworks) -> list[Framework]:
    seen, out = set(), []
    for fw in frameworks:
        if id(fw) not in seen:
            seen.add(id(fw))
            out.append(fw)
    return out


def infer_single_time(assumptions: Sequence[Description], conclusions: Sequence[Description],
                      tol: float | None = None) -> InferenceVerdict:
    """Check the argument ``assumptions ⊢ conclusions`` at one time.

    All frameworks, assumption and conclusion alike, must form one compatible
    collection; then every conclusion ``C`` must satisfy ``C A = A`` for the
    product ``A`` of the assumption projectors.  A zero ``A`` proves nothing.
    """
    eps = linalg._eps(tol)
    frameworks = _unique_frameworks(d.framework for d in [*assumptions, *conclusions])
    if not frameworks:
        raise ValueError("an argument needs at least one description")
    try:
        pair = find_noncommuting_pair(frameworks, eps)
    except NotationalConflict as exc:
        return InferenceVerdict(False, Reason.INCOMPATIBLE, detail=str(exc))
    if pair is not None:
        return InferenceVerdict(False, Reason.INCOMPATIBLE, witness=pair,
                                detail=f"{pair[0]} does not commute with {pair[1]}")

    a = linalg.identity(frameworks[0].dim)
    for desc in assumptions:
        a = a @ desc.projector
    if linalg.is_zero(a, eps):
        return InferenceVerdict(False, Reason.CONTRADICTORY, a, detail="assumption product is zero")
    for desc in conclusions:
        if linalg.max_norm(desc.projector @ a - a) > eps:
            return InferenceVerdict(False, Reason.NOT_ENTAILED, a, detail=f"{desc.statement} is not entailed")
    return InferenceVerdict(True, Reason.PROVEN, a)
