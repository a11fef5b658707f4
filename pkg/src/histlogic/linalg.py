"""Dense complex linear algebra used throughout the engine.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Every predicate
takes an absolute tolerance on the entrywise max norm; ``None`` means
:data:`DEFAULT_EPS`.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from functools import reduce

import numpy as np

from .errors import DimensionMismatch, NonHermitian, NotAProjector, NonUnitaryStep, TooLarge

DEFAULT_EPS = 1e-9
# Largest side length of any dense matrix the engine will build.
MAX_DENSE_DIM = 4096


def _eps(tol: float | None) -> float:
    if tol is None:
        return DEFAULT_EPS
    if tol < 0:
        raise ValueError("tolerance must be non-negative")
    return float(tol)


def as_matrix(m) -> np.ndarray:
    """Coerce to a finite square complex matrix."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or infinite entries")
    return a


def max_norm(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def basis_vector(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[index] = 1.0
    return v


def adjoint(m: np.ndarray) -> np.ndarray:
    return np.conjugate(np.asarray(m)).T


def is_hermitian(m: np.ndarray, tol: float | None = None) -> bool:
    return max_norm(m - adjoint(m)) <= _eps(tol)


def is_projector(m: np.ndarray, tol: float | None = None) -> bool:
    eps = _eps(tol)
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return max_norm(m - m @ m) <= eps and max_norm(m - adjoint(m)) <= eps


def is_unitary(m: np.ndarray, tol: float | None = None) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return max_norm(adjoint(m) @ m - identity(m.shape[0])) <= _eps(tol)


def is_zero(m: np.ndarray, tol: float | None = None) -> bool:
    return max_norm(m) <= _eps(tol)


def commutes(a: np.ndarray, b: np.ndarray, tol: float | None = None) -> bool:
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot commute {a.shape} with {b.shape}")
    return max_norm(a @ b - b @ a) <= _eps(tol)


def check_size(dim: int, limit: int | None = None) -> None:
    limit = MAX_DENSE_DIM if limit is None else limit
    if dim > limit:
        raise TooLarge(f"dense dimension {dim} exceeds the limit {limit}")


def tensor(*ops: np.ndarray, limit: int | None = None) -> np.ndarray:
    """Kronecker product ``ops[0] ⊗ ops[1] ⊗ ...`` (left factor is most significant)."""
    if not ops:
        raise ValueError("tensor() needs at least one factor")
    check_size(int(np.prod([o.shape[0] for o in ops])), limit)
    return reduce(np.kron, ops)


def mat_exp_propagator(h: np.ndarray, dt: float, tol: float | None = None) -> np.ndarray:
    """``exp(-i dt H)`` for Hermitian ``H`` (units with hbar = 1).

    Computed from the eigendecomposition ``H = V diag(w) V†`` so the result is
    unitary up to roundoff.
    """
    h = as_matrix(h)
    if not is_hermitian(h, tol):
        raise NonHermitian("Hamiltonian is not Hermitian within tolerance")
    w, v = np.linalg.eigh((h + adjoint(h)) / 2)
    return (v * np.exp(-1j * dt * w)) @ adjoint(v)


def orthonormalize(vectors: Iterable[np.ndarray], tol: float | None = None,
                   start: Sequence[np.ndarray] = ()) -> list[np.ndarray]:
    """Gram-Schmidt; vectors whose residual norm falls below ``tol`` are dropped.

    ``start`` is an already orthonormal set the new vectors are made orthogonal
    to; it is not part of the returned list.
    """
    eps = _eps(tol)
    basis = [np.asarray(b, dtype=np.complex128) for b in start]
    out = []
    for v in vectors:
        r = np.array(v, dtype=np.complex128)
        # two passes keep the residual orthogonal to working precision
        for _ in range(2):
            for b in basis:
                r = r - np.vdot(b, r) * b
        norm = np.linalg.norm(r)
        if norm < eps:
            continue
        r = r / norm
        basis.append(r)
        out.append(r)
    return out


def projector_onto_span(vectors: Sequence, tol: float | None = None,
                        dim: int | None = None) -> np.ndarray:
    vecs = [np.asarray(v, dtype=np.complex128).ravel() for v in vectors]
    if not vecs:
        if dim is None:
            raise ValueError("empty span with unknown dimension")
        return np.zeros((dim, dim), dtype=np.complex128)
    n = vecs[0].shape[0]
    if any(v.shape[0] != n for v in vecs) or (dim is not None and dim != n):
        raise DimensionMismatch("vectors in a span must share one dimension")
    basis = orthonormalize(vecs, tol)
    p = np.zeros((n, n), dtype=np.complex128)
    for b in basis:
        p += np.outer(b, np.conjugate(b))
    return p


def rank_of_projector(p: np.ndarray, tol: float | None = None) -> int:
    if not is_projector(p, tol):
        raise NotAProjector("rank_of_projector needs a projector")
    return int(round(float(np.trace(p).real)))


def complete_unitary(pairs: Sequence[tuple[np.ndarray, np.ndarray]], dim: int,
                     tol: float | None = None, order: Sequence[int] | None = None,
                     phases: Sequence[complex] | None = None) -> np.ndarray:
    """Unitary ``U`` with ``U @ src = dst`` for every ``(src, dst)`` pair.

    The prescribed sources and targets must each be orthonormal.  The rest of
    the space is filled by Gram-Schmidt over the standard basis taken in
    ``order``; the k-th leftover source is sent to the k-th leftover target,
    times ``phases[k]`` when given.
    """
    eps = max(_eps(tol), 1e-12)
    src = np.array([np.asarray(s, dtype=np.complex128) for s, _ in pairs]).reshape(len(pairs), dim)
    dst = np.array([np.asarray(d, dtype=np.complex128) for _, d in pairs]).reshape(len(pairs), dim)
    for name, block in (("sources", src), ("targets", dst)):
        gram = np.conjugate(block) @ block.T
        if max_norm(gram - np.eye(len(pairs))) > 1e3 * eps:
            raise NonUnitaryStep(f"prescribed {name} are not orthonormal")
    order = list(range(dim)) if order is None else list(order)
    std = [basis_vector(dim, i) for i in order]
    rest_src = orthonormalize(std, 1e-7, start=list(src))
    rest_dst = orthonormalize(std, 1e-7, start=list(dst))
    if len(rest_src) != dim - len(pairs) or len(rest_dst) != dim - len(pairs):
        raise NonUnitaryStep("could not complete the prescribed map to a unitary")
    u = np.zeros((dim, dim), dtype=np.complex128)
    for s, d in zip(src, dst):
        u += np.outer(d, np.conjugate(s))
    for k, (s, d) in enumerate(zip(rest_src, rest_dst)):
        ph = 1.0 if phases is None else phases[k % len(phases)]
        u += ph * np.outer(d, np.conjugate(s))
    return u


def embed(op: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Lift ``op`` acting on the tensor factors ``targets`` to the full product space.

    ``op`` is ordered like ``targets``; the other factors get the identity.
    """
    dims = tuple(int(d) for d in dims)
    targets = tuple(targets)
    sub = tuple(dims[t] for t in targets)
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (int(np.prod(sub)),) * 2:
        raise DimensionMismatch(f"operator of shape {op.shape} does not act on factors {targets}")
    full = int(np.prod(dims))
    check_size(full)
    k = len(dims)
    rest = [i for i in range(k) if i not in targets]
    perm = list(targets) + rest
    big = np.kron(op, identity(int(np.prod([dims[i] for i in rest])) if rest else 1))
    # big acts on factors ordered as ``perm``; permute axes back to natural order
    shape = [dims[i] for i in perm]
    t = big.reshape(shape + shape)
    inv = list(np.argsort(perm))
    t = t.transpose(inv + [k + i for i in inv])
    return t.reshape(full, full)
