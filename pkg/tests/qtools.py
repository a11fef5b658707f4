"""Random operators for tests, built with plain numpy independently of the package."""

import numpy as np
from hypothesis import strategies as st

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(rng, d, scale=1.0):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (z + z.conj().T) / 2


def random_projector(rng, d, rank=None):
    if rank is None:
        rank = int(rng.integers(0, d + 1))
    v = random_unitary(rng, d)[:, :rank]
    return v @ v.conj().T


def random_commuting_projectors(rng, d, k, basis=None):
    """``k`` projectors diagonal in one random basis."""
    u = random_unitary(rng, d) if basis is None else basis
    out = []
    for _ in range(k):
        bits = rng.integers(0, 2, size=d)
        out.append(u @ np.diag(bits).astype(complex) @ u.conj().T)
    return out


def diag_projector(bits):
    return np.diag(np.asarray(bits, dtype=complex))


def rank(p):
    return int(round(np.trace(p).real))
