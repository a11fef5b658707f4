import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from histlogic.errors import DimensionMismatch, NonHermitian, NotAProjector, NonUnitaryStep, TooLarge
from histlogic.linalg import (
    adjoint,
    check_size,
    commutes,
    complete_unitary,
    embed,
    identity,
    is_hermitian,
    is_projector,
    is_unitary,
    mat_exp_propagator,
    projector_onto_span,
    rank_of_projector,
    tensor,
)
from qtools import random_hermitian, random_projector, random_unitary, seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
HALF = np.full((2, 2), 0.5, dtype=complex)


def test_adjoint_examples():
    assert np.array_equal(adjoint(identity(2)), identity(2))
    assert np.array_equal(adjoint(np.array([[0, 1], [0, 0]])), np.array([[0, 0], [1, 0]]))
    assert np.array_equal(adjoint(np.array([[0, 1j], [0, 0]])), np.array([[0, 0], [-1j, 0]]))


def test_is_projector_examples():
    assert is_projector(identity(2))
    assert is_projector(HALF)
    assert not is_projector(SX)
    assert is_projector(HALF + 1e-11)
    assert not is_projector(HALF + 1e-6)
    assert is_projector(HALF + 1e-6, tol=1e-5)


def test_commutes_examples():
    p = HALF
    sz_plus = np.diag([1.0, 0.0])
    assert commutes(p, identity(2))
    assert commutes(p, p)
    assert not commutes(p, sz_plus)
    with pytest.raises(DimensionMismatch):
        commutes(identity(2), identity(3))


def test_tensor_examples():
    assert np.array_equal(tensor(identity(2), identity(2)), identity(4))
    alpha = np.diag([1.0, 0.0])
    assert np.trace(tensor(alpha, identity(2))).real == 2
    with pytest.raises(TooLarge):
        tensor(identity(64), identity(65))


def test_mat_exp_examples():
    assert np.allclose(mat_exp_propagator(np.zeros((3, 3)), 4.2), identity(3), atol=1e-12)
    assert np.allclose(mat_exp_propagator(SZ, np.pi), -identity(2), atol=1e-12)
    assert np.allclose(mat_exp_propagator(SX, np.pi / 2), -1j * SX, atol=1e-12)
    with pytest.raises(NonHermitian):
        mat_exp_propagator(np.array([[0, 1], [0, 0]]), 1.0)


def test_projector_onto_span_examples():
    v = np.array([1, 1j]) / np.sqrt(2)
    assert np.allclose(projector_onto_span([v]), np.outer(v, v.conj()))
    p = projector_onto_span([[1, 0, 0], [0, 1, 0]])
    assert np.trace(p).real == pytest.approx(2)
    assert np.allclose(projector_onto_span([v, 2 * v]), projector_onto_span([v]))
    with pytest.raises(ValueError):
        projector_onto_span([])
    assert np.array_equal(projector_onto_span([], dim=2), np.zeros((2, 2)))


def test_rank_of_projector_examples():
    assert rank_of_projector(identity(4)) == 4
    assert rank_of_projector(np.zeros((3, 3))) == 0
    assert rank_of_projector(HALF) == 1
    with pytest.raises(NotAProjector):
        rank_of_projector(SX)


def test_check_size():
    check_size(4096)
    with pytest.raises(TooLarge):
        check_size(4097)
    check_size(5000, limit=5000)


@given(seeds, st.integers(1, 5))
def test_complement_of_projector_is_projector(seed, d):
    p = random_projector(np.random.default_rng(seed), d)
    assert is_projector(p)
    assert is_projector(identity(d) - p)


@given(seeds, st.integers(1, 5))
def test_adjoint_is_involution(seed, d):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    assert np.array_equal(adjoint(adjoint(m)), m)


@given(seeds)
def test_tensor_associative_and_projector_closed(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_projector(rng, int(rng.integers(1, 4))) for _ in range(3))
    # the variadic form groups from the left, so that grouping matches exactly
    assert np.array_equal(tensor(a, b, c), tensor(tensor(a, b), c))
    assert np.max(np.abs(tensor(tensor(a, b), c) - tensor(a, tensor(b, c)))) <= 1e-15
    assert is_projector(tensor(a, b))


@given(seeds, st.integers(1, 5), st.floats(-3, 3), st.floats(-3, 3))
def test_propagator_group_law(seed, d, t1, t2):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, d, scale=10 / (2 * d))
    assert np.linalg.norm(h, 2) <= 10
    u = mat_exp_propagator(h, t1) @ mat_exp_propagator(h, t2)
    assert np.max(np.abs(u - mat_exp_propagator(h, t1 + t2))) <= 1e-8
    assert is_unitary(u)


@given(seeds, st.integers(1, 5))
def test_propagator_matches_eigendecomposition(seed, d):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, d)
    w, v = np.linalg.eig(h)  # general eigensolver, not the Hermitian one used by the engine
    expected = v @ np.diag(np.exp(-0.7j * w.real)) @ np.linalg.inv(v)
    assert np.max(np.abs(mat_exp_propagator(h, 0.7) - expected)) <= 1e-9


@given(seeds, st.integers(1, 5), st.integers(1, 5))
def test_span_projector_idempotent_hermitian(seed, d, k):
    rng = np.random.default_rng(seed)
    vecs = rng.normal(size=(k, d)) + 1j * rng.normal(size=(k, d))
    p = projector_onto_span(list(vecs))
    assert is_projector(p) and is_hermitian(p)
    assert rank_of_projector(p) == np.linalg.matrix_rank(vecs)


@given(seeds, st.integers(2, 6), st.data())
def test_complete_unitary_maps_pairs(seed, d, data):
    rng = np.random.default_rng(seed)
    k = data.draw(st.integers(0, d))
    a, b = random_unitary(rng, d), random_unitary(rng, d)
    pairs = [(a[:, i], b[:, i]) for i in range(k)]
    u = complete_unitary(pairs, d)
    assert is_unitary(u)
    for s, t in pairs:
        assert np.allclose(u @ s, t, atol=1e-9)


def test_complete_unitary_rejects_non_orthonormal():
    with pytest.raises(NonUnitaryStep):
        complete_unitary([([1, 0], [1, 0]), ([1, 0], [0, 1])], 2)


@given(seeds)
def test_embed_matches_kron_up_to_factor_order(seed):
    rng = np.random.default_rng(seed)
    dims = (2, 3, 2)
    a, b = random_unitary(rng, 2), random_unitary(rng, 2)
    ab = np.kron(a, b)
    expected = np.kron(np.kron(a, identity(3)), b)
    assert np.allclose(embed(ab, [0, 2], dims), expected)
    # reversed target order means the operator's first factor is factor 2
    expected_rev = np.kron(np.kron(b, identity(3)), a)
    assert np.allclose(embed(ab, [2, 0], dims), expected_rev)
    assert np.allclose(embed(a, [0], dims), np.kron(a, identity(6)))


def test_embed_dimension_check():
    with pytest.raises(DimensionMismatch):
        embed(identity(3), [0], (2, 3))
